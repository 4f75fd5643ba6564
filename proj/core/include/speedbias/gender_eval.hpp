#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "speedbias/generation.hpp"

namespace speedbias::eval {

enum class Verdict { Correct, Incorrect, Inconclusive };
enum class Reason {
  ExpectedFormFound,
  OppositeFormFound,
  NoFormFound,
  NumberMismatch,
  BothGendersFound,
};

const char* verdict_name(Verdict v);
const char* reason_name(Reason r);

struct EvalOutcome {
  Verdict verdict = Verdict::Inconclusive;
  Reason reason = Reason::NoFormFound;
  std::optional<std::string> matched_form;  // original-cased dictionary form
};

// Lowercases (ASCII + Latin-1 + Latin Extended-A), composes combining
// acute/tilde/diaeresis onto their base vowels/n, splits on whitespace and
// strips leading/trailing .,;:!?¡¿ per token. Diacritics are preserved.
std::vector<std::string> normalize(std::string_view text);

class GenderDictionary {
 public:
  // TSV with header english/number/<lang>_masc/<lang>_fem columns;
  // synonyms separated by '|'. language picks the column pair ("es", "de").
  static GenderDictionary load(const std::filesystem::path& file,
                               const std::string& language);
  static GenderDictionary load(std::istream& in, const std::string& origin,
                               const std::string& language);

  const std::string& language() const { return language_; }
  std::size_t size() const { return entries_.size(); }
  bool has(const std::string& lemma, gen::Number number) const;
  // All surface forms for one gender, original casing. Throws DataError if
  // the (lemma, number) entry is missing.
  const std::vector<std::string>& forms(const std::string& lemma,
                                        gen::Number number, gen::Gender g) const;

 private:
  struct Entry {
    std::vector<std::string> feminine, masculine;
    // normalized token sequences, index-aligned with the surface lists
    std::vector<std::vector<std::string>> feminine_tokens, masculine_tokens;
  };
  const Entry& entry(const std::string& lemma, gen::Number number) const;

  std::string language_;
  std::map<std::pair<std::string, gen::Number>, Entry> entries_;

  friend EvalOutcome judge(const gen::TestItem&, const std::string&,
                           const GenderDictionary&);
};

// Dictionary-based verdict for one translation. Lookup order: expected-gender
// forms, opposite-gender forms (same number), then other-number forms.
EvalOutcome judge(const gen::TestItem& item, const std::string& translation,
                  const GenderDictionary& dict);

struct CategoryCounts {
  long correct = 0;
  long incorrect = 0;
  long inconclusive = 0;
  long total() const { return correct + incorrect + inconclusive; }
};

struct SubgroupTally {
  CategoryCounts momc, mofc, fofc, fomc;
  CategoryCounts& at(gen::Category c);
  const CategoryCounts& at(gen::Category c) const;
  CategoryCounts pro() const;   // MOMC + FOFC
  CategoryCounts anti() const;  // MOFC + FOMC
  long total() const;
};

struct ItemOutcome {
  std::string item_id;
  gen::Category category = gen::Category::FOFC;
  std::string translation;
  EvalOutcome outcome;
};

struct CorpusEvaluation {
  SubgroupTally tally;
  std::vector<ItemOutcome> outcomes;  // item order preserved
};

// translations[i] answers items[i]; throws DataError on length mismatch or
// on a lemma/number pair missing from the dictionary.
CorpusEvaluation evaluate_corpus(const std::vector<gen::TestItem>& items,
                                 const std::vector<std::string>& translations,
                                 const GenderDictionary& dict);

void write_outcomes_jsonl(std::ostream& out,
                          const std::vector<ItemOutcome>& outcomes);
void write_outcomes_jsonl(const std::filesystem::path& file,
                          const std::vector<ItemOutcome>& outcomes);

}  // namespace speedbias::eval
