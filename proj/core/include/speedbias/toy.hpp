#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "speedbias/gender_eval.hpp"
#include "speedbias/generation.hpp"

namespace speedbias::toy {

// Deterministic rule-based translator into a lowercase pseudo-Spanish toy
// language: word-for-word with English word order, gender-agreeing
// determiners, and occupation nouns rendered with the context-gender
// dictionary form (first synonym). Used to manufacture references and
// training data; not a natural language.
class ToyTranslator {
 public:
  ToyTranslator(const gen::Lexicon& lexicon, const eval::GenderDictionary& dict);

  std::string translate(const gen::TestItem& item) const;
  // Raw sentence plus the gender to use for occupation forms.
  std::string translate_sentence(const std::string& source,
                                 gen::Gender context_gender) const;

  // English words without a mapping (empty when the corpus is covered).
  std::vector<std::string> unmapped_words(
      const std::vector<gen::TestItem>& items) const;

 private:
  struct OccEntry {
    std::vector<std::string> words;  // lowercase English surface tokens
    std::string lemma;
    gen::Number number;
  };
  const eval::GenderDictionary* dict_;
  std::vector<OccEntry> occupations_;  // longest surfaces first
};

struct SplitItems {
  std::vector<gen::TestItem> train, test;
};

// Deterministic template-level split: template ordinal % fold == fold-1
// goes to test, so train and test never share a template.
SplitItems split_by_template(const std::vector<gen::TestItem>& items, int fold = 3);

// n_pro = round(size * bias_ratio) items drawn (with replacement) from the
// pro-stereotypical subset, the rest from the anti subset.
std::vector<gen::TestItem> sample_biased(const std::vector<gen::TestItem>& pool,
                                         std::size_t size, double bias_ratio,
                                         std::uint64_t seed);

// Round-robin over the four categories, preserving in-category order; keeps
// every category populated for any cap >= 4.
std::vector<gen::TestItem> stratified_cap(const std::vector<gen::TestItem>& items,
                                          std::size_t max_items);

using ParallelPair = std::pair<std::string, std::string>;  // (source, target)

std::vector<ParallelPair> make_parallel(const std::vector<gen::TestItem>& items,
                                        const ToyTranslator& translator);

}  // namespace speedbias::toy
