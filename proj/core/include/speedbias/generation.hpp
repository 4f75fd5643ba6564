#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace speedbias::gen {

enum class Gender { Feminine, Masculine };
// Unmarked covers suffixless keywords (rel, n, pronouns) whose values carry
// no grammatical number of their own.
enum class Number { Singular, Plural, Unmarked };
enum class Phonetic { Any, Consonant, Vowel };
enum class Role {
  Occupation,
  Relation,
  Noun,
  SubjectPronoun,
  ObjectPronoun,
  PossessivePronoun,
  ObjectPossessivePronoun,
};

char gender_letter(Gender g);
Gender opposite(Gender g);

// Slot identity inside a template: gender is deliberately absent, it is
// bound at expansion time.
struct SlotKey {
  Role role = Role::Occupation;
  Number number = Number::Unmarked;
  Phonetic phonetic = Phonetic::Any;
  auto operator<=>(const SlotKey&) const = default;
};

// Parses "occ-sg-C", "rel", "obj-pos-prn", ... (no gender prefix).
SlotKey parse_slot_keyword(const std::string& name);
std::string slot_keyword_name(const SlotKey& key);

struct Segment {
  bool is_slot = false;
  std::string literal;  // set when !is_slot
  SlotKey slot;         // set when is_slot
};

struct Template {
  std::string id;
  std::string text;  // raw text with {keyword} placeholders
  std::vector<Segment> segments;
  std::size_t occupation_segment = 0;  // index into segments
};

// Throws DataError unless the text has exactly one occupation slot and all
// keywords parse.
Template parse_template(std::string id, const std::string& text);

// Templates file: one template per line, '#' lines and blank lines skipped.
// Ids are assigned t01, t02, ... in file order.
std::vector<Template> load_templates(const std::filesystem::path& file);
std::vector<Template> load_templates(std::istream& in, const std::string& origin);

class Lexicon {
 public:
  // Lexicon file: one keyword per line, "<f|m>-<keyword>\tv1,v2,...".
  static Lexicon load(const std::filesystem::path& file);
  static Lexicon load(std::istream& in, const std::string& origin);

  const std::vector<std::string>& values(const SlotKey& key, Gender g) const;
  bool has(const SlotKey& key, Gender g) const;
  // Singular lemma for an occupation surface form (plural surfaces map back
  // through the index-aligned sg/pl lists). Throws DataError if unknown.
  std::string occupation_lemma(const std::string& surface, Gender g,
                               Number n) const;

 private:
  std::map<std::pair<SlotKey, Gender>, std::vector<std::string>> values_;
};

enum class Category { MOMC, MOFC, FOFC, FOMC };

Category category_of(Gender stereotype, Gender context);
bool is_pro_stereotypical(Category c);
const char* category_name(Category c);
Category parse_category(const std::string& name);

struct TestItem {
  std::string id;
  std::string source;
  std::string occupation_lemma;
  Number occupation_number = Number::Singular;
  Gender context_gender = Gender::Feminine;
  Gender stereotype_gender = Gender::Feminine;
  Category category = Category::FOFC;
  std::string template_id;
};

// Cartesian expansion of one template under a fixed (occupation gender,
// context gender) binding. Occupation slots use occ_gender, every other
// slot uses ctx_gender. Returns items in lexicographic slot-index order.
std::vector<TestItem> expand_template(const Template& tpl, const Lexicon& lex,
                                      Gender occ_gender, Gender ctx_gender);

// All templates x all four gender bindings (MM, MF, FF, FM per template).
std::vector<TestItem> generate_corpus(const std::vector<Template>& templates,
                                      const Lexicon& lex);

// Collapses runs of spaces and removes spaces before .,!?;: (the raw
// templates carry both artifacts).
std::string normalize_spacing(const std::string& text);

void write_corpus_jsonl(std::ostream& out, const std::vector<TestItem>& items);
void write_corpus_jsonl(const std::filesystem::path& file,
                        const std::vector<TestItem>& items);
std::vector<TestItem> read_corpus_jsonl(std::istream& in);
std::vector<TestItem> read_corpus_jsonl(const std::filesystem::path& file);

}  // namespace speedbias::gen
