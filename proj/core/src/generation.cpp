#include "speedbias/generation.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "speedbias/errors.hpp"

namespace speedbias::gen {
namespace {

using nlohmann::ordered_json;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool consume_suffix(std::string& s, const std::string& suffix) {
  if (s.size() >= suffix.size() &&
      s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    s.erase(s.size() - suffix.size());
    return true;
  }
  return false;
}

Role parse_role(const std::string& name, const std::string& full) {
  if (name == "occ") return Role::Occupation;
  if (name == "rel") return Role::Relation;
  if (name == "n") return Role::Noun;
  if (name == "sbj-prn") return Role::SubjectPronoun;
  if (name == "obj-prn") return Role::ObjectPronoun;
  if (name == "pos-prn") return Role::PossessivePronoun;
  if (name == "obj-pos-prn") return Role::ObjectPossessivePronoun;
  throw DataError("unknown keyword '" + full + "'");
}

const char* role_name(Role r) {
  switch (r) {
    case Role::Occupation: return "occ";
    case Role::Relation: return "rel";
    case Role::Noun: return "n";
    case Role::SubjectPronoun: return "sbj-prn";
    case Role::ObjectPronoun: return "obj-prn";
    case Role::PossessivePronoun: return "pos-prn";
    case Role::ObjectPossessivePronoun: return "obj-pos-prn";
  }
  return "?";
}

std::string number_tag(Number n) {
  switch (n) {
    case Number::Singular: return "sg";
    case Number::Plural: return "pl";
    case Number::Unmarked: return "";
  }
  return "";
}

}  // namespace

char gender_letter(Gender g) { return g == Gender::Feminine ? 'F' : 'M'; }

Gender opposite(Gender g) {
  return g == Gender::Feminine ? Gender::Masculine : Gender::Feminine;
}

SlotKey parse_slot_keyword(const std::string& name) {
  std::string rest = name;
  SlotKey key;
  if (consume_suffix(rest, "-C")) {
    key.phonetic = Phonetic::Consonant;
  } else if (consume_suffix(rest, "-V")) {
    key.phonetic = Phonetic::Vowel;
  }
  if (consume_suffix(rest, "-sg")) {
    key.number = Number::Singular;
  } else if (consume_suffix(rest, "-pl")) {
    key.number = Number::Plural;
  }
  key.role = parse_role(rest, name);
  if (key.role != Role::Occupation && key.phonetic != Phonetic::Any)
    throw DataError("keyword '" + name +
                    "': phonetic constraint is only valid on occupations");
  if (key.role == Role::Occupation && key.number == Number::Unmarked)
    throw DataError("keyword '" + name + "': occupations must be sg or pl");
  return key;
}

std::string slot_keyword_name(const SlotKey& key) {
  std::string out = role_name(key.role);
  if (key.number != Number::Unmarked) out += "-" + number_tag(key.number);
  if (key.phonetic == Phonetic::Consonant) out += "-C";
  if (key.phonetic == Phonetic::Vowel) out += "-V";
  return out;
}

Template parse_template(std::string id, const std::string& text) {
  Template tpl;
  tpl.id = std::move(id);
  tpl.text = text;
  std::string literal;
  std::size_t occupations = 0;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      std::size_t close = text.find('}', i + 1);
      if (close == std::string::npos)
        throw DataError("template " + tpl.id + ": unterminated '{'");
      if (!literal.empty()) {
        tpl.segments.push_back({false, literal, {}});
        literal.clear();
      }
      SlotKey key = parse_slot_keyword(text.substr(i + 1, close - i - 1));
      if (key.role == Role::Occupation) {
        tpl.occupation_segment = tpl.segments.size();
        ++occupations;
      }
      tpl.segments.push_back({true, "", key});
      i = close + 1;
    } else if (text[i] == '}') {
      throw DataError("template " + tpl.id + ": '}' without '{'");
    } else {
      literal += text[i];
      ++i;
    }
  }
  if (!literal.empty()) tpl.segments.push_back({false, literal, {}});
  if (occupations != 1)
    throw DataError("template " + tpl.id + ": needs exactly one occupation slot, has " +
                    std::to_string(occupations));
  return tpl;
}

std::vector<Template> load_templates(std::istream& in, const std::string& origin) {
  std::vector<Template> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    char buf[8];
    std::snprintf(buf, sizeof buf, "t%02zu", out.size() + 1);
    try {
      // Keep the raw (untrimmed-right) text? Trailing spaces are noise; the
      // trimmed form expands identically after normalize_spacing.
      out.push_back(parse_template(buf, t));
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(origin + ": no templates found");
  return out;
}

std::vector<Template> load_templates(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open templates file " + file.string());
  return load_templates(in, file.string());
}

Lexicon Lexicon::load(std::istream& in, const std::string& origin) {
  Lexicon lex;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = line;
    if (trim(t).empty() || trim(t)[0] == '#') continue;
    std::size_t tab = line.find('\t');
    std::string name = trim(tab == std::string::npos ? line : line.substr(0, tab));
    std::string rhs = tab == std::string::npos ? "" : line.substr(tab + 1);
    const std::string where = origin + ":" + std::to_string(lineno);
    if (name.size() < 3 || (name[0] != 'f' && name[0] != 'm') || name[1] != '-')
      throw DataError(where + ": keyword must start with 'f-' or 'm-'");
    Gender g = name[0] == 'f' ? Gender::Feminine : Gender::Masculine;
    SlotKey key;
    try {
      key = parse_slot_keyword(name.substr(2));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    std::vector<std::string> values;
    if (!trim(rhs).empty()) {
      std::stringstream ss(rhs);
      std::string v;
      while (std::getline(ss, v, ',')) {
        v = trim(v);
        if (v.empty())
          throw DataError(where + ": empty value in list");
        if (v.find('{') != std::string::npos || v.find('}') != std::string::npos)
          throw DataError(where + ": value contains a placeholder delimiter");
        values.push_back(v);
      }
    }
    auto [it, fresh] = lex.values_.emplace(std::make_pair(key, g), std::move(values));
    if (!fresh) throw DataError(where + ": duplicate keyword " + name);
  }
  // Lemma recovery needs the unconstrained sg/pl occupation lists aligned.
  for (Gender g : {Gender::Feminine, Gender::Masculine}) {
    SlotKey sg{Role::Occupation, Number::Singular, Phonetic::Any};
    SlotKey pl{Role::Occupation, Number::Plural, Phonetic::Any};
    if (lex.has(sg, g) != lex.has(pl, g))
      throw DataError(origin + ": occupation sg/pl lists must come in pairs");
    if (lex.has(sg, g) && lex.values(sg, g).size() != lex.values(pl, g).size())
      throw DataError(origin + ": occupation sg/pl lists must be index-aligned");
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open lexicon file " + file.string());
  return load(in, file.string());
}

const std::vector<std::string>& Lexicon::values(const SlotKey& key, Gender g) const {
  auto it = values_.find(std::make_pair(key, g));
  if (it == values_.end())
    throw DataError("lexicon has no entry for " + std::string(1, g == Gender::Feminine ? 'f' : 'm') +
                    "-" + slot_keyword_name(key));
  return it->second;
}

bool Lexicon::has(const SlotKey& key, Gender g) const {
  return values_.find(std::make_pair(key, g)) != values_.end();
}

std::string Lexicon::occupation_lemma(const std::string& surface, Gender g,
                                      Number n) const {
  SlotKey sg{Role::Occupation, Number::Singular, Phonetic::Any};
  if (n == Number::Singular) {
    for (const auto& v : values(sg, g))
      if (v == surface) return surface;
    throw DataError("unknown singular occupation '" + surface + "'");
  }
  SlotKey pl{Role::Occupation, Number::Plural, Phonetic::Any};
  const auto& plurals = values(pl, g);
  for (std::size_t i = 0; i < plurals.size(); ++i)
    if (plurals[i] == surface) return values(sg, g)[i];
  throw DataError("unknown plural occupation '" + surface + "'");
}

Category category_of(Gender stereotype, Gender context) {
  if (stereotype == Gender::Masculine)
    return context == Gender::Masculine ? Category::MOMC : Category::MOFC;
  return context == Gender::Feminine ? Category::FOFC : Category::FOMC;
}

bool is_pro_stereotypical(Category c) {
  return c == Category::MOMC || c == Category::FOFC;
}

const char* category_name(Category c) {
  switch (c) {
    case Category::MOMC: return "MOMC";
    case Category::MOFC: return "MOFC";
    case Category::FOFC: return "FOFC";
    case Category::FOMC: return "FOMC";
  }
  return "?";
}

Category parse_category(const std::string& name) {
  if (name == "MOMC") return Category::MOMC;
  if (name == "MOFC") return Category::MOFC;
  if (name == "FOFC") return Category::FOFC;
  if (name == "FOMC") return Category::FOMC;
  throw DataError("unknown category '" + name + "'");
}

std::string normalize_spacing(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  auto is_attached_punct = [](char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
  };
  for (char c : text) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    if (is_attached_punct(c) && !out.empty() && out.back() == ' ') out.pop_back();
    out += c;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<TestItem> expand_template(const Template& tpl, const Lexicon& lex,
                                      Gender occ_gender, Gender ctx_gender) {
  struct SlotRef {
    std::size_t segment;
    const std::vector<std::string>* values;
  };
  std::vector<SlotRef> slots;
  for (std::size_t i = 0; i < tpl.segments.size(); ++i) {
    const Segment& seg = tpl.segments[i];
    if (!seg.is_slot) continue;
    Gender g = seg.slot.role == Role::Occupation ? occ_gender : ctx_gender;
    slots.push_back({i, &lex.values(seg.slot, g)});
  }
  std::vector<TestItem> items;
  for (const SlotRef& s : slots)
    if (s.values->empty()) return items;

  const SlotKey& occ_key = tpl.segments[tpl.occupation_segment].slot;
  std::vector<std::size_t> idx(slots.size(), 0);
  while (true) {
    TestItem item;
    item.template_id = tpl.id;
    item.stereotype_gender = occ_gender;
    item.context_gender = ctx_gender;
    item.category = category_of(occ_gender, ctx_gender);
    item.occupation_number = occ_key.number;
    std::string text;
    std::string id_suffix;
    std::size_t slot_i = 0;
    for (std::size_t seg_i = 0; seg_i < tpl.segments.size(); ++seg_i) {
      const Segment& seg = tpl.segments[seg_i];
      if (!seg.is_slot) {
        text += seg.literal;
        continue;
      }
      const std::string& value = (*slots[slot_i].values)[idx[slot_i]];
      text += value;
      if (!id_suffix.empty()) id_suffix += '-';
      id_suffix += std::to_string(idx[slot_i]);
      if (seg_i == tpl.occupation_segment)
        item.occupation_lemma =
            lex.occupation_lemma(value, occ_gender, occ_key.number);
      ++slot_i;
    }
    item.source = normalize_spacing(text);
    item.id = tpl.id + ":" + gender_letter(occ_gender) + gender_letter(ctx_gender) +
              ":" + id_suffix;
    items.push_back(std::move(item));

    // odometer over slot value indices, last slot fastest
    std::size_t k = slots.size();
    while (k > 0) {
      --k;
      if (++idx[k] < slots[k].values->size()) break;
      idx[k] = 0;
      if (k == 0) return items;
    }
  }
}

std::vector<TestItem> generate_corpus(const std::vector<Template>& templates,
                                      const Lexicon& lex) {
  static constexpr std::pair<Gender, Gender> kBindings[] = {
      {Gender::Masculine, Gender::Masculine},
      {Gender::Masculine, Gender::Feminine},
      {Gender::Feminine, Gender::Feminine},
      {Gender::Feminine, Gender::Masculine},
  };
  std::vector<TestItem> all;
  for (const Template& tpl : templates) {
    for (auto [og, cg] : kBindings) {
      auto items = expand_template(tpl, lex, og, cg);
      all.insert(all.end(), std::make_move_iterator(items.begin()),
                 std::make_move_iterator(items.end()));
    }
  }
  return all;
}

namespace {

std::string gender_tag(Gender g) { return g == Gender::Feminine ? "F" : "M"; }

Gender parse_gender_tag(const std::string& s) {
  if (s == "F") return Gender::Feminine;
  if (s == "M") return Gender::Masculine;
  throw DataError("bad gender tag '" + s + "'");
}

Number parse_number_tag(const std::string& s) {
  if (s == "sg") return Number::Singular;
  if (s == "pl") return Number::Plural;
  throw DataError("bad number tag '" + s + "'");
}

}  // namespace

void write_corpus_jsonl(std::ostream& out, const std::vector<TestItem>& items) {
  for (const TestItem& item : items) {
    ordered_json j;
    j["id"] = item.id;
    j["source"] = item.source;
    j["occupation_lemma"] = item.occupation_lemma;
    j["occupation_number"] = number_tag(item.occupation_number);
    j["context_gender"] = gender_tag(item.context_gender);
    j["stereotype_gender"] = gender_tag(item.stereotype_gender);
    j["category"] = category_name(item.category);
    j["template_id"] = item.template_id;
    out << j.dump() << '\n';
  }
}

void write_corpus_jsonl(const std::filesystem::path& file,
                        const std::vector<TestItem>& items) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write corpus file " + file.string());
  write_corpus_jsonl(out, items);
}

std::vector<TestItem> read_corpus_jsonl(std::istream& in) {
  std::vector<TestItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      TestItem item;
      item.id = j.at("id").get<std::string>();
      item.source = j.at("source").get<std::string>();
      item.occupation_lemma = j.at("occupation_lemma").get<std::string>();
      item.occupation_number =
          parse_number_tag(j.at("occupation_number").get<std::string>());
      item.context_gender = parse_gender_tag(j.at("context_gender").get<std::string>());
      item.stereotype_gender =
          parse_gender_tag(j.at("stereotype_gender").get<std::string>());
      item.category = parse_category(j.at("category").get<std::string>());
      item.template_id = j.at("template_id").get<std::string>();
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

std::vector<TestItem> read_corpus_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open corpus file " + file.string());
  return read_corpus_jsonl(in);
}

}  // namespace speedbias::gen
