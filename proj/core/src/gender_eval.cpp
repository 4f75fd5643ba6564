#include "speedbias/gender_eval.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "speedbias/errors.hpp"

namespace speedbias::eval {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// --- minimal UTF-8 / case / composition machinery -------------------------
// The evaluation protocol needs deterministic matching for Spanish and
// German surface forms; full Unicode is out of scope.

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> cps;
  cps.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b = s[i];
    char32_t cp = 0;
    int extra = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F;
      extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F;
      extra = 2;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07;
      extra = 3;
    } else {
      // stray continuation byte: treat as Latin-1
      cps.push_back(b);
      ++i;
      continue;
    }
    if (i + extra >= s.size() + (extra == 0 ? 1 : 0)) {
      if (i + extra >= s.size() && extra > 0) {
        cps.push_back(b);  // truncated sequence, keep lead byte as Latin-1
        ++i;
        continue;
      }
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size() || (static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    if (!ok) {
      cps.push_back(b);
      ++i;
      continue;
    }
    cps.push_back(cp);
    i += extra + 1;
  }
  return cps;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// combining acute / tilde / diaeresis onto the vowels and n used by the
// target languages
char32_t compose(char32_t base, char32_t mark) {
  struct Row {
    char32_t base, acute, tilde, diaeresis;
  };
  static constexpr Row kRows[] = {
      {U'a', 0xE1, 0xE3, 0xE4}, {U'e', 0xE9, 0, 0xEB},    {U'i', 0xED, 0, 0xEF},
      {U'o', 0xF3, 0xF5, 0xF6}, {U'u', 0xFA, 0, 0xFC},    {U'n', 0, 0xF1, 0},
      {U'A', 0xC1, 0xC3, 0xC4}, {U'E', 0xC9, 0, 0xCB},    {U'I', 0xCD, 0, 0xCF},
      {U'O', 0xD3, 0xD5, 0xD6}, {U'U', 0xDA, 0, 0xDC},    {U'N', 0, 0xD1, 0},
  };
  for (const Row& r : kRows) {
    if (r.base != base) continue;
    if (mark == 0x0301) return r.acute;
    if (mark == 0x0303) return r.tilde;
    if (mark == 0x0308) return r.diaeresis;
  }
  return 0;
}

char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp == 0x179 || cp == 0x17B || cp == 0x17D) return cp + 1;
  if (cp == 0x1E9E) return 0xDF;
  return cp;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0xA0;
}

bool is_edge_punct(char32_t cp) {
  return cp == U'!' || cp == U'?' || cp == U'.' || cp == U',' || cp == U';' ||
         cp == U':' || cp == 0xA1 /* inverted ! */ || cp == 0xBF /* inverted ? */;
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::vector<char32_t> cps = decode_utf8(text);
  std::vector<char32_t> composed;
  composed.reserve(cps.size());
  for (char32_t cp : cps) {
    if (!composed.empty() && (cp == 0x0301 || cp == 0x0303 || cp == 0x0308)) {
      if (char32_t c = compose(composed.back(), cp)) {
        composed.back() = c;
        continue;
      }
    }
    composed.push_back(cp);
  }
  for (char32_t& cp : composed) cp = to_lower(cp);

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < composed.size()) {
    while (i < composed.size() && is_space(composed[i])) ++i;
    std::size_t b = i;
    while (i < composed.size() && !is_space(composed[i])) ++i;
    std::size_t e = i;
    while (b < e && is_edge_punct(composed[b])) ++b;
    while (e > b && is_edge_punct(composed[e - 1])) --e;
    if (b < e) {
      std::string tok;
      for (std::size_t k = b; k < e; ++k) encode_utf8(composed[k], tok);
      tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::Incorrect: return "incorrect";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

const char* reason_name(Reason r) {
  switch (r) {
    case Reason::ExpectedFormFound: return "expected-form-found";
    case Reason::OppositeFormFound: return "opposite-form-found";
    case Reason::NoFormFound: return "no-form-found";
    case Reason::NumberMismatch: return "number-mismatch";
    case Reason::BothGendersFound: return "both-genders-found";
  }
  return "?";
}

GenderDictionary GenderDictionary::load(std::istream& in, const std::string& origin,
                                        const std::string& language) {
  GenderDictionary dict;
  dict.language_ = language;
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty dictionary");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) header.push_back(trim(col));
  }
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<long>(i);
    return -1L;
  };
  long c_en = col_index("english");
  long c_num = col_index("number");
  long c_masc = col_index(language + "_masc");
  long c_fem = col_index(language + "_fem");
  if (c_en < 0 || c_num < 0)
    throw DataError(origin + ": header must have english and number columns");
  if (c_masc < 0 || c_fem < 0)
    throw DataError(origin + ": no columns for language '" + language + "'");

  auto split_forms = [&](const std::string& cell, const std::string& where) {
    std::vector<std::string> forms;
    std::stringstream ss(cell);
    std::string f;
    while (std::getline(ss, f, '|')) {
      f = trim(f);
      if (f.empty()) throw DataError(where + ": empty surface form");
      forms.push_back(f);
    }
    if (forms.empty()) throw DataError(where + ": entry needs at least one form");
    return forms;
  };

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    const std::string where = origin + ":" + std::to_string(lineno);
    auto max_col = std::max({c_en, c_num, c_masc, c_fem});
    if (static_cast<long>(cells.size()) <= max_col)
      throw DataError(where + ": row has too few columns");
    std::string lemma = trim(cells[c_en]);
    std::string num_s = trim(cells[c_num]);
    gen::Number number;
    if (num_s == "sg") {
      number = gen::Number::Singular;
    } else if (num_s == "pl") {
      number = gen::Number::Plural;
    } else {
      throw DataError(where + ": number must be sg or pl");
    }
    Entry entry;
    entry.masculine = split_forms(trim(cells[c_masc]), where);
    entry.feminine = split_forms(trim(cells[c_fem]), where);
    for (const auto& f : entry.masculine) {
      entry.masculine_tokens.push_back(normalize(f));
      if (entry.masculine_tokens.back().empty())
        throw DataError(where + ": form '" + f + "' normalizes to nothing");
    }
    for (const auto& f : entry.feminine) {
      entry.feminine_tokens.push_back(normalize(f));
      if (entry.feminine_tokens.back().empty())
        throw DataError(where + ": form '" + f + "' normalizes to nothing");
    }
    auto [it, fresh] =
        dict.entries_.emplace(std::make_pair(lemma, number), std::move(entry));
    if (!fresh) throw DataError(where + ": duplicate entry for " + lemma + "/" + num_s);
  }
  if (dict.entries_.empty()) throw DataError(origin + ": dictionary has no rows");
  return dict;
}

GenderDictionary GenderDictionary::load(const std::filesystem::path& file,
                                        const std::string& language) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open dictionary file " + file.string());
  return load(in, file.string(), language);
}

const GenderDictionary::Entry& GenderDictionary::entry(const std::string& lemma,
                                                       gen::Number number) const {
  auto it = entries_.find(std::make_pair(lemma, number));
  if (it == entries_.end())
    throw DataError("dictionary (" + language_ + ") has no entry for '" + lemma +
                    "' (" + (number == gen::Number::Singular ? "sg" : "pl") + ")");
  return it->second;
}

bool GenderDictionary::has(const std::string& lemma, gen::Number number) const {
  return entries_.find(std::make_pair(lemma, number)) != entries_.end();
}

const std::vector<std::string>& GenderDictionary::forms(const std::string& lemma,
                                                        gen::Number number,
                                                        gen::Gender g) const {
  const Entry& e = entry(lemma, number);
  return g == gen::Gender::Feminine ? e.feminine : e.masculine;
}

namespace {

bool contains_run(const std::vector<std::string>& haystack,
                  const std::vector<std::string>& needle) {
  if (needle.empty() || haystack.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool hit = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (haystack[i + k] != needle[k]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

// index of the first matching form, or -1
long first_match(const std::vector<std::string>& tokens,
                 const std::vector<std::vector<std::string>>& form_tokens) {
  for (std::size_t i = 0; i < form_tokens.size(); ++i)
    if (contains_run(tokens, form_tokens[i])) return static_cast<long>(i);
  return -1;
}

}  // namespace

EvalOutcome judge(const gen::TestItem& item, const std::string& translation,
                  const GenderDictionary& dict) {
  const auto& entry = dict.entry(item.occupation_lemma, item.occupation_number);
  std::vector<std::string> tokens = normalize(translation);

  bool expect_fem = item.context_gender == gen::Gender::Feminine;
  const auto& exp_forms = expect_fem ? entry.feminine : entry.masculine;
  const auto& exp_tokens = expect_fem ? entry.feminine_tokens : entry.masculine_tokens;
  const auto& opp_forms = expect_fem ? entry.masculine : entry.feminine;
  const auto& opp_tokens = expect_fem ? entry.masculine_tokens : entry.feminine_tokens;

  long exp_hit = first_match(tokens, exp_tokens);
  long opp_hit = first_match(tokens, opp_tokens);
  EvalOutcome out;
  if (exp_hit >= 0 && opp_hit >= 0) {
    out.verdict = Verdict::Inconclusive;
    out.reason = Reason::BothGendersFound;
    out.matched_form = exp_forms[exp_hit];
    return out;
  }
  if (exp_hit >= 0) {
    out.verdict = Verdict::Correct;
    out.reason = Reason::ExpectedFormFound;
    out.matched_form = exp_forms[exp_hit];
    return out;
  }
  if (opp_hit >= 0) {
    out.verdict = Verdict::Incorrect;
    out.reason = Reason::OppositeFormFound;
    out.matched_form = opp_forms[opp_hit];
    return out;
  }
  gen::Number other = item.occupation_number == gen::Number::Singular
                          ? gen::Number::Plural
                          : gen::Number::Singular;
  if (dict.has(item.occupation_lemma, other)) {
    const auto& oe = dict.entry(item.occupation_lemma, other);
    long fem_hit = first_match(tokens, oe.feminine_tokens);
    if (fem_hit >= 0) {
      out.verdict = Verdict::Inconclusive;
      out.reason = Reason::NumberMismatch;
      out.matched_form = oe.feminine[fem_hit];
      return out;
    }
    long masc_hit = first_match(tokens, oe.masculine_tokens);
    if (masc_hit >= 0) {
      out.verdict = Verdict::Inconclusive;
      out.reason = Reason::NumberMismatch;
      out.matched_form = oe.masculine[masc_hit];
      return out;
    }
  }
  out.verdict = Verdict::Inconclusive;
  out.reason = Reason::NoFormFound;
  return out;
}

CategoryCounts& SubgroupTally::at(gen::Category c) {
  switch (c) {
    case gen::Category::MOMC: return momc;
    case gen::Category::MOFC: return mofc;
    case gen::Category::FOFC: return fofc;
    case gen::Category::FOMC: return fomc;
  }
  return momc;
}

const CategoryCounts& SubgroupTally::at(gen::Category c) const {
  return const_cast<SubgroupTally*>(this)->at(c);
}

CategoryCounts SubgroupTally::pro() const {
  return {momc.correct + fofc.correct, momc.incorrect + fofc.incorrect,
          momc.inconclusive + fofc.inconclusive};
}

CategoryCounts SubgroupTally::anti() const {
  return {mofc.correct + fomc.correct, mofc.incorrect + fomc.incorrect,
          mofc.inconclusive + fomc.inconclusive};
}

long SubgroupTally::total() const {
  return momc.total() + mofc.total() + fofc.total() + fomc.total();
}

CorpusEvaluation evaluate_corpus(const std::vector<gen::TestItem>& items,
                                 const std::vector<std::string>& translations,
                                 const GenderDictionary& dict) {
  if (items.size() != translations.size())
    throw DataError("evaluate_corpus: " + std::to_string(items.size()) + " items vs " +
                    std::to_string(translations.size()) + " translations");
  CorpusEvaluation ev;
  ev.outcomes.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EvalOutcome out = judge(items[i], translations[i], dict);
    CategoryCounts& counts = ev.tally.at(items[i].category);
    switch (out.verdict) {
      case Verdict::Correct: ++counts.correct; break;
      case Verdict::Incorrect: ++counts.incorrect; break;
      case Verdict::Inconclusive: ++counts.inconclusive; break;
    }
    ev.outcomes.push_back({items[i].id, items[i].category, translations[i], out});
  }
  return ev;
}

void write_outcomes_jsonl(std::ostream& out,
                          const std::vector<ItemOutcome>& outcomes) {
  for (const ItemOutcome& o : outcomes) {
    nlohmann::ordered_json j;
    j["item_id"] = o.item_id;
    j["category"] = gen::category_name(o.category);
    j["translation"] = o.translation;
    j["verdict"] = verdict_name(o.outcome.verdict);
    j["reason"] = reason_name(o.outcome.reason);
    if (o.outcome.matched_form)
      j["matched_form"] = *o.outcome.matched_form;
    else
      j["matched_form"] = nullptr;
    out << j.dump() << '\n';
  }
}

void write_outcomes_jsonl(const std::filesystem::path& file,
                          const std::vector<ItemOutcome>& outcomes) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write outcomes file " + file.string());
  write_outcomes_jsonl(out, outcomes);
}

}  // namespace speedbias::eval
