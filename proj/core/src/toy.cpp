#include "speedbias/toy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "speedbias/errors.hpp"

namespace speedbias::toy {
namespace {

// invariant vocabulary; gender/number attributes drive determiner agreement
struct WordEntry {
  const char* target;
  char gender;  // 'm', 'f', or 0
  char number;  // 's', 'p', or 0
};

const std::map<std::string, WordEntry>& word_map() {
  static const std::map<std::string, WordEntry> m = {
      {"my", {"mi", 0, 0}},          {"is", {"es", 0, 0}},
      {"his", {"su", 0, 0}},         {"alex's", {"alex", 0, 0}},
      {"became", {"devino", 0, 0}},  {"enjoys", {"disfruta", 0, 0}},
      {"work", {"trabajo", 'm', 's'}}, {"are", {"son", 0, 0}},
      {"hard", {"duro", 0, 0}},      {"i", {"yo", 0, 0}},
      {"talked", {"hablé", 0, 0}},   {"to", {"a", 0, 0}},
      {"works", {"trabaja", 0, 0}},  {"worked", {"trabajé", 0, 0}},
      {"with", {"con", 0, 0}},       {"very", {"muy", 0, 0}},
      {"qualified", {"calificado", 0, 0}}, {"rare", {"raro", 0, 0}},
      {"not", {"no", 0, 0}},         {"predisposed", {"predispuesto", 0, 0}},
      {"for", {"para", 0, 0}},       {"self-promotion", {"autopromoción", 'f', 's'}},
      {"performed", {"rindieron", 0, 0}}, {"well", {"bien", 0, 0}},
      {"earn", {"ganan", 0, 0}},     {"less", {"menos", 0, 0}},
      {"than", {"que", 0, 0}},       {"their", {"su", 0, 0}},
      {"counterparts", {"contrapartes", 'f', 'p'}},
      {"though", {"aunque", 0, 0}},  {"argued", {"discutió", 0, 0}},
      {"colleagues", {"colegas", 'm', 'p'}},
      {"was", {"era", 0, 0}},        {"always", {"siempre", 0, 0}},
      {"respectful", {"respetuoso", 0, 0}},
      {"people", {"gente", 'f', 's'}}, {"laughed", {"rieron", 0, 0}},
      {"at", {"de", 0, 0}},          {"behind", {"detrás", 0, 0}},
      {"back", {"espalda", 'f', 's'}}, {"screamed", {"gritó", 0, 0}},
      {"when", {"cuando", 0, 0}},    {"saw", {"vio", 0, 0}},
      {"mouse", {"ratón", 'm', 's'}}, {"chooses", {"elige", 0, 0}},
      {"words", {"palabras", 'f', 'p'}}, {"carefully", {"cuidadosamente", 0, 0}},
      {"funny", {"gracioso", 0, 0}}, {"talented", {"talentoso", 0, 0}},
      {"smart", {"inteligente", 0, 0}}, {"dynamic", {"dinámico", 0, 0}},
      {"lot", {"montón", 'm', 's'}}, {"of", {"de", 0, 0}},
      {"experience", {"experiencia", 'f', 's'}},
      {"happens", {"resulta", 0, 0}}, {"be", {"ser", 0, 0}},
      {"and", {"y", 0, 0}},          {"excels", {"sobresale", 0, 0}},
      {"drove", {"condujo", 0, 0}},  {"fast", {"rápido", 0, 0}},
      {"on", {"a", 0, 0}},           {"time", {"tiempo", 'm', 's'}},
      {"as", {"como", 0, 0}},        {"competent", {"competente", 0, 0}},
      {"arrived", {"llegó", 0, 0}},  {"everyone", {"todos", 0, 0}},
      {"applauded", {"aplaudieron", 0, 0}},
      {"highest", {"mayor", 0, 0}},  {"success", {"éxito", 'm', 's'}},
      {"rate", {"tasa", 'f', 's'}},  {"per", {"según", 0, 0}},
      {"polls", {"encuestas", 'f', 'p'}}, {"were", {"eran", 0, 0}},
      {"also", {"también", 0, 0}},   {"moved", {"mudó", 0, 0}},
      {"here", {"aquí", 0, 0}},      {"from", {"de", 0, 0}},
      {"ethiopia", {"etiopía", 0, 0}}, {"where", {"donde", 0, 0}},
      {"arrives", {"llega", 0, 0}},  {"early", {"temprano", 0, 0}},
      {"shift", {"turno", 'm', 's'}}, {"hella", {"muy", 0, 0}},
      {"strict", {"estricto", 0, 0}}, {"watch", {"cuidado", 0, 0}},
      {"out", {"ojo", 0, 0}},        {"retired", {"jubiló", 0, 0}},
      {"good", {"bueno", 0, 0}},
      // relations
      {"wife", {"esposa", 'f', 's'}}, {"mother", {"madre", 'f', 's'}},
      {"sister", {"hermana", 'f', 's'}}, {"girlfriend", {"novia", 'f', 's'}},
      {"husband", {"esposo", 'm', 's'}}, {"father", {"padre", 'm', 's'}},
      {"brother", {"hermano", 'm', 's'}}, {"boyfriend", {"novio", 'm', 's'}},
      // gendered nouns
      {"female", {"femenina", 'f', 's'}}, {"male", {"masculino", 'm', 's'}},
      {"women", {"mujeres", 'f', 'p'}}, {"men", {"hombres", 'm', 'p'}},
      {"ladies", {"damas", 'f', 'p'}}, {"females", {"féminas", 'f', 'p'}},
      {"gals", {"chicas", 'f', 'p'}}, {"guys", {"tipos", 'm', 'p'}},
      {"males", {"varones", 'm', 'p'}}, {"fellows", {"sujetos", 'm', 'p'}},
      {"gal", {"chica", 'f', 's'}},  {"woman", {"mujer", 'f', 's'}},
      {"lady", {"dama", 'f', 's'}},  {"man", {"hombre", 'm', 's'}},
      {"guy", {"tipo", 'm', 's'}},   {"fellow", {"sujeto", 'm', 's'}},
      // pronouns (her/him handled separately)
      {"she", {"ella", 0, 0}},       {"he", {"él", 0, 0}},
  };
  return m;
}

// determiner target by (gender, number)
struct Determiner {
  const char *msg, *fsg, *mpl, *fpl;
};

const std::map<std::string, Determiner>& determiners() {
  static const std::map<std::string, Determiner> m = {
      {"a", {"un", "una", "unos", "unas"}},
      {"an", {"un", "una", "unos", "unas"}},
      {"the", {"el", "la", "los", "las"}},
      {"that", {"ese", "esa", "esos", "esas"}},
      {"this", {"este", "esta", "estos", "estas"}},
      {"those", {"esos", "esas", "esos", "esas"}},
      {"these", {"estos", "estas", "estos", "estas"}},
  };
  return m;
}

// nouns that turn a following her/him into the possessive reading
const std::set<std::string>& possessed_nouns() {
  static const std::set<std::string> s = {"work", "back", "shift", "colleagues",
                                          "words"};
  return s;
}

bool is_punct_token(const std::string& t) {
  return t == "." || t == "," || t == "!" || t == "?" || t == ";" || t == ":";
}

std::string ascii_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return s;
}

// splits words and detaches trailing sentence punctuation as its own token
std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::stringstream ss(text);
  std::string w;
  while (ss >> w) {
    std::string tail;
    while (!w.empty() && (w.back() == '.' || w.back() == ',' || w.back() == '!' ||
                          w.back() == '?' || w.back() == ';' || w.back() == ':')) {
      tail.insert(tail.begin(), w.back());
      w.pop_back();
    }
    if (!w.empty()) tokens.push_back(ascii_lower(w));
    for (char c : tail) tokens.push_back(std::string(1, c));
  }
  return tokens;
}

std::string join_with_attached_punct(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty() && !is_punct_token(t)) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

ToyTranslator::ToyTranslator(const gen::Lexicon& lexicon,
                             const eval::GenderDictionary& dict)
    : dict_(&dict) {
  for (gen::Gender g : {gen::Gender::Feminine, gen::Gender::Masculine}) {
    for (gen::Number n : {gen::Number::Singular, gen::Number::Plural}) {
      gen::SlotKey key{gen::Role::Occupation, n, gen::Phonetic::Any};
      if (!lexicon.has(key, g)) continue;
      for (const std::string& surface : lexicon.values(key, g)) {
        OccEntry e;
        std::stringstream ss(ascii_lower(surface));
        std::string w;
        while (ss >> w) e.words.push_back(w);
        e.lemma = lexicon.occupation_lemma(surface, g, n);
        e.number = n;
        occupations_.push_back(std::move(e));
      }
    }
  }
  // longest phrases first so "truck drivers" wins over any single word
  std::stable_sort(occupations_.begin(), occupations_.end(),
                   [](const OccEntry& a, const OccEntry& b) {
                     return a.words.size() > b.words.size();
                   });
}

std::string ToyTranslator::translate_sentence(const std::string& source,
                                              gen::Gender ctx_gender) const {
  std::vector<std::string> tokens = tokenize(source);
  struct OutTok {
    std::string text;
    char gender = 0;
    char number = 0;
  };
  std::vector<OutTok> out;
  out.reserve(tokens.size());

  // first pass: translate everything except determiners, recording gender
  // and number attributes; determiners get resolved in a second pass
  std::vector<long> det_positions;
  for (std::size_t i = 0; i < tokens.size();) {
    const std::string& tok = tokens[i];
    // occupation phrases (greedy longest match)
    const OccEntry* occ = nullptr;
    for (const OccEntry& e : occupations_) {
      if (i + e.words.size() > tokens.size()) continue;
      bool hit = true;
      for (std::size_t k = 0; k < e.words.size(); ++k)
        if (tokens[i + k] != e.words[k]) {
          hit = false;
          break;
        }
      if (hit) {
        occ = &e;
        break;
      }
    }
    if (occ) {
      const std::string& form =
          dict_->forms(occ->lemma, occ->number, ctx_gender)[0];
      OutTok t;
      t.text = ascii_lower(form);
      t.gender = ctx_gender == gen::Gender::Feminine ? 'f' : 'm';
      t.number = occ->number == gen::Number::Singular ? 's' : 'p';
      out.push_back(std::move(t));
      i += occ->words.size();
      continue;
    }
    if (tok == "her" || tok == "him") {
      bool possessive =
          i + 1 < tokens.size() && possessed_nouns().count(tokens[i + 1]) > 0;
      out.push_back({possessive ? "su" : (tok == "her" ? "ella" : "él"), 0, 0});
      ++i;
      continue;
    }
    if (determiners().count(tok) > 0) {
      det_positions.push_back(static_cast<long>(out.size()));
      out.push_back({tok, 0, 0});  // placeholder, resolved below
      ++i;
      continue;
    }
    if (is_punct_token(tok)) {
      out.push_back({tok, 0, 0});
      ++i;
      continue;
    }
    auto it = word_map().find(tok);
    if (it != word_map().end()) {
      out.push_back({it->second.target, it->second.gender, it->second.number});
    } else {
      out.push_back({tok, 0, 0});  // pass through; coverage is tested
    }
    ++i;
  }

  for (long pos : det_positions) {
    const Determiner& det = determiners().at(out[pos].text);
    char g = 'm', n = 's';
    for (std::size_t k = pos + 1; k < out.size(); ++k) {
      if (out[k].gender != 0) {
        g = out[k].gender;
        n = out[k].number != 0 ? out[k].number : 's';
        break;
      }
    }
    if (g == 'm')
      out[pos].text = n == 's' ? det.msg : det.mpl;
    else
      out[pos].text = n == 's' ? det.fsg : det.fpl;
  }

  std::vector<std::string> texts;
  texts.reserve(out.size());
  for (OutTok& t : out) texts.push_back(std::move(t.text));
  return join_with_attached_punct(texts);
}

std::string ToyTranslator::translate(const gen::TestItem& item) const {
  return translate_sentence(item.source, item.context_gender);
}

std::vector<std::string> ToyTranslator::unmapped_words(
    const std::vector<gen::TestItem>& items) const {
  std::set<std::string> missing;
  for (const gen::TestItem& item : items) {
    std::vector<std::string> tokens = tokenize(item.source);
    for (std::size_t i = 0; i < tokens.size();) {
      const std::string& tok = tokens[i];
      bool occ_hit = false;
      for (const OccEntry& e : occupations_) {
        if (i + e.words.size() > tokens.size()) continue;
        bool hit = true;
        for (std::size_t k = 0; k < e.words.size(); ++k)
          if (tokens[i + k] != e.words[k]) {
            hit = false;
            break;
          }
        if (hit) {
          i += e.words.size();
          occ_hit = true;
          break;
        }
      }
      if (occ_hit) continue;
      if (tok != "her" && tok != "him" && determiners().count(tok) == 0 &&
          !is_punct_token(tok) && word_map().count(tok) == 0)
        missing.insert(tok);
      ++i;
    }
  }
  return {missing.begin(), missing.end()};
}

SplitItems split_by_template(const std::vector<gen::TestItem>& items, int fold) {
  if (fold < 2) throw DataError("split: fold must be >= 2");
  std::map<std::string, int> ordinal;
  for (const gen::TestItem& item : items)
    ordinal.emplace(item.template_id, static_cast<int>(ordinal.size()));
  SplitItems split;
  for (const gen::TestItem& item : items) {
    if (ordinal[item.template_id] % fold == fold - 1)
      split.test.push_back(item);
    else
      split.train.push_back(item);
  }
  return split;
}

std::vector<gen::TestItem> sample_biased(const std::vector<gen::TestItem>& pool,
                                         std::size_t size, double bias_ratio,
                                         std::uint64_t seed) {
  if (bias_ratio < 0.0 || bias_ratio > 1.0)
    throw DataError("sample_biased: bias_ratio must be in [0,1]");
  std::vector<const gen::TestItem*> pro, anti;
  for (const gen::TestItem& item : pool)
    (gen::is_pro_stereotypical(item.category) ? pro : anti).push_back(&item);
  std::size_t n_pro =
      static_cast<std::size_t>(std::llround(bias_ratio * static_cast<double>(size)));
  if (n_pro > size) n_pro = size;
  if (n_pro > 0 && pro.empty())
    throw DataError("sample_biased: no pro-stereotypical items available");
  if (n_pro < size && anti.empty())
    throw DataError("sample_biased: no anti-stereotypical items available");
  std::mt19937_64 rng(seed);
  std::vector<gen::TestItem> out;
  out.reserve(size);
  for (std::size_t i = 0; i < n_pro; ++i) out.push_back(*pro[rng() % pro.size()]);
  for (std::size_t i = n_pro; i < size; ++i)
    out.push_back(*anti[rng() % anti.size()]);
  return out;
}

std::vector<gen::TestItem> stratified_cap(const std::vector<gen::TestItem>& items,
                                          std::size_t max_items) {
  if (items.size() <= max_items) return items;
  std::vector<std::vector<const gen::TestItem*>> buckets(4);
  for (const gen::TestItem& item : items)
    buckets[static_cast<int>(item.category)].push_back(&item);
  std::vector<gen::TestItem> out;
  out.reserve(max_items);
  std::size_t round = 0;
  while (out.size() < max_items) {
    bool any = false;
    for (const auto& bucket : buckets) {
      if (round < bucket.size() && out.size() < max_items) {
        out.push_back(*bucket[round]);
        any = true;
      }
    }
    if (!any) break;
    ++round;
  }
  return out;
}

std::vector<ParallelPair> make_parallel(const std::vector<gen::TestItem>& items,
                                        const ToyTranslator& translator) {
  std::vector<ParallelPair> pairs;
  pairs.reserve(items.size());
  for (const gen::TestItem& item : items)
    pairs.emplace_back(item.source, translator.translate(item));
  return pairs;
}

}  // namespace speedbias::toy
