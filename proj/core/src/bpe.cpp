#include "speedbias/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "speedbias/errors.hpp"

namespace speedbias::nmt {

std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> chars;
  std::size_t i = 0;
  while (i < word.size()) {
    unsigned char b = word[i];
    std::size_t len = 1;
    if ((b & 0xE0) == 0xC0)
      len = 2;
    else if ((b & 0xF0) == 0xE0)
      len = 3;
    else if ((b & 0xF8) == 0xF0)
      len = 4;
    if (i + len > word.size()) len = 1;
    chars.push_back(word.substr(i, len));
    i += len;
  }
  return chars;
}

namespace {

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms = utf8_chars(word);
  if (!syms.empty()) syms.back() += BpeModel::kEow;
  return syms;
}

void apply_merge(std::vector<std::string>& syms, const MergeRule& m) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size();) {
    if (r + 1 < syms.size() && syms[r] == m.left && syms[r + 1] == m.right) {
      syms[w++] = m.left + m.right;
      r += 2;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);  // self-move would clear
      ++w;
      ++r;
    }
  }
  syms.resize(w);
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::stringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

}  // namespace

BpeModel BpeModel::learn(const std::map<std::string, long>& word_counts,
                         int num_merges) {
  if (num_merges < 0) throw DataError("bpe: negative merge count");
  BpeModel model;
  std::vector<std::pair<std::vector<std::string>, long>> words;
  std::set<std::string> alphabet;
  for (const auto& [word, count] : word_counts) {
    if (count <= 0 || word.empty()) continue;
    auto syms = word_symbols(word);
    for (const auto& s : syms) alphabet.insert(s);
    words.emplace_back(std::move(syms), count);
  }
  model.alphabet_.assign(alphabet.begin(), alphabet.end());

  for (int step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [syms, count] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_counts[{syms[i], syms[i + 1]}] += count;
    if (pair_counts.empty()) break;
    // max count; map order already yields the lexicographically smallest
    // pair on ties because we only overwrite on strictly greater counts
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    MergeRule rule{best->first.first, best->first.second};
    for (auto& [syms, count] : words) apply_merge(syms, rule);
    model.merges_.push_back(std::move(rule));
  }
  model.build_id_table();
  return model;
}

void BpeModel::build_id_table() {
  id_to_symbol_ = {"<eos>", "<bos>", "<unk>"};
  for (const auto& s : alphabet_) id_to_symbol_.push_back(s);
  for (const auto& m : merges_) id_to_symbol_.push_back(m.left + m.right);
  symbol_to_id_.clear();
  for (std::size_t i = 0; i < id_to_symbol_.size(); ++i)
    symbol_to_id_.emplace(id_to_symbol_[i], static_cast<int>(i));
}

std::vector<std::string> BpeModel::segment_word(const std::string& word) const {
  std::vector<std::string> syms = word_symbols(word);
  for (const MergeRule& m : merges_) apply_merge(syms, m);
  return syms;
}

std::vector<int> BpeModel::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& word : split_words(text)) {
    for (const std::string& sym : segment_word(word)) {
      auto it = symbol_to_id_.find(sym);
      ids.push_back(it == symbol_to_id_.end() ? kUnkId : it->second);
    }
  }
  return ids;
}

std::string BpeModel::decode(const std::vector<int>& ids) const {
  std::string joined;
  for (int id : ids) {
    if (id == kBosId || id == kEosId) continue;
    if (id < 0 || id >= static_cast<int>(id_to_symbol_.size()))
      throw DataError("bpe decode: id " + std::to_string(id) + " out of range");
    joined += id_to_symbol_[id];
  }
  std::string out;
  std::size_t i = 0;
  const std::string eow = kEow;
  while (i < joined.size()) {
    if (joined.compare(i, eow.size(), eow) == 0) {
      out += ' ';
      i += eow.size();
    } else {
      out += joined[i++];
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void BpeModel::save(std::ostream& out) const {
  out << "speedbias-bpe v1\n";
  out << "alphabet " << alphabet_.size() << "\n";
  for (const auto& s : alphabet_) out << s << "\n";
  out << "merges " << merges_.size() << "\n";
  for (const auto& m : merges_) out << m.left << "\t" << m.right << "\n";
}

void BpeModel::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write bpe model " + file.string());
  save(out);
}

BpeModel BpeModel::load(std::istream& in, const std::string& origin) {
  BpeModel model;
  std::string line;
  if (!std::getline(in, line) || line != "speedbias-bpe v1")
    throw DataError(origin + ": not a bpe model file");
  std::size_t n = 0;
  std::string tag;
  in >> tag >> n;
  if (tag != "alphabet") throw DataError(origin + ": missing alphabet section");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError(origin + ": truncated alphabet");
    model.alphabet_.push_back(line);
  }
  in >> tag >> n;
  if (tag != "merges") throw DataError(origin + ": missing merges section");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError(origin + ": truncated merges");
    std::size_t t = line.find('\t');
    if (t == std::string::npos)
      throw DataError(origin + ": merge line lacks a tab separator");
    model.merges_.push_back({line.substr(0, t), line.substr(t + 1)});
  }
  model.build_id_table();
  return model;
}

BpeModel BpeModel::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open bpe model " + file.string());
  return load(in, file.string());
}

}  // namespace speedbias::nmt
