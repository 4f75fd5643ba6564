#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace speedbias::nmt {

struct MergeRule {
  std::string left, right;
  bool operator==(const MergeRule&) const = default;
};

// Byte-pair subword model with an end-of-word marker attached to the final
// character of every word. Special ids: 0 <eos>, 1 <bos>, 2 <unk>; the
// remaining ids cover the alphabet (sorted) then one id per merge product.
class BpeModel {
 public:
  static constexpr int kEosId = 0;
  static constexpr int kBosId = 1;
  static constexpr int kUnkId = 2;
  static constexpr const char* kEow = "</w>";

  // Greedy most-frequent-pair learning over word counts; ties break to the
  // lexicographically smallest (left, right). Stops early when no pair
  // occurs anymore.
  static BpeModel learn(const std::map<std::string, long>& word_counts,
                        int num_merges);

  // Replays the merge list in order over the character sequence.
  std::vector<std::string> segment_word(const std::string& word) const;
  // Whitespace-split words, segmented and mapped to ids; symbols outside the
  // model map to <unk>. No BOS/EOS are added.
  std::vector<int> encode(const std::string& text) const;
  // Inverse of encode up to unknown symbols; <unk> renders as itself,
  // <bos>/<eos> are dropped.
  std::string decode(const std::vector<int>& ids) const;

  int vocab_size() const { return static_cast<int>(id_to_symbol_.size()); }
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }

  void save(const std::filesystem::path& file) const;
  void save(std::ostream& out) const;
  static BpeModel load(const std::filesystem::path& file);
  static BpeModel load(std::istream& in, const std::string& origin);

  bool operator==(const BpeModel& other) const {
    return merges_ == other.merges_ && alphabet_ == other.alphabet_;
  }

 private:
  void build_id_table();

  std::vector<std::string> alphabet_;  // sorted single-character symbols
  std::vector<MergeRule> merges_;
  std::vector<std::string> id_to_symbol_;
  std::unordered_map<std::string, int> symbol_to_id_;
};

// UTF-8 codepoint split helper shared with the toy corpus code.
std::vector<std::string> utf8_chars(const std::string& word);

}  // namespace speedbias::nmt
