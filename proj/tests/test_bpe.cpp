#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "speedbias/bpe.hpp"
#include "speedbias/errors.hpp"

using namespace speedbias;
using nmt::BpeModel;

namespace {

std::map<std::string, long> word_counts(const std::string& text) {
  std::map<std::string, long> counts;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) counts[w]++;
  return counts;
}

// Independent replay: characters with the end-of-word marker on the last
// one, then one left-to-right non-overlapping pass per merge rule.
std::vector<std::string> replay_segmentation(const BpeModel& model,
                                             const std::string& word) {
  std::vector<std::string> syms;
  for (const std::string& c : nmt::utf8_chars(word)) syms.push_back(c);
  if (!syms.empty()) syms.back() += BpeModel::kEow;
  for (const auto& rule : model.merges()) {
    std::vector<std::string> next;
    std::size_t i = 0;
    while (i < syms.size()) {
      if (i + 1 < syms.size() && syms[i] == rule.left &&
          syms[i + 1] == rule.right) {
        next.push_back(rule.left + rule.right);
        i += 2;
      } else {
        next.push_back(syms[i]);
        i += 1;
      }
    }
    syms = next;
  }
  return syms;
}

}  // namespace

TEST_CASE("first merge on abab is (a, b)") {
  auto model = BpeModel::learn(word_counts("abab"), 1);
  REQUIRE(model.merges().size() == 1);
  CHECK(model.merges()[0].left == "a");
  CHECK(model.merges()[0].right == "b");
}

TEST_CASE("the most frequent pair merges first") {
  // 'aa</w>' x3 vs 'ab</w>' x2: pair (a, a</w>) dominates
  std::map<std::string, long> counts{{"aa", 3}, {"ab", 2}};
  auto model = BpeModel::learn(counts, 1);
  REQUIRE(model.merges().size() == 1);
  CHECK(model.merges()[0].left == "a");
  CHECK(model.merges()[0].right == "a</w>");
}

TEST_CASE("ties break to the lexicographically smallest pair") {
  // every pair occurs once; (x, y</w>) < (y, x</w>) < (z, z</w>)
  std::map<std::string, long> counts{{"xy", 1}, {"yx", 1}, {"zz", 1}};
  auto model = BpeModel::learn(counts, 1);
  CHECK(model.merges()[0].left == "x");
  CHECK(model.merges()[0].right == "y</w>");
}

TEST_CASE("zero merges falls back to characters") {
  auto model = BpeModel::learn(word_counts("cab"), 0);
  CHECK(model.merges().empty());
  auto ids = model.encode("cab");
  CHECK(ids.size() == 3);
  CHECK(model.decode(ids) == "cab");
}

TEST_CASE("merge learning stops when no pairs remain") {
  auto model = BpeModel::learn(word_counts("ab ab"), 50);
  CHECK(model.merges().size() < 50);
  CHECK(model.encode("ab").size() == 1);
}

TEST_CASE("no learned merge or segment symbol is ever empty") {
  // regression: an in-place merge pass once cleared untouched symbols via
  // string self-move, after which ("", "") dominated pair counts
  std::string corpus =
      "the quick brown fox jumps over the lazy dog again and again "
      "my grandmother is an approximately qualified groundskeeper "
      "that hairdresser is a funny lady these housekeepers are friendly";
  auto model = BpeModel::learn(word_counts(corpus), 120);
  CHECK(model.merges().size() > 20);
  for (const auto& rule : model.merges()) {
    CHECK_FALSE(rule.left.empty());
    CHECK_FALSE(rule.right.empty());
  }
  for (const auto& [word, n] : word_counts(corpus)) {
    for (const auto& sym : model.segment_word(word)) CHECK_FALSE(sym.empty());
    CHECK(model.decode(model.encode(word)) == word);
  }
}

TEST_CASE("segmentation equals an independent merge replay") {
  auto counts = word_counts(
      "low lower lowest news newer newest wide wider widest widely");
  auto model = BpeModel::learn(counts, 40);
  for (const auto& [word, n] : counts) {
    CHECK(model.segment_word(word) == replay_segmentation(model, word));
  }
  // words never seen during learning still segment by the same rules
  for (const char* word : {"widelow", "newly", "ester"}) {
    CHECK(model.segment_word(word) == replay_segmentation(model, word));
  }
}

TEST_CASE("encode and decode round trip sentences over the known alphabet") {
  auto model = BpeModel::learn(
      word_counts("she sells sea shells by the sea shore"), 30);
  // word-final and word-internal characters are distinct symbols, so unseen
  // words must reuse both kinds from the training corpus
  for (const char* text :
       {"she sells sea shells", "the shore", "horse lobes settle"}) {
    CHECK(model.decode(model.encode(text)) == text);
  }
}

TEST_CASE("unknown characters encode to the unk id and decode visibly") {
  auto model = BpeModel::learn(word_counts("abc abc"), 5);
  auto ids = model.encode("xyz");
  REQUIRE_FALSE(ids.empty());
  for (int id : ids) CHECK(id == BpeModel::kUnkId);
  CHECK(model.decode(ids).find("<unk>") != std::string::npos);
}

TEST_CASE("special ids stay reserved") {
  auto model = BpeModel::learn(word_counts("abc def"), 10);
  CHECK(model.vocab_size() > 3);
  for (int id : model.encode("abc def fed cab")) {
    CHECK(id != BpeModel::kBosId);
    CHECK(id != BpeModel::kEosId);
    CHECK(id >= 0);
    CHECK(id < model.vocab_size());
  }
  CHECK(model.decode({BpeModel::kBosId, BpeModel::kEosId}).empty());
}

TEST_CASE("decode rejects out-of-range ids") {
  auto model = BpeModel::learn(word_counts("ab"), 2);
  CHECK_THROWS_AS(model.decode({model.vocab_size()}), DataError);
  CHECK_THROWS_AS(model.decode({-1}), DataError);
}

TEST_CASE("multibyte utf8 characters stay intact") {
  auto chars = nmt::utf8_chars("niñera");
  REQUIRE(chars.size() == 6);
  CHECK(chars[2] == "ñ");
  auto model = BpeModel::learn(word_counts("niñera médica ärztin"), 25);
  for (const char* word : {"niñera", "médica", "ärztin"}) {
    CHECK(model.decode(model.encode(word)) == word);
  }
}

TEST_CASE("learned models survive a save/load round trip") {
  auto model = BpeModel::learn(
      word_counts("the cat sat on the mat with another cat"), 25);
  std::stringstream buf;
  model.save(buf);
  auto loaded = BpeModel::load(buf, "buffer");
  CHECK(loaded == model);
  CHECK(loaded.vocab_size() == model.vocab_size());
  const char* text = "the cat sat";
  CHECK(loaded.encode(text) == model.encode(text));
  CHECK(loaded.decode(loaded.encode(text)) == text);
}

TEST_CASE("loading rejects malformed model files") {
  std::istringstream wrong_magic("not-a-model\n");
  CHECK_THROWS_AS(BpeModel::load(wrong_magic, "x"), DataError);
  std::istringstream truncated("speedbias-bpe v1\nalphabet 5\na\n");
  CHECK_THROWS_AS(BpeModel::load(truncated, "x"), DataError);
  std::istringstream no_tab(
      "speedbias-bpe v1\nalphabet 1\na\nmerges 1\nab\n");
  CHECK_THROWS_AS(BpeModel::load(no_tab, "x"), DataError);
}

TEST_CASE("negative merge counts are rejected") {
  CHECK_THROWS_AS(BpeModel::learn(word_counts("ab"), -1), DataError);
}

TEST_CASE("zero and negative word counts are ignored") {
  std::map<std::string, long> counts{{"aa", 0}, {"bb", -4}, {"cc", 1}};
  auto model = BpeModel::learn(counts, 3);
  // only 'cc' contributes, so the first merge is (c, c</w>)
  REQUIRE_FALSE(model.merges().empty());
  CHECK(model.merges()[0].left == "c");
  CHECK(model.merges()[0].right == "c</w>");
}
