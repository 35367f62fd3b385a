// Copyright 2026 The plre Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpus ingestion: vocabulary with rare-word replacement, sentence padding,
// sparse n-gram count tables and continuation statistics.

#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plre/parallel.hpp"
#include "plre/types.hpp"

namespace plre {

using Sentence = std::vector<std::string>;
using IdSentence = std::vector<WordId>;

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";

class Vocabulary {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;
  static constexpr WordId kEos = 2;

  Vocabulary() {
    add(kUnkToken, 0);
    add(kBosToken, 0);
    add(kEosToken, 0);
  }

  WordId unk_id() const noexcept { return kUnk; }
  WordId bos_id() const noexcept { return kBos; }
  WordId eos_id() const noexcept { return kEos; }
  std::size_t size() const noexcept { return id_to_word_.size(); }

  bool contains(const std::string& word) const {
    return word_to_id_.count(word) != 0;
  }
  /// Out-of-vocabulary words map to unk.
  WordId lookup(const std::string& word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? kUnk : it->second;
  }
  const std::string& word(WordId id) const { return id_to_word_.at(id); }
  Count count(WordId id) const { return counts_.at(id); }

  /// Appends a new type; returns its id. Existing words keep their id.
  WordId add(const std::string& word, Count count) {
    auto [it, inserted] =
        word_to_id_.emplace(word, static_cast<WordId>(id_to_word_.size()));
    if (inserted) {
      id_to_word_.push_back(word);
      counts_.push_back(count);
    } else {
      counts_[it->second] += count;
    }
    return it->second;
  }
  void set_count(WordId id, Count count) { counts_.at(id) = count; }

  /// FNV-1a over (id, word) pairs; identifies the id assignment.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char byte) {
      h ^= byte;
      h *= 0x100000001b3ULL;
    };
    for (std::size_t id = 0; id < id_to_word_.size(); ++id) {
      for (int b = 0; b < 4; ++b) mix(static_cast<unsigned char>(id >> (8 * b)));
      for (char ch : id_to_word_[id]) mix(static_cast<unsigned char>(ch));
      mix(0);
    }
    return h;
  }

  /// One "word<TAB>id<TAB>count" line per type, in id order.
  void write_tsv(std::ostream& out) const {
    for (std::size_t id = 0; id < id_to_word_.size(); ++id)
      out << id_to_word_[id] << '\t' << id << '\t' << counts_[id] << '\n';
  }

 private:
  std::unordered_map<std::string, WordId> word_to_id_;
  std::vector<std::string> id_to_word_;
  std::vector<Count> counts_;
};

/// Builds the vocabulary from tokenized training sentences. Types whose
/// frequency is <= unk_threshold are folded into unk (threshold 0 disables
/// replacement). Word ids follow the three reserved ids in order of
/// descending frequency, ties broken by first occurrence.
inline Vocabulary build_vocabulary(const std::vector<Sentence>& sentences,
                                   Count unk_threshold = 1) {
  if (unk_threshold < 0)
    fail(ErrorCode::kInvalidArgument, "unk threshold must be >= 0");
  struct TypeStat {
    Count count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, TypeStat> stats;
  std::vector<std::string> order;
  std::size_t tokens = 0;
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence) {
      auto [it, inserted] = stats.try_emplace(token, TypeStat{0, order.size()});
      if (inserted) order.push_back(token);
      ++it->second.count;
      ++tokens;
    }
  }
  if (tokens == 0) fail(ErrorCode::kEmptyInput, "empty corpus: no tokens");

  std::vector<const std::string*> kept;
  Count unk_count = 0;
  for (const auto& word : order) {
    const TypeStat& s = stats.at(word);
    bool reserved = word == kUnkToken || word == kBosToken || word == kEosToken;
    if (reserved || s.count <= unk_threshold) {
      unk_count += s.count;
    } else {
      kept.push_back(&word);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [&](const std::string* a, const std::string* b) {
                     return stats.at(*a).count > stats.at(*b).count;
                   });

  Vocabulary vocab;
  for (const std::string* word : kept) vocab.add(*word, stats.at(*word).count);
  auto n = static_cast<Count>(sentences.size());
  vocab.set_count(Vocabulary::kUnk, unk_count);
  vocab.set_count(Vocabulary::kBos, n);
  vocab.set_count(Vocabulary::kEos, n);
  return vocab;
}

/// Whitespace tokenization, one sentence per line. Blank lines are skipped.
inline std::vector<Sentence> read_sentences(std::istream& in) {
  std::vector<Sentence> sentences;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    Sentence sentence;
    std::string token;
    while (fields >> token) sentence.push_back(std::move(token));
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
  }
  return sentences;
}

inline std::vector<Sentence> read_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read corpus: " + path);
  return read_sentences(in);
}

/// Maps tokens to ids; OOV tokens (and literal boundary symbols) become unk.
/// Increments *oov for every unk-mapped token not literally "<unk>".
inline IdSentence map_sentence(const Vocabulary& vocab, const Sentence& tokens,
                               std::size_t* oov = nullptr) {
  IdSentence ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) {
    WordId id = vocab.lookup(token);
    if (id == vocab.bos_id() || id == vocab.eos_id()) id = vocab.unk_id();
    if (oov && id == vocab.unk_id() && token != kUnkToken) ++*oov;
    ids.push_back(id);
  }
  return ids;
}

/// order-1 bos symbols at the start, one eos at the end.
inline IdSentence pad_sentence(const IdSentence& ids, std::size_t order) {
  IdSentence padded;
  padded.reserve(ids.size() + order);
  padded.insert(padded.end(), order > 0 ? order - 1 : 0, Vocabulary::kBos);
  padded.insert(padded.end(), ids.begin(), ids.end());
  padded.push_back(Vocabulary::kEos);
  return padded;
}

inline std::vector<IdSentence> prepare_sentences(const Vocabulary& vocab,
                                                 const std::vector<Sentence>& sentences,
                                                 std::size_t order,
                                                 std::size_t* oov = nullptr) {
  std::vector<IdSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(pad_sentence(map_sentence(vocab, s, oov), order));
  return out;
}

/// Sparse order-n count tensor keyed most-recent-word-first.
class CountTable {
 public:
  using Map = std::unordered_map<NgramKey, Count, NgramKeyHash>;

  CountTable() = default;
  explicit CountTable(std::size_t order) : order_(order) {
    if (order < 1 || order > kMaxOrder)
      fail(ErrorCode::kInvalidArgument, "n-gram order must be in [1, " +
                                            std::to_string(kMaxOrder) + "]");
  }

  std::size_t order() const noexcept { return order_; }
  Count total() const noexcept { return total_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const Map& entries() const noexcept { return entries_; }
  const Map& context_sums() const noexcept { return context_sums_; }

  void add(const NgramKey& key, Count c = 1) {
    assert(key.size() == order_);
    if (c <= 0) fail(ErrorCode::kInvalidArgument, "counts must be positive");
    entries_[key] += c;
    context_sums_[key.context()] += c;
    total_ += c;
  }

  Count count(const NgramKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second;
  }
  Count context_sum(const NgramKey& context) const {
    auto it = context_sums_.find(context);
    return it == context_sums_.end() ? 0 : it->second;
  }

  void merge(const CountTable& other) {
    assert(other.order_ == order_);
    for (const auto& [key, c] : other.entries_) add(key, c);
  }

  /// Entries in ascending key order; used wherever output must be
  /// independent of hash iteration order.
  std::vector<std::pair<NgramKey, Count>> sorted_entries() const {
    std::vector<std::pair<NgramKey, Count>> out(entries_.begin(), entries_.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  friend bool operator==(const CountTable& a, const CountTable& b) {
    return a.order_ == b.order_ && a.total_ == b.total_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t order_ = 1;
  Count total_ = 0;
  Map entries_;
  Map context_sums_;
};

/// Counts every n-gram whose predicted word is not bos and has a full
/// (n-1)-word history inside the padded sentence. With the standard padding
/// the order-k table of an order-n model is the marginal of the order-n table.
inline CountTable count_ngrams(const std::vector<IdSentence>& padded, std::size_t n,
                               std::size_t threads = 1) {
  if (n < 1 || n > kMaxOrder)
    fail(ErrorCode::kInvalidArgument, "n-gram order must be in [1, " +
                                          std::to_string(kMaxOrder) + "]");

  auto count_range = [n](const IdSentence* first, const IdSentence* last) {
    CountTable table(n);
    std::array<WordId, kMaxOrder> buf{};
    for (; first != last; ++first) {
      const IdSentence& s = *first;
      for (std::size_t i = n - 1; i < s.size(); ++i) {
        if (s[i] == Vocabulary::kBos) continue;
        for (std::size_t k = 0; k < n; ++k) buf[k] = s[i - k];
        table.add(NgramKey(std::span<const WordId>(buf.data(), n)));
      }
    }
    return table;
  };

  std::size_t shards = std::min<std::size_t>(resolve_threads(threads), padded.size());
  if (shards <= 1) return count_range(padded.data(), padded.data() + padded.size());
  std::vector<CountTable> parts(shards);
  parallel_for(shards, shards, [&](std::size_t s) {
    std::size_t lo = padded.size() * s / shards;
    std::size_t hi = padded.size() * (s + 1) / shards;
    parts[s] = count_range(padded.data() + lo, padded.data() + hi);
  });
  CountTable merged(n);
  for (const auto& part : parts) merged.merge(part);
  return merged;
}

/// Distinct left extensions (n_minus) and distinct continuations (n_plus).
struct ContinuationCounts {
  CountTable::Map n_minus;  ///< keyed by the order-(n-1) suffix w_i..w_{i-n+2}
  CountTable::Map n_plus;   ///< keyed by the context w_{i-1}..w_{i-n+1}

  Count minus(const NgramKey& suffix) const {
    auto it = n_minus.find(suffix);
    return it == n_minus.end() ? 0 : it->second;
  }
  Count plus(const NgramKey& context) const {
    auto it = n_plus.find(context);
    return it == n_plus.end() ? 0 : it->second;
  }
};

inline ContinuationCounts continuation_counts(const CountTable& table) {
  if (table.order() < 2)
    fail(ErrorCode::kInvalidArgument,
         "continuation counts need an order >= 2 table");
  ContinuationCounts out;
  for (const auto& entry : table.entries()) {
    ++out.n_minus[entry.first.drop_oldest()];
    ++out.n_plus[entry.first.context()];
  }
  return out;
}

/// The order-(n-1) table whose entries are N_-(suffix): the count base that
/// Kneser-Ney style lower orders use in place of raw counts.
inline CountTable continuation_table(const CountTable& table) {
  if (table.order() < 2)
    fail(ErrorCode::kInvalidArgument,
         "continuation counts need an order >= 2 table");
  CountTable out(table.order() - 1);
  for (const auto& entry : table.entries()) out.add(entry.first.drop_oldest());
  return out;
}

}  // namespace plre
