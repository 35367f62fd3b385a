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

#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

namespace plre {

using WordId = std::uint32_t;
using Count = std::int64_t;

inline constexpr std::size_t kMaxOrder = 6;

/// Error classes. Each maps to a distinct process exit code in the CLI.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kConfig = 3,
  kIo = 4,
  kEmptyInput = 5,
  kVocabMismatch = 6,
  kCorruptContainer = 7,
  kNumerical = 8,
  kInvariant = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

/// A short id sequence stored most-recent-word-first:
///   (w_i, w_{i-1}, ..., w_{i-n+1})
/// so that dropping the first element yields the conditioning context and
/// dropping the last element yields the sequence a left-extension attaches to.
class NgramKey {
 public:
  NgramKey() = default;
  NgramKey(std::initializer_list<WordId> ids) {
    assert(ids.size() <= kMaxOrder);
    for (WordId id : ids) ids_[size_++] = id;
  }
  explicit NgramKey(std::span<const WordId> ids) {
    assert(ids.size() <= kMaxOrder);
    for (WordId id : ids) ids_[size_++] = id;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  WordId operator[](std::size_t i) const noexcept { return ids_[i]; }
  WordId front() const noexcept { return ids_[0]; }
  WordId back() const noexcept { return ids_[size_ - 1]; }
  std::span<const WordId> view() const noexcept { return {ids_.data(), size_}; }

  void push_back(WordId id) noexcept {
    assert(size_ < kMaxOrder);
    ids_[size_++] = id;
  }

  /// Elements [first, first + count).
  NgramKey sub(std::size_t first, std::size_t count) const noexcept {
    NgramKey out;
    for (std::size_t i = 0; i < count; ++i) out.ids_[i] = ids_[first + i];
    out.size_ = static_cast<std::uint8_t>(count);
    return out;
  }
  /// The conditioning context (everything but the predicted word).
  NgramKey context() const noexcept { return sub(1, size_ - 1); }
  /// The sequence with its oldest word removed.
  NgramKey drop_oldest() const noexcept { return sub(0, size_ - 1); }

  friend bool operator==(const NgramKey& a, const NgramKey& b) noexcept {
    return a.size_ == b.size_ &&
           std::equal(a.ids_.begin(), a.ids_.begin() + a.size_, b.ids_.begin());
  }
  friend bool operator<(const NgramKey& a, const NgramKey& b) noexcept {
    return std::lexicographical_compare(a.ids_.begin(), a.ids_.begin() + a.size_,
                                        b.ids_.begin(), b.ids_.begin() + b.size_);
  }

 private:
  std::array<WordId, kMaxOrder> ids_{};
  std::uint8_t size_ = 0;
};

struct NgramKeyHash {
  std::size_t operator()(const NgramKey& k) const noexcept {
    // splitmix-style mixing over the ids
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ k.size();
    for (std::size_t i = 0; i < k.size(); ++i) {
      h ^= k[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= h >> 31;
      h *= 0xbf58476d1ce4e5b9ULL;
    }
    h ^= h >> 29;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace plre
