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

// Model container.
//
//   magic    8 bytes  "PLREMDL\0"
//   version  u32
//   header   u64 length + UTF-8 JSON
//   sections repeated until EOF:
//              u32 name length + name
//              u64 payload length + payload
//
// All integers and floats are little-endian; floats are IEEE-754 binary64.
// Every map is written in key order, so equal models produce equal bytes.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "plre/baselines.hpp"
#include "plre/plre.hpp"

namespace plre {

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian");

inline constexpr char kContainerMagic[8] = {'P', 'L', 'R', 'E', 'M', 'D', 'L', '\0'};
inline constexpr std::uint32_t kContainerVersion = 1;

namespace io {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const char* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void key(const NgramKey& k) {
    for (WordId id : k.view()) put<WordId>(id);
  }
  void doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void ids(const std::vector<WordId>& v) {
    put<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(WordId));
  }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string section)
      : data_(data), section_(std::move(section)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  NgramKey key(std::size_t size) {
    if (size > kMaxOrder) corrupt("key too long");
    NgramKey k;
    for (std::size_t i = 0; i < size; ++i) k.push_back(get<WordId>());
    return k;
  }
  std::vector<double> doubles() {
    auto n = length(sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::vector<WordId> ids() {
    auto n = length(sizeof(WordId));
    std::vector<WordId> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(WordId));
    pos_ += n * sizeof(WordId);
    return v;
  }
  /// Reads an element count and checks that many elements can follow.
  std::size_t length(std::size_t element_size) {
    auto n = get<std::uint64_t>();
    if (element_size && n > (data_.size() - pos_) / element_size) corrupt("length exceeds payload");
    return static_cast<std::size_t>(n);
  }
  void finish() const {
    if (pos_ != data_.size()) corrupt("trailing bytes");
  }
  [[noreturn]] void corrupt(const std::string& what) const {
    fail(ErrorCode::kCorruptContainer, "section " + section_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) corrupt("truncated");
  }
  const std::string& data_;
  std::string section_;
  std::size_t pos_ = 0;
};

inline void write_vocab(Writer& w, const Vocabulary& v) {
  w.put<std::uint64_t>(v.size());
  for (WordId id = 0; id < v.size(); ++id) {
    w.str(v.word(id));
    w.put<Count>(v.count(id));
  }
}

inline Vocabulary read_vocab(Reader& r) {
  Vocabulary v;
  std::size_t n = r.length(12);
  if (n < 3) r.corrupt("vocabulary lacks reserved ids");
  for (WordId id = 0; id < n; ++id) {
    std::string word = r.str();
    Count c = r.get<Count>();
    if (id < 3) {
      if (word != v.word(id)) r.corrupt("reserved ids out of place");
      v.set_count(id, c);
    } else if (v.contains(word) || v.add(word, c) != id) {
      r.corrupt("duplicate vocabulary entry");
    }
  }
  return v;
}

inline void write_table(Writer& w, const CountTable& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.order()));
  auto entries = t.sorted_entries();
  w.put<std::uint64_t>(entries.size());
  for (const auto& [k, c] : entries) {
    w.key(k);
    w.put<Count>(c);
  }
}

inline CountTable read_table(Reader& r, std::size_t vocab_size) {
  auto order = r.get<std::uint32_t>();
  if (order < 1 || order > kMaxOrder) r.corrupt("bad table order");
  CountTable t(order);
  std::size_t n = r.length(order * sizeof(WordId) + sizeof(Count));
  for (std::size_t i = 0; i < n; ++i) {
    NgramKey k = r.key(order);
    Count c = r.get<Count>();
    for (WordId id : k.view())
      if (id >= vocab_size) r.corrupt("word id out of range");
    if (c <= 0 || t.count(k) != 0) r.corrupt("bad table entry");
    t.add(k, c);
  }
  return t;
}

inline void write_value_map(Writer& w, const ValueMap& m, std::size_t key_size) {
  std::vector<std::pair<NgramKey, double>> sorted(m.begin(), m.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  w.put<std::uint32_t>(static_cast<std::uint32_t>(key_size));
  w.put<std::uint64_t>(sorted.size());
  for (const auto& [k, v] : sorted) {
    if (k.size() != key_size) fail(ErrorCode::kInvariant, "mixed key sizes in value map");
    w.key(k);
    w.put<double>(v);
  }
}

inline ValueMap read_value_map(Reader& r) {
  auto key_size = r.get<std::uint32_t>();
  std::size_t n = r.length(key_size * sizeof(WordId) + sizeof(double));
  ValueMap m;
  m.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    NgramKey k = r.key(key_size);
    m[k] = r.get<double>();
  }
  return m;
}

inline void write_lowrank(Writer& w, const LowRankCPT& z) {
  w.put<std::uint64_t>(z.order());
  w.put<double>(z.power());
  w.put<std::uint64_t>(z.rank());
  const LowRankSummary& s = z.summary();
  w.put<std::uint64_t>(s.slices);
  w.put<std::uint64_t>(s.iterative_slices);
  w.put<std::uint64_t>(s.unconverged_slices);
  w.put<std::uint64_t>(s.clamped_slices);
  w.put<std::uint64_t>(s.nnz);
  w.put<std::uint64_t>(s.iterations);
  w.put<double>(s.gkl);
  w.put<double>(s.max_col_residual);
  w.put<double>(s.max_row_residual);
  w.put<double>(s.row_residual_sum);
  w.put<std::uint64_t>(z.slices().size());
  for (const LowRankSlice& sl : z.slices()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sl.interior.size()));
    w.key(sl.interior);
    w.ids(sl.row_words);
    w.ids(sl.col_words);
    w.put<std::uint64_t>(sl.factors.rank());
    w.doubles(sl.factors.left_data());
    w.doubles(sl.factors.right_t_data());
    w.put<std::uint64_t>(sl.report.requested_rank);
    w.put<std::uint64_t>(sl.report.iterations);
    w.put<double>(sl.report.final_gkl);
    w.put<double>(sl.report.max_row_residual);
    w.put<double>(sl.report.max_col_residual);
    w.put<std::uint8_t>(sl.report.converged ? 1 : 0);
  }
  write_value_map(w, z.denominators(), z.order() - 1);
}

inline LowRankCPT read_lowrank(Reader& r, std::size_t vocab_size) {
  auto order = r.get<std::uint64_t>();
  double power = r.get<double>();
  auto rank = r.get<std::uint64_t>();
  if (order < 2 || order > kMaxOrder || rank < 1) r.corrupt("bad low-rank header");
  LowRankCPT z(order, power, rank);
  LowRankSummary s;
  s.slices = r.get<std::uint64_t>();
  s.iterative_slices = r.get<std::uint64_t>();
  s.unconverged_slices = r.get<std::uint64_t>();
  s.clamped_slices = r.get<std::uint64_t>();
  s.nnz = r.get<std::uint64_t>();
  s.iterations = r.get<std::uint64_t>();
  s.gkl = r.get<double>();
  s.max_col_residual = r.get<double>();
  s.max_row_residual = r.get<double>();
  s.row_residual_sum = r.get<double>();
  std::size_t slices = r.length(1);
  for (std::size_t i = 0; i < slices; ++i) {
    LowRankSlice sl;
    auto interior = r.get<std::uint32_t>();
    if (interior != order - 2) r.corrupt("bad slice key");
    sl.interior = r.key(interior);
    sl.row_words = r.ids();
    sl.col_words = r.ids();
    for (const auto* words : {&sl.row_words, &sl.col_words}) {
      if (words->empty() || !std::is_sorted(words->begin(), words->end()) ||
          words->back() >= vocab_size)
        r.corrupt("bad slice index");
    }
    auto k = r.get<std::uint64_t>();
    FactorPair f(sl.row_words.size(), sl.col_words.size(), k);
    auto left = r.doubles();
    auto right = r.doubles();
    if (k < 1 || left.size() != f.left_data().size() || right.size() != f.right_t_data().size())
      r.corrupt("factor shape mismatch");
    f.left_data() = std::move(left);
    f.right_t_data() = std::move(right);
    sl.factors = std::move(f);
    sl.report.rank = k;
    sl.report.requested_rank = r.get<std::uint64_t>();
    sl.report.iterations = r.get<std::uint64_t>();
    sl.report.final_gkl = r.get<double>();
    sl.report.max_row_residual = r.get<double>();
    sl.report.max_col_residual = r.get<double>();
    sl.report.converged = r.get<std::uint8_t>() != 0;
    z.add_slice(std::move(sl));
  }
  z.set_denominators(read_value_map(r));
  z.set_summary(s);
  return z;
}

}  // namespace io

/// Model identity and provenance recorded in the container header.
struct ContainerInfo {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// A loaded model plus its header.
struct LoadedModel {
  nlohmann::ordered_json header;
  std::shared_ptr<LanguageModel> model;

  const PlreModel* plre() const { return dynamic_cast<const PlreModel*>(model.get()); }
  const NgramLM* ngram() const { return dynamic_cast<const NgramLM*>(model.get()); }
  PlreModel* mutable_plre() { return dynamic_cast<PlreModel*>(model.get()); }
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_container(std::ostream& out, nlohmann::ordered_json header,
                            const std::vector<std::pair<std::string, std::string>>& sections) {
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& s : sections) names.push_back(s.first);
  header["sections"] = names;
  io::Writer w;
  w.put<std::uint32_t>(kContainerVersion);
  std::string h = header.dump();
  w.put<std::uint64_t>(h.size());
  out.write(kContainerMagic, sizeof kContainerMagic);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, payload] : sections) {
    io::Writer sw;
    sw.str(name);
    sw.put<std::uint64_t>(payload.size());
    out.write(sw.bytes().data(), static_cast<std::streamsize>(sw.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) fail(ErrorCode::kIo, "failed to write model container");
}

inline nlohmann::ordered_json base_header(const LanguageModel& m, const std::string& kind,
                                          const ContainerInfo& info) {
  nlohmann::ordered_json h;
  h["format"] = "plre-model";
  h["version"] = kContainerVersion;
  h["kind"] = kind;
  h["smoother"] = m.name();
  h["order"] = m.order();
  h["vocab_size"] = m.vocab().size();
  h["vocab_hash"] = hex64(m.vocab().hash());
  h["config"] = info.config;
  return h;
}

}  // namespace detail

inline void save_model(std::ostream& out, const NgramLM& m, const ContainerInfo& info = {}) {
  std::vector<std::pair<std::string, std::string>> sections;
  io::Writer v, t, d;
  io::write_vocab(v, m.vocab());
  io::write_table(t, m.top_table());
  d.put<std::uint64_t>(m.order());
  for (std::size_t k = 2; k <= m.order(); ++k)
    for (double x : m.discount(k).d) d.put<double>(x);
  sections.emplace_back("vocab", v.bytes());
  sections.emplace_back("counts", t.bytes());
  sections.emplace_back("discounts", d.bytes());
  detail::write_container(out, detail::base_header(m, "ngram", info), sections);
}

inline void save_model(std::ostream& out, const PlreModel& m, const ContainerInfo& info = {}) {
  std::vector<std::pair<std::string, std::string>> sections;
  io::Writer v, t, u;
  io::write_vocab(v, m.vocab());
  io::write_table(t, m.top_table());
  io::write_table(u, m.unigram_base());
  sections.emplace_back("vocab", v.bytes());
  sections.emplace_back("counts", t.bytes());
  sections.emplace_back("unigram", u.bytes());
  for (const PlreOrder& lv : m.levels()) {
    std::string prefix = "order" + std::to_string(lv.order) + ".";
    io::Writer p, b;
    p.put<double>(lv.dstar);
    p.put<double>(lv.gt_discount);
    p.doubles(lv.powers);
    p.put<std::uint64_t>(lv.ranks.size());
    for (std::size_t r : lv.ranks) p.put<std::uint64_t>(r);
    sections.emplace_back(prefix + "params", p.bytes());
    io::write_table(b, lv.base);
    sections.emplace_back(prefix + "base", b.bytes());
    for (std::size_t j = 0; j < lv.gammas.size(); ++j) {
      io::Writer g;
      io::write_value_map(g, lv.gammas[j], lv.order - 1);
      sections.emplace_back(prefix + "gamma" + std::to_string(j), g.bytes());
    }
    for (std::size_t j = 0; j < lv.lowrank.size(); ++j) {
      io::Writer z;
      io::write_lowrank(z, lv.lowrank[j]);
      sections.emplace_back(prefix + "z" + std::to_string(j + 1), z.bytes());
    }
  }
  auto header = detail::base_header(m, "plre", info);
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const PlreOrder& lv : m.levels()) {
    nlohmann::ordered_json o;
    o["order"] = lv.order;
    o["eta"] = lv.eta();
    o["powers"] = lv.powers;
    o["ranks"] = lv.ranks;
    o["dstar"] = lv.dstar;
    summary.push_back(o);
  }
  header["levels"] = summary;
  detail::write_container(out, header, sections);
}

inline std::string serialize(const LanguageModel& m, const ContainerInfo& info = {}) {
  std::ostringstream os;
  if (auto* p = dynamic_cast<const PlreModel*>(&m))
    save_model(os, *p, info);
  else if (auto* n = dynamic_cast<const NgramLM*>(&m))
    save_model(os, *n, info);
  else
    fail(ErrorCode::kInvalidArgument, "model type cannot be serialized");
  return os.str();
}

inline void save_model_file(const std::string& path, const LanguageModel& m,
                            const ContainerInfo& info = {}) {
  std::string bytes = serialize(m, info);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path);
}

inline LoadedModel load_model(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kContainerMagic, sizeof magic) != 0)
    fail(ErrorCode::kCorruptContainer, "not a model container");
  std::string fixed(12, '\0');
  if (!in.read(fixed.data(), 12)) fail(ErrorCode::kCorruptContainer, "truncated header");
  io::Reader fr(fixed, "preamble");
  auto version = fr.get<std::uint32_t>();
  if (version != kContainerVersion)
    fail(ErrorCode::kCorruptContainer, "unsupported container version " + std::to_string(version));
  auto header_len = fr.get<std::uint64_t>();
  if (header_len > (1u << 26)) fail(ErrorCode::kCorruptContainer, "header too large");
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    fail(ErrorCode::kCorruptContainer, "truncated header");
  LoadedModel loaded;
  try {
    loaded.header = nlohmann::ordered_json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptContainer, std::string("bad header: ") + e.what());
  }

  std::map<std::string, std::string> sections;
  for (;;) {
    char len_buf[4];
    if (!in.read(len_buf, 4)) break;
    std::uint32_t name_len;
    std::memcpy(&name_len, len_buf, 4);
    if (name_len > 256) fail(ErrorCode::kCorruptContainer, "bad section name");
    std::string name(name_len, '\0');
    std::uint64_t payload_len = 0;
    if (!in.read(name.data(), name_len) ||
        !in.read(reinterpret_cast<char*>(&payload_len), sizeof payload_len))
      fail(ErrorCode::kCorruptContainer, "truncated section header");
    std::string payload;
    payload.resize(payload_len);
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload_len)))
      fail(ErrorCode::kCorruptContainer, "truncated section " + name);
    sections[name] = std::move(payload);
  }
  auto section = [&](const std::string& name) -> const std::string& {
    auto it = sections.find(name);
    if (it == sections.end()) fail(ErrorCode::kCorruptContainer, "missing section " + name);
    return it->second;
  };

  std::string kind, hash;
  std::size_t order = 0;
  try {
    kind = loaded.header.at("kind").get<std::string>();
    hash = loaded.header.at("vocab_hash").get<std::string>();
    order = loaded.header.at("order").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptContainer, std::string("incomplete header: ") + e.what());
  }

  io::Reader vr(section("vocab"), "vocab");
  Vocabulary vocab = io::read_vocab(vr);
  vr.finish();
  if (detail::hex64(vocab.hash()) != hash)
    fail(ErrorCode::kVocabMismatch, "vocabulary does not match the header hash");
  io::Reader tr(section("counts"), "counts");
  CountTable top = io::read_table(tr, vocab.size());
  tr.finish();
  if (top.order() != order) fail(ErrorCode::kCorruptContainer, "order mismatch");

  if (kind == "ngram") {
    io::Reader dr(section("discounts"), "discounts");
    if (dr.get<std::uint64_t>() != order) dr.corrupt("order mismatch");
    NgramOptions options;
    options.smoother = parse_smoother(loaded.header.at("smoother").get<std::string>());
    for (std::size_t k = 2; k <= order; ++k) {
      DiscountParams p;
      for (double& x : p.d) x = dr.get<double>();
      options.discounts.push_back(p);
    }
    dr.finish();
    try {
      loaded.model = std::make_shared<NgramLM>(vocab, top, options);
    } catch (const Error& e) {
      fail(ErrorCode::kCorruptContainer, e.what());
    }
    return loaded;
  }
  if (kind != "plre") fail(ErrorCode::kCorruptContainer, "unknown model kind " + kind);

  io::Reader ur(section("unigram"), "unigram");
  CountTable unigram = io::read_table(ur, vocab.size());
  ur.finish();
  std::vector<PlreOrder> levels;
  for (std::size_t k = 2; k <= order; ++k) {
    std::string prefix = "order" + std::to_string(k) + ".";
    PlreOrder lv;
    lv.order = k;
    io::Reader pr(section(prefix + "params"), prefix + "params");
    lv.dstar = pr.get<double>();
    lv.gt_discount = pr.get<double>();
    lv.powers = pr.doubles();
    std::size_t nr = pr.length(8);
    for (std::size_t i = 0; i < nr; ++i) lv.ranks.push_back(pr.get<std::uint64_t>());
    pr.finish();
    if (lv.powers.size() < 2 || lv.ranks.size() + 2 != lv.powers.size())
      pr.corrupt("inconsistent level shape");
    io::Reader br(section(prefix + "base"), prefix + "base");
    lv.base = io::read_table(br, vocab.size());
    br.finish();
    if (lv.base.order() != k) br.corrupt("order mismatch");
    const std::size_t eta = lv.ranks.size();
    for (std::size_t j = 0; j <= eta; ++j) {
      std::string name = prefix + "gamma" + std::to_string(j);
      io::Reader gr(section(name), name);
      lv.gammas.push_back(io::read_value_map(gr));
      gr.finish();
    }
    for (std::size_t j = 1; j <= eta; ++j) {
      std::string name = prefix + "z" + std::to_string(j);
      io::Reader zr(section(name), name);
      lv.lowrank.push_back(io::read_lowrank(zr, vocab.size()));
      zr.finish();
    }
    levels.push_back(std::move(lv));
  }
  loaded.model = std::make_shared<PlreModel>(vocab, top, std::move(levels), unigram);
  return loaded;
}

inline LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path);
  return load_model(in);
}

}  // namespace plre
