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

// Training configuration and its key = value file format.
//
//   # comment
//   smoother = plre           # mle | abs | kn | mkn | plre
//   order = 3
//   unk_threshold = 1
//   power = 0.5               # intermediate powers for orders 2 and 3
//   power.4 =                 # per-order override; empty means eta = 0
//   rank = 0.005              # absolute (>= 1) or vocabulary fraction
//   rank.2 = 0.001, 0.002     # one value per intermediate level
//   dstar = gt-root           # or a number in [0, 1]
//   seed = 1
//   threads = 1
//   nmf.max_iters = 200
//   nmf.rel_tol = 1e-6
//   nmf.epsilon = 1e-12

#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "plre/baselines.hpp"
#include "plre/plre.hpp"

namespace plre {

struct TrainConfig {
  std::string smoother = "plre";
  std::size_t order = 3;
  Count unk_threshold = 1;
  PlreConfig plre;
  std::size_t threads = 1;

  bool is_plre() const { return smoother == "plre"; }
};

namespace detail {

inline std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  auto end = s.find_last_not_of(ws);
  s.erase(end == std::string::npos ? 0 : end + 1);
  return s;
}

inline double parse_double(const std::string& text, const std::string& key) {
  std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    fail(ErrorCode::kConfig, "bad number for " + key + ": '" + text + "'");
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& text, const std::string& key) {
  std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    fail(ErrorCode::kConfig, "bad integer for " + key + ": '" + text + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(item, key));
  }
  return out;
}

inline std::size_t order_suffix(const std::string& key, const std::string& prefix) {
  std::size_t k = parse_unsigned(key.substr(prefix.size()), key);
  if (k < 2 || k > kMaxOrder) fail(ErrorCode::kConfig, "order out of range in key " + key);
  return k;
}

}  // namespace detail

/// Parses a global d* setting: "gt-root" or a number in [0, 1].
inline DstarMode parse_dstar(const std::string& text) {
  std::string t = detail::trim(text);
  if (t == "gt-root") return {};
  double v = detail::parse_double(t, "dstar");
  if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::kConfig, "dstar must lie in [0, 1]");
  return {false, v};
}

/// Applies a single key = value setting.
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "smoother") {
    std::string s = trim(value);
    if (s != "plre") parse_smoother(s);
    c.smoother = s;
  } else if (key == "order") {
    c.order = parse_unsigned(value, key);
    if (c.order < 1 || c.order > kMaxOrder)
      fail(ErrorCode::kConfig, "order must lie in [1, " + std::to_string(kMaxOrder) + "]");
  } else if (key == "unk_threshold") {
    c.unk_threshold = static_cast<Count>(parse_unsigned(value, key));
  } else if (key == "power") {
    auto powers = parse_list(value, key);
    for (std::size_t k = 2; k <= 3; ++k) c.plre.powers[k] = powers;
  } else if (key.rfind("power.", 0) == 0) {
    c.plre.powers[order_suffix(key, "power.")] = parse_list(value, key);
  } else if (key == "rank") {
    auto ranks = parse_list(value, key);
    if (ranks.size() != 1) fail(ErrorCode::kConfig, "rank takes a single value");
    c.plre.default_rank = ranks[0];
  } else if (key.rfind("rank.", 0) == 0) {
    c.plre.ranks[order_suffix(key, "rank.")] = parse_list(value, key);
  } else if (key == "dstar") {
    c.plre.dstar = parse_dstar(value);
  } else if (key == "seed") {
    c.plre.seed = parse_unsigned(value, key);
  } else if (key == "threads") {
    c.threads = parse_unsigned(value, key);
    c.plre.threads = c.threads;
  } else if (key == "nmf.max_iters") {
    c.plre.nmf.max_iters = parse_unsigned(value, key);
  } else if (key == "nmf.rel_tol") {
    c.plre.nmf.rel_tol = parse_double(value, key);
  } else if (key == "nmf.epsilon") {
    c.plre.nmf.epsilon = parse_double(value, key);
  } else {
    fail(ErrorCode::kConfig, "unknown config key: " + key);
  }
}

inline TrainConfig parse_config(std::istream& in, TrainConfig c = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

inline TrainConfig load_config(const std::string& path, TrainConfig c = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config: " + path);
  return parse_config(in, std::move(c));
}

/// Echo of the effective configuration, stored in model headers.
inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["smoother"] = c.smoother;
  j["order"] = c.order;
  j["unk_threshold"] = c.unk_threshold;
  if (c.is_plre()) {
    nlohmann::ordered_json powers, ranks;
    for (std::size_t k = 2; k <= c.order; ++k) {
      powers[std::to_string(k)] = c.plre.powers_for(k);
      auto it = c.plre.ranks.find(k);
      ranks[std::to_string(k)] =
          it == c.plre.ranks.end() ? std::vector<double>{c.plre.default_rank} : it->second;
    }
    j["powers"] = powers;
    j["ranks"] = ranks;
    j["dstar"] = c.plre.dstar.gt_root ? nlohmann::ordered_json("gt-root")
                                      : nlohmann::ordered_json(c.plre.dstar.fixed);
    j["seed"] = c.plre.seed;
    j["nmf"] = {{"max_iters", c.plre.nmf.max_iters},
                {"rel_tol", c.plre.nmf.rel_tol},
                {"epsilon", c.plre.nmf.epsilon}};
  }
  return j;
}

}  // namespace plre
