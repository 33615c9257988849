/**
 * Copyright 2026 The hugnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Bundle directory format:
//   meta.json     {"name", "n", "m", "d", "num_classes"}
//   edges.tsv     "u<TAB>v" per line, 0-indexed
//   features.csv  n rows of d comma-separated decimals
//   labels.csv    one integer per line, -1 for unknown
//   split.csv     train|val|test|unlabeled per line (optional on load)

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/rng.hpp"
#include "json.hpp"

namespace hugnn {

namespace fs = std::filesystem;

struct LoadReport {
  std::size_t dropped_pairs = 0;  ///< self-loops and duplicates (including reversed copies)
  std::size_t meta_m = 0;         ///< edge count declared in meta.json
  bool split_generated = false;
};

namespace io_detail {

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError(p.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Splits on '\n'; a trailing newline does not produce an extra empty line. '\r' is stripped.
inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = nl + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed for " + p.string());
}

}  // namespace io_detail

/// Reads and validates a bundle directory. Directed or duplicated edges are symmetrized
/// and deduplicated. Without split.csv a standard split is drawn from `split_seed`.
inline DatasetBundle load_bundle(const fs::path& dir, std::uint64_t split_seed = 0, LoadReport* report = nullptr) {
  using io_detail::lines_of;
  using io_detail::parse_number;
  if (!fs::is_directory(dir)) throw LoadError(dir.string(), 0, "not a bundle directory");
  LoadReport rep;
  DatasetBundle b;

  const fs::path meta_path = dir / "meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io_detail::read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(meta_path.string(), 0, e.what());
  }
  std::size_t n = 0, d = 0;
  try {
    b.name = meta.value("name", dir.filename().string());
    n = meta.at("n").get<std::size_t>();
    d = meta.at("d").get<std::size_t>();
    b.num_classes = meta.at("num_classes").get<std::size_t>();
    rep.meta_m = meta.value("m", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(meta_path.string(), 0, e.what());
  }
  if (b.num_classes == 0) throw LoadError(meta_path.string(), 0, "num_classes must be positive");

  const fs::path edges_path = dir / "edges.tsv";
  std::vector<Edge> pairs;
  {
    const std::string text = io_detail::read_file(edges_path);
    const auto lines = lines_of(text);
    pairs.reserve(lines.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
      std::string_view line = io_detail::trim(lines[k]);
      if (line.empty()) continue;
      const std::size_t sep = line.find_first_of("\t ");
      std::uint64_t u = 0, v = 0;
      if (sep == std::string_view::npos || !parse_number(line.substr(0, sep), u) ||
          !parse_number(line.substr(sep + 1), v)) {
        throw LoadError(edges_path.string(), k + 1, "expected 'u<TAB>v'");
      }
      if (u >= n || v >= n) throw LoadError(edges_path.string(), k + 1, "node id out of range for n=" + std::to_string(n));
      pairs.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
  }
  b.graph = Graph::from_pairs(n, pairs, &rep.dropped_pairs);

  const fs::path feat_path = dir / "features.csv";
  {
    const std::string text = io_detail::read_file(feat_path);
    const auto lines = lines_of(text);
    if (lines.size() != n) {
      throw LoadError(feat_path.string(), lines.size(), "expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size()));
    }
    b.features = Tensor(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::string_view line = lines[i];
      std::size_t col = 0, pos = 0;
      while (true) {
        const std::size_t comma = line.find(',', pos);
        const std::string_view cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        double v = 0.0;
        if (col >= d) throw LoadError(feat_path.string(), i + 1, "more than d=" + std::to_string(d) + " columns");
        if (!parse_number(cell, v)) throw LoadError(feat_path.string(), i + 1, "non-numeric feature '" + std::string(cell) + "'");
        if (!std::isfinite(v)) throw LoadError(feat_path.string(), i + 1, "non-finite feature");
        b.features(i, col++) = v;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
      }
      if (col != d) throw LoadError(feat_path.string(), i + 1, "expected " + std::to_string(d) + " columns, found " + std::to_string(col));
    }
  }

  const fs::path label_path = dir / "labels.csv";
  {
    const std::string text = io_detail::read_file(label_path);
    const auto lines = lines_of(text);
    if (lines.size() != n) {
      throw LoadError(label_path.string(), lines.size(), "expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size()));
    }
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      long long y = 0;
      if (!parse_number(lines[i], y)) throw LoadError(label_path.string(), i + 1, "non-integer label");
      if (y != kNoLabel && (y < 0 || static_cast<unsigned long long>(y) >= b.num_classes)) {
        throw LoadError(label_path.string(), i + 1, "label " + std::to_string(y) + " outside [0, " + std::to_string(b.num_classes) + ")");
      }
      b.labels[i] = static_cast<int>(y);
    }
  }

  const fs::path split_path = dir / "split.csv";
  if (fs::exists(split_path)) {
    const std::string text = io_detail::read_file(split_path);
    const auto lines = lines_of(text);
    if (lines.size() != n) {
      throw LoadError(split_path.string(), lines.size(), "expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size()));
    }
    b.roles.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_role(io_detail::trim(lines[i]), b.roles[i])) {
        throw LoadError(split_path.string(), i + 1, "unknown role '" + std::string(lines[i]) + "'");
      }
      if (b.roles[i] == Role::train && b.labels[i] == kNoLabel) {
        throw LoadError(split_path.string(), i + 1, "train node without a label");
      }
    }
  } else {
    Rng rng = Rng(split_seed).derive("split");
    b.roles = make_split(b.labels, b.num_classes, rng);
    rep.split_generated = true;
  }
  if (report) *report = rep;
  return b;
}

/// Writes `b` as a bundle directory, creating it if needed. Output is deterministic.
inline void save_bundle(const DatasetBundle& b, const fs::path& dir) {
  b.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["name"] = b.name;
  meta["n"] = b.n();
  meta["m"] = b.m();
  meta["d"] = b.d();
  meta["num_classes"] = b.num_classes;
  io_detail::write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::string s;
  for (auto [u, v] : b.graph.edges()) {
    s += std::to_string(u);
    s += '\t';
    s += std::to_string(v);
    s += '\n';
  }
  io_detail::write_file(dir / "edges.tsv", s);

  s.clear();
  for (std::size_t i = 0; i < b.n(); ++i) {
    for (std::size_t j = 0; j < b.d(); ++j) {
      if (j) s += ',';
      s += io_detail::format_double(b.features(i, j));
    }
    s += '\n';
  }
  io_detail::write_file(dir / "features.csv", s);

  s.clear();
  for (int y : b.labels) {
    s += std::to_string(y);
    s += '\n';
  }
  io_detail::write_file(dir / "labels.csv", s);

  s.clear();
  for (Role r : b.roles) {
    s += role_name(r);
    s += '\n';
  }
  io_detail::write_file(dir / "split.csv", s);
}

}  // namespace hugnn
