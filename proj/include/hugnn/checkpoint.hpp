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

// Checkpoint directory: manifest.json plus one raw little-endian f64 file per tensor.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/tensor.hpp"
#include "json.hpp"

namespace hugnn {

struct Checkpoint {
  nlohmann::json manifest;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw LoadError("manifest.json", 0, "checkpoint has no tensor '" + name + "'");
    return it->second;
  }
};

namespace ckpt_detail {
inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}
}  // namespace ckpt_detail

/// Writes the tensors and a manifest. `extra` is merged into the manifest (seed, hyperparameters, ...).
inline void save_checkpoint(const std::filesystem::path& dir,
                            const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                            const nlohmann::json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json manifest = extra.is_object() ? extra : nlohmann::json::object();
  manifest["dtype"] = "f64";
  manifest["byte_order"] = "little-endian";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    const std::string file = name + ".bin";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / file).string());
    for (double v : t->values()) {
      const std::uint64_t bits = ckpt_detail::to_le(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw Error("write failed for " + (dir / file).string());
    list.push_back({{"name", name}, {"shape", {t->rows(), t->cols()}}, {"file", file}});
  }
  manifest["parameters"] = list;
  std::ofstream m(dir / "manifest.json", std::ios::trunc);
  if (!m) throw Error("cannot write " + (dir / "manifest.json").string());
  m << manifest.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw LoadError(mpath.string(), 0, "cannot open file");
  Checkpoint c;
  try {
    c.manifest = nlohmann::json::parse(in);
    if (c.manifest.at("dtype") != "f64") throw LoadError(mpath.string(), 0, "unsupported dtype");
    if (c.manifest.at("byte_order") != "little-endian") throw LoadError(mpath.string(), 0, "unsupported byte order");
    for (const auto& entry : c.manifest.at("parameters")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::size_t rows = entry.at("shape").at(0).get<std::size_t>();
      const std::size_t cols = entry.at("shape").at(1).get<std::size_t>();
      const auto fpath = dir / entry.at("file").get<std::string>();
      std::ifstream bin(fpath, std::ios::binary);
      if (!bin) throw LoadError(fpath.string(), 0, "cannot open file");
      Tensor t(rows, cols);
      for (double& v : t.values()) {
        std::uint64_t bits = 0;
        if (!bin.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
          throw LoadError(fpath.string(), 0, "file shorter than shape " + t.shape_string());
        }
        v = std::bit_cast<double>(ckpt_detail::to_le(bits));
      }
      if (bin.peek() != std::char_traits<char>::eof()) throw LoadError(fpath.string(), 0, "file longer than shape " + t.shape_string());
      c.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(mpath.string(), 0, e.what());
  }
  return c;
}

}  // namespace hugnn
