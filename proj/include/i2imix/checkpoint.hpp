/* Copyright (c) 2026 The i2imix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2imix/errors.hpp"
#include "i2imix/tensor.hpp"

namespace i2imix {

// Self-describing checkpoint container: magic, version, a JSON header
// (metadata plus a tensor directory) and raw little-endian tensor blobs.
// Values round-trip bit-exactly, which the resume-determinism contract
// relies on.

inline constexpr char kCheckpointMagic[8] = {'I', '2', 'I', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  nlohmann::json meta;  // free-form metadata (configs, counters, ...)

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    Blob blob;
    blob.dtype = dtype_tag<T>();
    blob.shape = t.shape;
    blob.bytes.resize(t.numel() * sizeof(T));
    std::memcpy(blob.bytes.data(), t.ptr(), blob.bytes.size());
    tensors_[name] = std::move(blob);
  }

  bool has(const std::string& name) const { return tensors_.count(name) != 0; }

  std::vector<std::string> tensor_names() const {
    std::vector<std::string> names;
    names.reserve(tensors_.size());
    for (const auto& kv : tensors_) names.push_back(kv.first);
    return names;
  }

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw IoError("checkpoint tensor missing: " + name);
    const Blob& blob = it->second;
    if (blob.dtype != dtype_tag<T>())
      throw ConfigError("checkpoint tensor " + name + " has dtype " + blob.dtype +
                        ", requested " + dtype_tag<T>());
    Tensor<T> t(blob.shape);
    if (blob.bytes.size() != t.numel() * sizeof(T))
      throw IoError("checkpoint tensor " + name + " has inconsistent size");
    std::memcpy(t.ptr(), blob.bytes.data(), blob.bytes.size());
    return t;
  }

  /// Atomic save: write to a temp file, then rename into place.
  void save(const std::string& path) const {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";

    nlohmann::json header = meta;
    header["format_version"] = kCheckpointVersion;
    nlohmann::json dir = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, blob] : tensors_) {
      dir.push_back({{"name", name},
                     {"dtype", blob.dtype},
                     {"shape", blob.shape},
                     {"offset", offset},
                     {"bytes", blob.bytes.size()}});
      offset += blob.bytes.size();
    }
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open checkpoint for writing: " + tmp.string());
      out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
      const std::uint32_t version = kCheckpointVersion;
      out.write(reinterpret_cast<const char*>(&version), sizeof(version));
      const std::uint64_t hlen = header_str.size();
      out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
      out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
      for (const auto& [name, blob] : tensors_)
        out.write(reinterpret_cast<const char*>(blob.bytes.data()),
                  static_cast<std::streamsize>(blob.bytes.size()));
      if (!out) throw IoError("checkpoint write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
      throw IoError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion)
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("truncated checkpoint header: " + path);

    nlohmann::json header = nlohmann::json::parse(header_str);
    Checkpoint ck;
    const std::streampos data_start = in.tellg();
    for (const auto& entry : header.at("tensors")) {
      Blob blob;
      blob.dtype = entry.at("dtype").get<std::string>();
      blob.shape = entry.at("shape").get<std::vector<int>>();
      blob.bytes.resize(entry.at("bytes").get<std::size_t>());
      in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(blob.bytes.data()),
              static_cast<std::streamsize>(blob.bytes.size()));
      if (!in) throw IoError("truncated checkpoint data: " + path);
      ck.tensors_[entry.at("name").get<std::string>()] = std::move(blob);
    }
    header.erase("tensors");
    ck.meta = std::move(header);
    return ck;
  }

 private:
  struct Blob {
    std::string dtype;
    std::vector<int> shape;
    std::vector<std::uint8_t> bytes;
  };

  template <typename T>
  static std::string dtype_tag() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else if constexpr (std::is_same_v<T, double>) return "f64";
    else if constexpr (std::is_same_v<T, std::int32_t>) return "i32";
    else static_assert(sizeof(T) == 0, "unsupported checkpoint dtype");
  }

  std::map<std::string, Blob> tensors_;  // sorted -> deterministic layout
};

}  // namespace i2imix
