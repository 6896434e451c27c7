/*
 * Copyright 2026 The fogfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fogfl/error.hpp"

namespace fogfl {

using Bytes = std::vector<std::uint8_t>;

/// 128-bit random identifier, rendered as 32 lowercase hex digits.
class DataId {
 public:
  DataId() = default;
  explicit DataId(std::string hex) : hex_(std::move(hex)) {}

  const std::string& hex() const noexcept { return hex_; }
  bool empty() const noexcept { return hex_.empty(); }

  friend bool operator==(const DataId&, const DataId&) = default;
  friend auto operator<=>(const DataId&, const DataId&) = default;

 private:
  std::string hex_;
};

/// Backend tag. Two are built in; anything registered under another name works
/// the same way.
struct StorageBackendKind {
  std::string name;
  friend bool operator==(const StorageBackendKind&, const StorageBackendKind&) = default;
  friend auto operator<=>(const StorageBackendKind&, const StorageBackendKind&) = default;
};

inline const StorageBackendKind kMemoryBackend{"memory"};
inline const StorageBackendKind kLocalFileBackend{"localfile"};

class StorageBackend {
 public:
  virtual ~StorageBackend() = default;
  virtual void write(const DataId& id, std::span<const std::uint8_t> blob) = 0;
  virtual Bytes read(const DataId& id) const = 0;
  virtual void remove(const DataId& id) = 0;
};

class MemoryBackend final : public StorageBackend {
 public:
  void write(const DataId& id, std::span<const std::uint8_t> blob) override {
    std::lock_guard lock(mu_);
    blobs_[id.hex()] = Bytes(blob.begin(), blob.end());
  }

  Bytes read(const DataId& id) const override {
    std::lock_guard lock(mu_);
    auto it = blobs_.find(id.hex());
    if (it == blobs_.end()) throw Error(Errc::NotFound, id.hex());
    return it->second;
  }

  void remove(const DataId& id) override {
    std::lock_guard lock(mu_);
    blobs_.erase(id.hex());
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, Bytes> blobs_;
};

/// Stores each blob as `<root>/<hex-id>.blob`.
class LocalFileBackend final : public StorageBackend {
 public:
  explicit LocalFileBackend(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) {
      throw Error(Errc::BackendUnavailable,
                  "cannot create warehouse root " + root_.string() + ": " + ec.message());
    }
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path path_for(const DataId& id) const {
    return root_ / (id.hex() + ".blob");
  }

  void write(const DataId& id, std::span<const std::uint8_t> blob) override {
    const auto final_path = path_for(id);
    const auto tmp_path = root_ / (id.hex() + ".tmp");
    {
      std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(Errc::BackendUnavailable, "cannot open " + tmp_path.string());
      out.write(reinterpret_cast<const char*>(blob.data()),
                static_cast<std::streamsize>(blob.size()));
      if (!out) throw Error(Errc::BackendUnavailable, "short write to " + tmp_path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) throw Error(Errc::BackendUnavailable, "rename failed: " + ec.message());
  }

  Bytes read(const DataId& id) const override {
    const auto path = path_for(id);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::NotFound, id.hex());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    Bytes out(size);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
    if (!in) throw Error(Errc::BackendUnavailable, "short read from " + path.string());
    return out;
  }

  void remove(const DataId& id) override {
    std::error_code ec;
    std::filesystem::remove(path_for(id), ec);
  }

 private:
  std::filesystem::path root_;
};

/// ID-keyed blob store over pluggable backends. All operations are serialized
/// by one lock, which makes them linearizable per id.
class Warehouse {
 public:
  /// Memory backend only; pass a root directory to get localfile too.
  Warehouse() { register_backend(kMemoryBackend, std::make_unique<MemoryBackend>()); }

  explicit Warehouse(const std::filesystem::path& local_root) : Warehouse() {
    register_backend(kLocalFileBackend, std::make_unique<LocalFileBackend>(local_root));
  }

  Warehouse(const Warehouse&) = delete;
  Warehouse& operator=(const Warehouse&) = delete;

  void register_backend(const StorageBackendKind& kind, std::unique_ptr<StorageBackend> backend) {
    std::lock_guard lock(mu_);
    backends_[kind] = std::move(backend);
  }

  bool has_backend(const StorageBackendKind& kind) const {
    std::lock_guard lock(mu_);
    return backends_.contains(kind);
  }

  /// Default backend for weights and shards: local disk when configured.
  StorageBackendKind default_backend() const {
    std::lock_guard lock(mu_);
    return backends_.contains(kLocalFileBackend) ? kLocalFileBackend : kMemoryBackend;
  }

  DataId put(std::span<const std::uint8_t> blob, const StorageBackendKind& kind) {
    if (blob.empty()) throw Error(Errc::EmptyBlob, "refusing to store an empty blob");
    std::lock_guard lock(mu_);
    auto it = backends_.find(kind);
    if (it == backends_.end()) {
      throw Error(Errc::BackendUnavailable, "no backend named " + kind.name);
    }
    DataId id = fresh_id_locked();
    it->second->write(id, blob);
    index_.emplace(id, kind);
    return id;
  }

  DataId put(std::span<const std::uint8_t> blob) { return put(blob, default_backend()); }

  Bytes get(const DataId& id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(Errc::NotFound, id.hex());
    auto backend = backends_.find(it->second);
    if (backend == backends_.end()) {
      throw Error(Errc::BackendUnavailable, "backend " + it->second.name + " is gone");
    }
    return backend->second->read(id);
  }

  std::optional<StorageBackendKind> backend_of(const DataId& id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Idempotent; unknown ids are ignored.
  void remove(const DataId& id) {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return;
    auto backend = backends_.find(it->second);
    if (backend != backends_.end()) backend->second->remove(id);
    index_.erase(it);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return index_.size();
  }

 private:
  DataId fresh_id_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    for (;;) {
      std::string hex;
      hex.reserve(32);
      for (int half = 0; half < 2; ++half) {
        std::uint64_t word = rng_();
        for (int nib = 0; nib < 16; ++nib) {
          hex.push_back(kHex[word & 0xf]);
          word >>= 4;
        }
      }
      DataId id(std::move(hex));
      if (!index_.contains(id)) return id;
    }
  }

  static std::mt19937_64 seeded_rng() {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }

  mutable std::mutex mu_;
  std::map<StorageBackendKind, std::unique_ptr<StorageBackend>> backends_;
  std::map<DataId, StorageBackendKind> index_;
  std::mt19937_64 rng_ = seeded_rng();
};

}  // namespace fogfl
