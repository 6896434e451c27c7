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

// Weight side channel. Weights never ride on control messages: the owner
// parks a blob in its warehouse and hands out a single-use token, and the
// peer redeems that token against the owner's blob service.
//
// Blob layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "FLWT"
//   4       2     format version (1)
//   6       10    reserved, zero
//   16      4     dim
//   20      4     base_version
//   24      4     local_epochs
//   28      8*dim IEEE-754 binary64 values

#pragma once

#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>

#include <json.hpp>

#include "fogfl/core.hpp"
#include "fogfl/error.hpp"
#include "fogfl/warehouse.hpp"
#include "fogfl/wire/message.hpp"
#include "fogfl/wire/net.hpp"

namespace fogfl {

inline constexpr std::uint16_t kBlobFormatVersion = 1;
inline constexpr std::size_t kBlobHeaderBytes = 16;
inline constexpr std::size_t kMaxWeightBlob = std::size_t{1} << 30;  // 1 GiB
inline constexpr double kDefaultCredentialTtl = 300.0;

namespace detail {

template <typename T>
void put_le(Bytes& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{p[i]} << (8 * i));
  return v;
}

}  // namespace detail

inline Bytes encode_weight_blob(const VersionedWeights& vw) {
  const auto values = vw.weights.values();
  Bytes out;
  out.reserve(kBlobHeaderBytes + 12 + 8 * values.size());
  out.insert(out.end(), {'F', 'L', 'W', 'T'});
  detail::put_le<std::uint16_t>(out, kBlobFormatVersion);
  out.resize(kBlobHeaderBytes, 0);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  detail::put_le<std::uint32_t>(out, vw.base_version);
  detail::put_le<std::uint32_t>(out, vw.local_epochs);
  for (double v : values) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

/// Owner is not part of the blob; the caller knows who it fetched from.
inline VersionedWeights decode_weight_blob(std::span<const std::uint8_t> blob, Owner owner = {}) {
  if (blob.size() < kBlobHeaderBytes + 12 || std::memcmp(blob.data(), "FLWT", 4) != 0) {
    throw Error(Errc::MalformedBody, "not a weight blob");
  }
  const auto version = detail::get_le<std::uint16_t>(blob.data() + 4);
  if (version != kBlobFormatVersion) {
    throw Error(Errc::MalformedBody, "unsupported blob format " + std::to_string(version));
  }
  const std::uint8_t* p = blob.data() + kBlobHeaderBytes;
  const auto dim = detail::get_le<std::uint32_t>(p);
  const auto base_version = detail::get_le<std::uint32_t>(p + 4);
  const auto local_epochs = detail::get_le<std::uint32_t>(p + 8);
  if (blob.size() != kBlobHeaderBytes + 12 + 8 * std::size_t{dim}) {
    throw Error(Errc::MalformedBody, "blob length does not match dim");
  }
  std::vector<double> values(dim);
  p += 12;
  for (std::uint32_t k = 0; k < dim; ++k) {
    values[k] = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 8 * k));
  }
  return VersionedWeights{WeightVector(std::move(values)), base_version, local_epochs, owner};
}

/// Seconds on the local clock. Injectable so expiry can be tested.
using Clock = std::function<double()>;

inline double system_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

/// Exports weights into a warehouse and redeems one-time credentials for them.
/// The credential table is guarded by one mutex; a redeem marks the token
/// consumed under that lock, so concurrent redeems of one token see exactly
/// one winner.
class TransferService {
 public:
  TransferService(Warehouse& warehouse, Endpoint blob_endpoint, Clock clock = system_seconds,
                  double ttl = kDefaultCredentialTtl)
      : warehouse_(warehouse),
        endpoint_(std::move(blob_endpoint)),
        clock_(std::move(clock)),
        ttl_(ttl) {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd()};
    rng_.seed(seq);
  }

  void set_endpoint(Endpoint e) {
    std::lock_guard lock(mu_);
    endpoint_ = std::move(e);
  }

  TransferCredential export_weights(const VersionedWeights& vw) {
    const Bytes blob = encode_weight_blob(vw);
    DataId id;
    try {
      id = warehouse_.put(blob);
    } catch (const Error& e) {
      throw Error(Errc::StorageFailure, e.what());
    }
    std::lock_guard lock(mu_);
    TransferCredential c;
    c.token = fresh_token_locked();
    c.endpoint = endpoint_;
    c.blob_id = id.hex();
    c.expires_at = clock_() + ttl_;
    c.one_time = true;
    table_.emplace(c.token, Slot{id, c.expires_at, false});
    return c;
  }

  /// Consumes the token and returns the raw blob. The blob is deleted from
  /// the warehouse once read.
  Bytes redeem_bytes(const std::string& token) {
    DataId id;
    {
      std::lock_guard lock(mu_);
      auto it = table_.find(token);
      if (it == table_.end()) throw Error(Errc::UnknownToken, "unknown token");
      if (it->second.consumed) throw Error(Errc::AlreadyRedeemed, "token already redeemed");
      if (clock_() > it->second.expires_at) throw Error(Errc::Expired, "token expired");
      it->second.consumed = true;
      id = it->second.blob;
    }
    Bytes blob = warehouse_.get(id);
    warehouse_.remove(id);
    return blob;
  }

  VersionedWeights redeem(const TransferCredential& c) {
    return decode_weight_blob(redeem_bytes(c.token));
  }

  /// Drops credentials with expires_at < now together with their blobs.
  std::size_t gc_expired(double now) {
    std::vector<DataId> doomed;
    std::size_t purged = 0;
    {
      std::lock_guard lock(mu_);
      for (auto it = table_.begin(); it != table_.end();) {
        if (it->second.expires_at < now) {
          if (!it->second.consumed) doomed.push_back(it->second.blob);
          it = table_.erase(it);
          ++purged;
        } else {
          ++it;
        }
      }
    }
    for (const auto& id : doomed) warehouse_.remove(id);
    return purged;
  }

  std::size_t outstanding() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [_, slot] : table_) n += slot.consumed ? 0 : 1;
    return n;
  }

 private:
  struct Slot {
    DataId blob;
    double expires_at;
    bool consumed;
  };

  std::string fresh_token_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(32);
    for (int half = 0; half < 2; ++half) {
      std::uint64_t w = rng_();
      for (int i = 0; i < 16; ++i, w >>= 4) s.push_back(kHex[w & 0xf]);
    }
    return s;
  }

  Warehouse& warehouse_;
  Endpoint endpoint_;
  Clock clock_;
  double ttl_;
  mutable std::mutex mu_;
  std::map<std::string, Slot> table_;
  std::mt19937_64 rng_;
};

// ---- blob service -----------------------------------------------------------
//
// Request:  frame {"kind":"RedeemRequest","token":"<hex>"}
// Response: frame {"kind":"RedeemResponse","status":"ok"|<error name>,"detail":...}
//           followed, on "ok" only, by a 4-byte big-endian length and the raw blob.

namespace detail {

inline Bytes json_frame(const nlohmann::json& doc) {
  const std::string body = doc.dump();
  return wire::encode_frame(
      std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

inline nlohmann::json parse_json_frame(const Bytes& body) {
  auto doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(Errc::MalformedBody, "blob service frame is not a JSON object");
  }
  return doc;
}

inline Errc errc_from_name(std::string_view name) {
  for (auto c : {Errc::UnknownToken, Errc::AlreadyRedeemed, Errc::Expired, Errc::NotFound,
                 Errc::MalformedBody, Errc::StorageFailure}) {
    if (errc_name(c) == name) return c;
  }
  return Errc::IoError;
}

}  // namespace detail

/// Listener answering RedeemRequest frames for one TransferService.
class BlobServer {
 public:
  BlobServer(const Endpoint& bind_to, TransferService& service)
      : service_(service),
        listener_(bind_to, [this](wire::Socket& s, const std::atomic<bool>&) { serve(s); }) {}

  const Endpoint& endpoint() const noexcept { return listener_.endpoint(); }
  void stop() { listener_.stop(); }

 private:
  void serve(wire::Socket& s) {
    using nlohmann::json;
    const auto doc = detail::parse_json_frame(wire::read_frame(s, 4096, std::chrono::seconds(5)));
    if (doc.value("kind", "") != "RedeemRequest" || !doc.contains("token") ||
        !doc["token"].is_string()) {
      wire::write_all(s, detail::json_frame(
                             {{"kind", "RedeemResponse"}, {"status", "MalformedBody"},
                              {"detail", "expected RedeemRequest"}}));
      return;
    }
    Bytes blob;
    try {
      blob = service_.redeem_bytes(doc["token"].get<std::string>());
    } catch (const Error& e) {
      wire::write_all(s, detail::json_frame({{"kind", "RedeemResponse"},
                                             {"status", std::string(errc_name(e.code()))},
                                             {"detail", e.what()}}));
      return;
    }
    wire::write_all(s, detail::json_frame(
                           {{"kind", "RedeemResponse"}, {"status", "ok"}, {"detail", ""}}));
    wire::write_all(s, wire::encode_frame(blob, kMaxWeightBlob));
  }

  TransferService& service_;
  wire::TcpListener listener_;
};

/// Redeems `c` against the blob service it names.
inline VersionedWeights fetch_weights(const TransferCredential& c, Owner owner = {},
                                      std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  wire::Socket s = wire::connect_to(c.endpoint, timeout);
  wire::write_all(s, detail::json_frame({{"kind", "RedeemRequest"}, {"token", c.token}}));
  const auto reply = detail::parse_json_frame(wire::read_frame(s, 4096, timeout));
  const std::string status = reply.value("status", "");
  if (status != "ok") {
    throw Error(detail::errc_from_name(status), reply.value("detail", status));
  }
  const Bytes blob = wire::read_frame(s, kMaxWeightBlob, timeout);
  return decode_weight_blob(blob, owner);
}

}  // namespace fogfl
