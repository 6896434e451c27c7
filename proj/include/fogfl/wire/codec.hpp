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

// Frame layout: 4-byte big-endian body length, then a UTF-8 JSON body with
// sorted keys and no insignificant whitespace:
//
//   {"kind":"<Kind>","payload":{...},"sender":{"host":"h","port":p}}
//
// The schema for each payload lives in docs/protocol.md.

#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fogfl/error.hpp"
#include "fogfl/warehouse.hpp"
#include "fogfl/wire/message.hpp"

namespace fogfl::wire {

using json = nlohmann::json;

inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kMaxControlBody = std::size_t{1} << 24;  // 16 MiB

inline void put_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

/// Prefixes `body` with its length. `cap` bounds the body size.
inline Bytes encode_frame(std::span<const std::uint8_t> body,
                          std::size_t cap = kMaxControlBody) {
  if (body.size() > cap) {
    throw Error(Errc::OversizeMessage,
                "body of " + std::to_string(body.size()) + " bytes exceeds cap " +
                    std::to_string(cap));
  }
  Bytes out;
  out.reserve(kFrameHeaderBytes + body.size());
  put_u32_be(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

// ---- JSON mapping -------------------------------------------------------

namespace detail {

inline json to_json(const Endpoint& e) { return json{{"host", e.host}, {"port", e.port}}; }

inline json to_json(const RemoteModelRef& r) {
  return json{{"host", r.address.host}, {"port", r.address.port}, {"model_id", r.model_id}};
}

inline json to_json(const TransferCredential& c) {
  return json{{"token", c.token},
              {"endpoint", to_json(c.endpoint)},
              {"blob_id", c.blob_id},
              {"expires_at", c.expires_at},
              {"one_time", c.one_time}};
}

inline json payload_json(const Payload& p) {
  struct Visitor {
    json operator()(const InviteWorker& m) const {
      return {{"request_id", m.request_id}, {"server_ref", to_json(m.server_ref)}};
    }
    json operator()(const WorkerReady& m) const {
      return {{"request_id", m.request_id},
              {"worker_ref", to_json(m.worker_ref)},
              {"server_ref", to_json(m.server_ref)},
              {"data_batches", m.data_batches}};
    }
    json operator()(const StartTraining& m) const {
      return {{"request_id", m.request_id},
              {"server_ref", to_json(m.server_ref)},
              {"worker_ref", to_json(m.worker_ref)},
              {"epochs", m.epochs}};
    }
    json operator()(const TrainingDone& m) const {
      return {{"request_id", m.request_id},
              {"worker_ref", to_json(m.worker_ref)},
              {"server_ref", to_json(m.server_ref)},
              {"base_version", m.base_version},
              {"local_epochs", m.local_epochs}};
    }
    json operator()(const FetchWeights& m) const {
      return {{"request_id", m.request_id},
              {"target", to_json(m.target)},
              {"requester", to_json(m.requester)}};
    }
    json operator()(const WeightsCredential& m) const {
      return {{"request_id", m.request_id}, {"credential", to_json(m.credential)}};
    }
    json operator()(const Reject& m) const {
      return {{"request_id", m.request_id},
              {"reason", std::string(reason_name(m.reason))},
              {"detail", m.detail}};
    }
    json operator()(const Shutdown& m) const { return {{"request_id", m.request_id}}; }
  };
  return std::visit(Visitor{}, p);
}

// Strict field readers. Each throws Error(MalformedBody) on a missing key or a
// wrong type; no nlohmann exception escapes.

inline const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) throw Error(Errc::MalformedBody, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::MalformedBody, std::string("missing field ") + key);
  return *it;
}

inline std::string read_string(const json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_string()) throw Error(Errc::MalformedBody, std::string(key) + " is not a string");
  return v.get<std::string>();
}

inline std::uint64_t read_u64(const json& obj, const char* key,
                              std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
  const auto& v = field(obj, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw Error(Errc::MalformedBody, std::string(key) + " is not a non-negative integer");
  }
  const auto x = v.get<std::uint64_t>();
  if (x > max) throw Error(Errc::MalformedBody, std::string(key) + " out of range");
  return x;
}

inline std::uint32_t read_u32(const json& obj, const char* key) {
  return static_cast<std::uint32_t>(read_u64(obj, key, std::numeric_limits<std::uint32_t>::max()));
}

inline double read_number(const json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_number()) throw Error(Errc::MalformedBody, std::string(key) + " is not a number");
  return v.get<double>();
}

inline bool read_bool(const json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_boolean()) throw Error(Errc::MalformedBody, std::string(key) + " is not a bool");
  return v.get<bool>();
}

inline Endpoint read_endpoint(const json& obj) {
  return Endpoint{read_string(obj, "host"),
                  static_cast<std::uint16_t>(read_u64(obj, "port", 65535))};
}

inline RemoteModelRef read_ref(const json& obj) {
  return RemoteModelRef{read_endpoint(obj), read_string(obj, "model_id")};
}

inline TransferCredential read_credential(const json& obj) {
  TransferCredential c;
  c.token = read_string(obj, "token");
  c.endpoint = read_endpoint(field(obj, "endpoint"));
  c.blob_id = read_string(obj, "blob_id");
  c.expires_at = read_number(obj, "expires_at");
  c.one_time = read_bool(obj, "one_time");
  return c;
}

inline Payload read_payload(MessageKind kind, const json& p) {
  switch (kind) {
    case MessageKind::InviteWorker:
      return InviteWorker{read_u64(p, "request_id"), read_ref(field(p, "server_ref"))};
    case MessageKind::WorkerReady:
      return WorkerReady{read_u64(p, "request_id"), read_ref(field(p, "worker_ref")),
                         read_ref(field(p, "server_ref")), read_u32(p, "data_batches")};
    case MessageKind::StartTraining:
      return StartTraining{read_u64(p, "request_id"), read_ref(field(p, "server_ref")),
                           read_ref(field(p, "worker_ref")), read_u32(p, "epochs")};
    case MessageKind::TrainingDone:
      return TrainingDone{read_u64(p, "request_id"), read_ref(field(p, "worker_ref")),
                          read_ref(field(p, "server_ref")), read_u32(p, "base_version"),
                          read_u32(p, "local_epochs")};
    case MessageKind::FetchWeights:
      return FetchWeights{read_u64(p, "request_id"), read_ref(field(p, "target")),
                          read_ref(field(p, "requester"))};
    case MessageKind::WeightsCredential:
      return WeightsCredential{read_u64(p, "request_id"),
                               read_credential(field(p, "credential"))};
    case MessageKind::Reject: {
      auto reason = reason_from_name(read_string(p, "reason"));
      if (!reason) throw Error(Errc::MalformedBody, "unknown reject reason");
      return Reject{read_u64(p, "request_id"), *reason, read_string(p, "detail")};
    }
    case MessageKind::Shutdown:
      return Shutdown{read_u64(p, "request_id")};
  }
  throw Error(Errc::UnknownKind, "unhandled kind");
}

}  // namespace detail

/// Canonical JSON body of `m` (no length prefix).
inline std::string encode_body(const Message& m) {
  json doc{{"kind", std::string(kind_name(m.kind()))},
           {"sender", detail::to_json(m.sender)},
           {"payload", detail::payload_json(m.payload)}};
  try {
    return doc.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedBody, e.what());
  }
}

/// Length-prefixed frame for `m`. Deterministic: equal messages give equal bytes.
inline Bytes encode(const Message& m) {
  const std::string body = encode_body(m);
  return encode_frame(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

inline Message decode_body(std::span<const std::uint8_t> body) {
  json doc = json::parse(body.begin(), body.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(Errc::MalformedBody, "body is not a JSON object");
  }
  try {
    const std::string kind_str = detail::read_string(doc, "kind");
    const auto kind = kind_from_name(kind_str);
    if (!kind) throw Error(Errc::UnknownKind, "kind '" + kind_str + "'");
    Message m;
    m.sender = detail::read_endpoint(detail::field(doc, "sender"));
    const auto& payload = detail::field(doc, "payload");
    if (!payload.is_object()) throw Error(Errc::MalformedBody, "payload is not an object");
    m.payload = detail::read_payload(*kind, payload);
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedBody, e.what());
  }
}

struct DecodeResult {
  enum class Status { Ok, Truncated, Oversize, Malformed, UnknownKind };
  Status status = Status::Truncated;
  std::optional<Message> message;
  std::size_t consumed = 0;  // bytes to drop from the input, 0 when Truncated
  std::string error;
};

/// Decodes the first frame in `bytes` without throwing. A Malformed or
/// UnknownKind frame still reports `consumed`, so a stream can skip it.
inline DecodeResult try_decode(std::span<const std::uint8_t> bytes) {
  DecodeResult r;
  if (bytes.size() < kFrameHeaderBytes) return r;
  const std::uint32_t len = get_u32_be(bytes);
  if (len > kMaxControlBody) {
    r.status = DecodeResult::Status::Oversize;
    r.error = "frame length " + std::to_string(len) + " exceeds cap";
    return r;
  }
  if (bytes.size() < kFrameHeaderBytes + len) return r;
  r.consumed = kFrameHeaderBytes + len;
  try {
    r.message = decode_body(bytes.subspan(kFrameHeaderBytes, len));
    r.status = DecodeResult::Status::Ok;
  } catch (const Error& e) {
    r.status = e.code() == Errc::UnknownKind ? DecodeResult::Status::UnknownKind
                                             : DecodeResult::Status::Malformed;
    r.error = e.what();
  }
  return r;
}

/// Throwing variant of try_decode.
inline Message decode(std::span<const std::uint8_t> bytes) {
  auto r = try_decode(bytes);
  switch (r.status) {
    case DecodeResult::Status::Ok: return std::move(*r.message);
    case DecodeResult::Status::Truncated: throw Error(Errc::Truncated, "need more bytes");
    case DecodeResult::Status::Oversize: throw Error(Errc::OversizeMessage, r.error);
    case DecodeResult::Status::UnknownKind: throw Error(Errc::UnknownKind, r.error);
    case DecodeResult::Status::Malformed: break;
  }
  throw Error(Errc::MalformedBody, r.error);
}

/// Accumulates stream bytes and yields complete frame bodies in order.
class FrameAssembler {
 public:
  explicit FrameAssembler(std::size_t cap = kMaxControlBody) : cap_(cap) {}

  void feed(std::span<const std::uint8_t> chunk) {
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
  }

  /// Next complete body, or nullopt when more bytes are needed. Throws
  /// OversizeMessage when the announced length exceeds the cap; the stream is
  /// unusable afterwards.
  std::optional<Bytes> next() {
    if (buffer_.size() - head_ < kFrameHeaderBytes) return std::nullopt;
    const std::uint32_t len = get_u32_be(std::span(buffer_).subspan(head_, 4));
    if (len > cap_) throw Error(Errc::OversizeMessage, "announced frame too large");
    if (buffer_.size() - head_ < kFrameHeaderBytes + len) return std::nullopt;
    const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(head_ + kFrameHeaderBytes);
    Bytes body(begin, begin + len);
    head_ += kFrameHeaderBytes + len;
    if (head_ == buffer_.size()) {
      buffer_.clear();
      head_ = 0;
    } else if (head_ > (1u << 20)) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
    return body;
  }

  std::size_t buffered() const noexcept { return buffer_.size() - head_; }

 private:
  std::size_t cap_;
  Bytes buffer_;
  std::size_t head_ = 0;
};

}  // namespace fogfl::wire
