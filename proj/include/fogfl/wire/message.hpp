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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "fogfl/core.hpp"

namespace fogfl {

/// Single-use authorization for one out-of-band weight download.
struct TransferCredential {
  std::string token;
  Endpoint endpoint;       // blob service address
  std::string blob_id;     // warehouse DataId hex on the exporting node
  double expires_at = 0.0; // seconds on the exporter's clock
  bool one_time = true;

  friend bool operator==(const TransferCredential&, const TransferCredential&) = default;
};

namespace wire {

enum class MessageKind : std::uint8_t {
  InviteWorker,
  WorkerReady,
  StartTraining,
  TrainingDone,
  FetchWeights,
  WeightsCredential,
  Reject,
  Shutdown,
};

inline constexpr std::string_view kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::InviteWorker: return "InviteWorker";
    case MessageKind::WorkerReady: return "WorkerReady";
    case MessageKind::StartTraining: return "StartTraining";
    case MessageKind::TrainingDone: return "TrainingDone";
    case MessageKind::FetchWeights: return "FetchWeights";
    case MessageKind::WeightsCredential: return "WeightsCredential";
    case MessageKind::Reject: return "Reject";
    case MessageKind::Shutdown: return "Shutdown";
  }
  return "";
}

inline std::optional<MessageKind> kind_from_name(std::string_view s) {
  for (auto k : {MessageKind::InviteWorker, MessageKind::WorkerReady,
                 MessageKind::StartTraining, MessageKind::TrainingDone,
                 MessageKind::FetchWeights, MessageKind::WeightsCredential,
                 MessageKind::Reject, MessageKind::Shutdown}) {
    if (kind_name(k) == s) return k;
  }
  return std::nullopt;
}

enum class RejectReason : std::uint8_t { Busy, UnrecognizedServer, Stale, Denied };

inline constexpr std::string_view reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::Busy: return "busy";
    case RejectReason::UnrecognizedServer: return "unrecognized-server";
    case RejectReason::Stale: return "stale";
    case RejectReason::Denied: return "denied";
  }
  return "";
}

inline std::optional<RejectReason> reason_from_name(std::string_view s) {
  for (auto r : {RejectReason::Busy, RejectReason::UnrecognizedServer,
                 RejectReason::Stale, RejectReason::Denied}) {
    if (reason_name(r) == s) return r;
  }
  return std::nullopt;
}

// Payloads. Every request carries a request_id that its reply echoes back.

struct InviteWorker {
  std::uint64_t request_id = 0;
  RemoteModelRef server_ref;
  friend bool operator==(const InviteWorker&, const InviteWorker&) = default;
};

struct WorkerReady {
  std::uint64_t request_id = 0;
  RemoteModelRef worker_ref;
  RemoteModelRef server_ref;
  std::uint32_t data_batches = 0;
  friend bool operator==(const WorkerReady&, const WorkerReady&) = default;
};

struct StartTraining {
  std::uint64_t request_id = 0;
  RemoteModelRef server_ref;
  RemoteModelRef worker_ref;
  std::uint32_t epochs = 1;
  friend bool operator==(const StartTraining&, const StartTraining&) = default;
};

struct TrainingDone {
  std::uint64_t request_id = 0;
  RemoteModelRef worker_ref;
  RemoteModelRef server_ref;
  std::uint32_t base_version = 0;
  std::uint32_t local_epochs = 0;
  friend bool operator==(const TrainingDone&, const TrainingDone&) = default;
};

struct FetchWeights {
  std::uint64_t request_id = 0;
  RemoteModelRef target;     // model whose weights are wanted
  RemoteModelRef requester;  // model asking for them
  friend bool operator==(const FetchWeights&, const FetchWeights&) = default;
};

struct WeightsCredential {
  std::uint64_t request_id = 0;
  TransferCredential credential;
  friend bool operator==(const WeightsCredential&, const WeightsCredential&) = default;
};

struct Reject {
  std::uint64_t request_id = 0;
  RejectReason reason = RejectReason::Denied;
  std::string detail;
  friend bool operator==(const Reject&, const Reject&) = default;
};

struct Shutdown {
  std::uint64_t request_id = 0;
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using Payload = std::variant<InviteWorker, WorkerReady, StartTraining, TrainingDone,
                             FetchWeights, WeightsCredential, Reject, Shutdown>;

struct Message {
  Endpoint sender;
  Payload payload;

  MessageKind kind() const noexcept { return static_cast<MessageKind>(payload.index()); }

  std::uint64_t request_id() const {
    return std::visit([](const auto& p) { return p.request_id; }, payload);
  }

  friend bool operator==(const Message&, const Message&) = default;
};

}  // namespace wire
}  // namespace fogfl
