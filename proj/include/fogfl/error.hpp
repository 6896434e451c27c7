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

#include <stdexcept>
#include <string>
#include <string_view>

namespace fogfl {

enum class Errc {
  // core
  DimensionMismatch,
  ZeroTotalWeight,
  NonFiniteInput,
  InvalidLambda,
  // warehouse
  EmptyBlob,
  NotFound,
  BackendUnavailable,
  // wire
  OversizeMessage,
  Truncated,
  MalformedBody,
  UnknownKind,
  NoHandler,
  BindFailure,
  // transfer
  StorageFailure,
  AlreadyRedeemed,
  Expired,
  UnknownToken,
  // trainer
  InvalidConfig,
  EmptyShard,
  EmptyTestSet,
  InvalidArgument,
  // selection
  InvalidProfile,
  EmptyWorkerSet,
  InvalidAccuracy,
  InvalidK,
  // orchestrator
  Unreachable,
  HandshakeTimeout,
  Rejected,
  WorkerBusy,
  Timeout,
  UnknownWorker,
  InsufficientResponses,
  // harness
  ParseError,
  ValidationError,
  IoError,
};

inline constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroTotalWeight: return "ZeroTotalWeight";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::InvalidLambda: return "InvalidLambda";
    case Errc::EmptyBlob: return "EmptyBlob";
    case Errc::NotFound: return "NotFound";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::OversizeMessage: return "OversizeMessage";
    case Errc::Truncated: return "Truncated";
    case Errc::MalformedBody: return "MalformedBody";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::NoHandler: return "NoHandler";
    case Errc::BindFailure: return "BindFailure";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::AlreadyRedeemed: return "AlreadyRedeemed";
    case Errc::Expired: return "Expired";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyShard: return "EmptyShard";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::EmptyWorkerSet: return "EmptyWorkerSet";
    case Errc::InvalidAccuracy: return "InvalidAccuracy";
    case Errc::InvalidK: return "InvalidK";
    case Errc::Unreachable: return "Unreachable";
    case Errc::HandshakeTimeout: return "HandshakeTimeout";
    case Errc::Rejected: return "Rejected";
    case Errc::WorkerBusy: return "WorkerBusy";
    case Errc::Timeout: return "Timeout";
    case Errc::UnknownWorker: return "UnknownWorker";
    case Errc::InsufficientResponses: return "InsufficientResponses";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// The single exception type thrown by the library. `code()` is stable and
/// meant for programmatic handling; `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fogfl
