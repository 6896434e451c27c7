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

#include <functional>
#include <string>

#include "fogfl/error.hpp"
#include "fogfl/wire/message.hpp"

namespace fogfl::wire {

using Handler = std::function<void(const Message&)>;

/// The handler families messages are routed to.
enum class HandlerGroup { Relationship, Training, Transmission, PendingReplies };

inline constexpr HandlerGroup group_of(MessageKind k) {
  switch (k) {
    case MessageKind::InviteWorker:
    case MessageKind::WorkerReady:
    case MessageKind::Shutdown:
      return HandlerGroup::Relationship;
    case MessageKind::StartTraining:
    case MessageKind::TrainingDone:
      return HandlerGroup::Training;
    case MessageKind::FetchWeights:
    case MessageKind::WeightsCredential:
      return HandlerGroup::Transmission;
    case MessageKind::Reject:
      return HandlerGroup::PendingReplies;
  }
  return HandlerGroup::PendingReplies;
}

/// One handler per group. Built once, then only read.
struct HandlerTable {
  Handler relationship;
  Handler training;
  Handler transmission;
  Handler pending_replies;  // Reject goes back to whoever is waiting on the request

  const Handler& for_group(HandlerGroup g) const {
    switch (g) {
      case HandlerGroup::Relationship: return relationship;
      case HandlerGroup::Training: return training;
      case HandlerGroup::Transmission: return transmission;
      case HandlerGroup::PendingReplies: return pending_replies;
    }
    return pending_replies;
  }
};

inline void dispatch(const Message& m, const HandlerTable& table) {
  const Handler& h = table.for_group(group_of(m.kind()));
  if (!h) {
    throw Error(Errc::NoHandler, "no handler for " + std::string(kind_name(m.kind())));
  }
  h(m);
}

}  // namespace fogfl::wire
