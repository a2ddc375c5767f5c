#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chansel/value.hpp"

namespace chansel {

enum class EventKind {
  Spawn,
  Send,
  Deliver,
  BranchTaken,
  TimeoutFired,
  RecvDone,
  ProcEnd,
  Fault,
};

std::string to_string(EventKind k);

// One observable runtime step. Serialized as JSON lines with fields
// {seq, time, kind, chan?, label?, waiter?, caseIndex?}; fault kinds are
// carried in the label field. Line 1 of a serialized trace is the schema
// header {"schema":"chansel-trace","version":1}.
struct TraceEvent {
  std::uint64_t seq = 0;
  std::uint64_t time = 0;
  EventKind kind = EventKind::Spawn;
  std::optional<ChannelId> chan;
  std::optional<Label> label;
  std::optional<std::uint64_t> waiter;
  std::optional<std::uint32_t> case_index;
};

struct Trace {
  std::vector<TraceEvent> events;
  // Extra JSONL lines appended after the events (harness annotations).
  std::vector<std::string> annotations;

  std::string to_jsonl() const;
  std::uint64_t hash() const;  // FNV-1a over the serialized form

  // Events with seq/time stripped, sorted: the order-insensitive view used
  // to compare engines.
  std::vector<std::string> normalized_multiset() const;

  std::size_t count(EventKind k) const;
  bool has_fault() const;
};

// Thread-safe append-only event sink; seq is assigned on emit.
class TraceSink {
 public:
  std::uint64_t emit(TraceEvent ev) {
    std::lock_guard lock(mu_);
    ev.seq = trace_.events.size();
    trace_.events.push_back(ev);
    return ev.seq;
  }
  Trace take() {
    std::lock_guard lock(mu_);
    return std::move(trace_);
  }

 private:
  std::mutex mu_;
  Trace trace_;
};

}  // namespace chansel
