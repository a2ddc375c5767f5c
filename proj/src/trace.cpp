#include "chansel/trace.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace chansel {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Spawn: return "Spawn";
    case EventKind::Send: return "Send";
    case EventKind::Deliver: return "Deliver";
    case EventKind::BranchTaken: return "BranchTaken";
    case EventKind::TimeoutFired: return "TimeoutFired";
    case EventKind::RecvDone: return "RecvDone";
    case EventKind::ProcEnd: return "ProcEnd";
    case EventKind::Fault: return "Fault";
  }
  return "?";
}

namespace {

nlohmann::ordered_json event_json(const TraceEvent& ev, bool with_seq_time) {
  nlohmann::ordered_json j;
  if (with_seq_time) {
    j["seq"] = ev.seq;
    j["time"] = ev.time;
  }
  j["kind"] = to_string(ev.kind);
  if (ev.chan) j["chan"] = ev.chan->value;
  if (ev.label) j["label"] = *ev.label;
  if (ev.waiter) j["waiter"] = *ev.waiter;
  if (ev.case_index) j["caseIndex"] = *ev.case_index;
  return j;
}

}  // namespace

std::string Trace::to_jsonl() const {
  std::ostringstream os;
  os << R"({"schema":"chansel-trace","version":1})" << "\n";
  for (const auto& ev : events) os << event_json(ev, true).dump() << "\n";
  for (const auto& line : annotations) os << line << "\n";
  return os.str();
}

std::uint64_t Trace::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_jsonl()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> Trace::normalized_multiset() const {
  std::vector<std::string> out;
  out.reserve(events.size());
  for (const auto& ev : events) out.push_back(event_json(ev, false).dump());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Trace::count(EventKind k) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(),
                    [&](const TraceEvent& e) { return e.kind == k; }));
}

bool Trace::has_fault() const { return count(EventKind::Fault) > 0; }

}  // namespace chansel
