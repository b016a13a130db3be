#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dili/scenario.hpp"

namespace dili {

inline constexpr const char* kTraceHeader = "DILITRACE v1";

enum class TraceKind {
  HEADER,
  ELECT,
  LEADER,
  CMD,
  MOVE,
  REJECT,
  ROUND,
  MSG,
  MSGDROP,
  EVENT,
  GOAL,
  STUCK,
  METRICS,
};

inline const char* trace_kind_name(TraceKind k) {
  switch (k) {
    case TraceKind::HEADER: return "HEADER";
    case TraceKind::ELECT: return "ELECT";
    case TraceKind::LEADER: return "LEADER";
    case TraceKind::CMD: return "CMD";
    case TraceKind::MOVE: return "MOVE";
    case TraceKind::REJECT: return "REJECT";
    case TraceKind::ROUND: return "ROUND";
    case TraceKind::MSG: return "MSG";
    case TraceKind::MSGDROP: return "MSGDROP";
    case TraceKind::EVENT: return "EVENT";
    case TraceKind::GOAL: return "GOAL";
    case TraceKind::STUCK: return "STUCK";
    case TraceKind::METRICS: return "METRICS";
  }
  return "?";
}

inline std::optional<TraceKind> trace_kind_from(const std::string& s) {
  static const std::map<std::string, TraceKind> kMap = {
      {"HEADER", TraceKind::HEADER},   {"ELECT", TraceKind::ELECT},
      {"LEADER", TraceKind::LEADER},   {"CMD", TraceKind::CMD},
      {"MOVE", TraceKind::MOVE},       {"REJECT", TraceKind::REJECT},
      {"ROUND", TraceKind::ROUND},     {"MSG", TraceKind::MSG},
      {"MSGDROP", TraceKind::MSGDROP}, {"EVENT", TraceKind::EVENT},
      {"GOAL", TraceKind::GOAL},       {"STUCK", TraceKind::STUCK},
      {"METRICS", TraceKind::METRICS},
  };
  auto it = kMap.find(s);
  if (it == kMap.end()) return std::nullopt;
  return it->second;
}

/// One trace line: tick, sequence number, kind and an ordered key=value list.
struct TraceEvent {
  std::int64_t at = 0;
  std::int64_t seq = 0;
  TraceKind kind = TraceKind::HEADER;
  std::vector<std::pair<std::string, std::string>> kv;

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    return std::nullopt;
  }

  std::int64_t get_int(const std::string& key) const {
    auto v = get(key);
    if (!v) throw std::out_of_range("trace record has no key '" + key + "'");
    return std::stoll(*v);
  }

  Coord get_coord(const std::string& key) const {
    auto v = get(key);
    if (!v) throw std::out_of_range("trace record has no key '" + key + "'");
    auto comma = v->find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("bad coord value '" + *v + "'");
    return {std::stoi(v->substr(0, comma)), std::stoi(v->substr(comma + 1))};
  }

  friend bool operator==(const TraceEvent& a, const TraceEvent& b) {
    return a.at == b.at && a.seq == b.seq && a.kind == b.kind && a.kv == b.kv;
  }
};

inline std::string format_trace_event(const TraceEvent& ev) {
  std::ostringstream out;
  out << ev.at << " " << ev.seq << " " << trace_kind_name(ev.kind);
  for (const auto& [k, v] : ev.kv) out << " " << k << "=" << v;
  return out.str();
}

inline std::string write_trace(const std::vector<TraceEvent>& events) {
  std::ostringstream out;
  out << kTraceHeader << "\n";
  for (const TraceEvent& ev : events) out << format_trace_event(ev) << "\n";
  return out.str();
}

/// Parses a trace file back into the event sequence; read(write(x)) == x.
inline Parsed<std::vector<TraceEvent>> read_trace(const std::string& text) {
  auto fail = [](int line, const std::string& reason) {
    return Parsed<std::vector<TraceEvent>>{std::nullopt, ParseError{line, reason}};
  };
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return fail(1, "empty trace");
  if (line != kTraceHeader) {
    if (line.rfind("DILITRACE", 0) == 0)
      return fail(1, "unsupported trace version '" + line + "'");
    return fail(1, "bad trace header");
  }
  std::vector<TraceEvent> events;
  int lineno = 1;
  std::int64_t prev_at = -1, prev_seq = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceEvent ev;
    std::string kind;
    if (!(ls >> ev.at >> ev.seq >> kind))
      return fail(lineno, "malformed trace line");
    auto k = trace_kind_from(kind);
    if (!k) return fail(lineno, "unknown trace kind '" + kind + "'");
    ev.kind = *k;
    std::string tok;
    while (ls >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        return fail(lineno, "malformed key=value token '" + tok + "'");
      ev.kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    if (ev.at < prev_at || (ev.at == prev_at && ev.seq <= prev_seq))
      return fail(lineno, "trace records not increasing in (at, seq)");
    prev_at = ev.at;
    prev_seq = ev.seq;
    events.push_back(std::move(ev));
  }
  return Parsed<std::vector<TraceEvent>>{std::move(events), {}};
}

struct Metrics {
  std::int64_t motions = 0;
  std::int64_t maneuvers = 0;
  std::int64_t messages_sent = 0;
  std::int64_t messages_delivered = 0;
  std::int64_t messages_dropped = 0;
  std::int64_t epochs = 0;
  std::int64_t simtime_ms = 0;
  bool goal_reached = false;
  std::optional<int> final_path_len;
};

/// One key=value per line, keys in lexicographic order.
inline std::string metrics_report(const Metrics& m) {
  std::ostringstream out;
  out << "epochs=" << m.epochs << "\n";
  out << "final_path_len="
      << (m.final_path_len ? std::to_string(*m.final_path_len) : "none") << "\n";
  out << "goal_reached=" << (m.goal_reached ? "true" : "false") << "\n";
  out << "maneuvers=" << m.maneuvers << "\n";
  out << "messages_delivered=" << m.messages_delivered << "\n";
  out << "messages_dropped=" << m.messages_dropped << "\n";
  out << "messages_sent=" << m.messages_sent << "\n";
  out << "motions=" << m.motions << "\n";
  out << "simtime_ms=" << m.simtime_ms << "\n";
  return out.str();
}

}  // namespace dili
