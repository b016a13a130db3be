#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dili/lattice.hpp"
#include "dili/motion.hpp"
#include "dili/network.hpp"

namespace dili {

struct SimParams {
  std::int64_t max_ticks = 10'000'000;
  std::int64_t round_timeout = 10'000;
  LatencyModel latency = LatencyModel::uniform(1, 20);
  MotionParams motion;
  std::uint64_t seed = 1;
  bool log_messages = false;
};

struct ScenarioEvent {
  enum class Kind { set_output, fail };
  std::int64_t at = 0;
  Kind kind = Kind::set_output;
  Coord pos;   // set_output
  int id = 0;  // fail
};

struct Scenario {
  std::string name = "scenario";
  Grid grid;
  std::vector<ModuleRecord> modules;
  SimParams params;
  std::vector<ScenarioEvent> events;

  Configuration initial_configuration() const {
    Configuration config;
    for (const ModuleRecord& rec : modules) config.add(rec);
    return config;
  }
};

struct ParseError {
  int line = 0;  // 0 = file-level
  std::string reason;

  std::string format() const {
    if (line == 0) return "error: " + reason;
    return "error: line " + std::to_string(line) + ": " + reason;
  }
};

template <typename T>
struct Parsed {
  std::optional<T> value;
  ParseError error;

  explicit operator bool() const { return value.has_value(); }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  std::size_t pos = 0;
  try {
    out = std::stoull(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

}  // namespace detail

/// Parses the line-oriented scenario grammar. Errors cite the first
/// offending line; omitted parameters take module defaults.
inline Parsed<Scenario> parse_scenario(const std::string& text,
                                       const std::string& name = "scenario") {
  using detail::parse_int;
  using detail::parse_u64;
  using detail::split_ws;

  Scenario sc;
  sc.name = name;
  bool have_grid = false, have_input = false, have_output = false;
  bool have_seed = false, have_latency = false, have_pitch = false;
  bool have_speed = false, have_rule = false, have_timeout = false;
  bool have_maxticks = false;
  std::vector<int> module_lines;
  std::vector<int> event_lines;
  int input_line = 0, output_line = 0;

  auto fail = [](int line, const std::string& reason) {
    return Parsed<Scenario>{std::nullopt, ParseError{line, reason}};
  };

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::vector<std::string> tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];

    auto want = [&](std::size_t n) { return tok.size() == n; };
    std::int64_t a = 0, b = 0, c = 0;

    if (key == "grid") {
      if (have_grid) return fail(lineno, "duplicate grid");
      if (!want(3) || !parse_int(tok[1], a) || !parse_int(tok[2], b))
        return fail(lineno, "expected: grid W H");
      if (a < 1 || b < 1) return fail(lineno, "grid dimensions must be >= 1");
      sc.grid.width = static_cast<int>(a);
      sc.grid.height = static_cast<int>(b);
      have_grid = true;
    } else if (key == "input" || key == "output") {
      bool& have = key == "input" ? have_input : have_output;
      if (have) return fail(lineno, "duplicate " + key);
      if (!want(3) || !parse_int(tok[1], a) || !parse_int(tok[2], b))
        return fail(lineno, "expected: " + key + " X Y");
      Coord pos{static_cast<int>(a), static_cast<int>(b)};
      (key == "input" ? sc.grid.input : sc.grid.output) = pos;
      (key == "input" ? input_line : output_line) = lineno;
      have = true;
    } else if (key == "module") {
      if (!want(4) || !parse_int(tok[1], a) || !parse_int(tok[2], b) ||
          !parse_int(tok[3], c))
        return fail(lineno, "expected: module ID X Y");
      if (a < 1) return fail(lineno, "module id must be positive");
      sc.modules.push_back({static_cast<int>(a),
                            {static_cast<int>(b), static_cast<int>(c)},
                            ModuleStatus::alive});
      module_lines.push_back(lineno);
    } else if (key == "seed") {
      if (have_seed) return fail(lineno, "duplicate seed");
      std::uint64_t s = 0;
      if (!want(2) || !parse_u64(tok[1], s))
        return fail(lineno, "expected: seed N");
      sc.params.seed = s;
      have_seed = true;
    } else if (key == "latency") {
      if (have_latency) return fail(lineno, "duplicate latency");
      if (tok.size() >= 2 && tok[1] == "fixed") {
        if (!want(3) || !parse_int(tok[2], a))
          return fail(lineno, "expected: latency fixed T");
        sc.params.latency = LatencyModel::fixed(a);
      } else if (tok.size() >= 2 && tok[1] == "uniform") {
        if (!want(4) || !parse_int(tok[2], a) || !parse_int(tok[3], b))
          return fail(lineno, "expected: latency uniform A B");
        sc.params.latency = LatencyModel::uniform(a, b);
      } else {
        return fail(lineno, "expected: latency fixed T | latency uniform A B");
      }
      if (!sc.params.latency.valid())
        return fail(lineno, "latency bounds must satisfy 1 <= A <= B");
      have_latency = true;
    } else if (key == "pitch") {
      if (have_pitch) return fail(lineno, "duplicate pitch");
      if (!want(2) || !parse_int(tok[1], a) || a < 1)
        return fail(lineno, "expected: pitch MM (positive)");
      sc.params.motion.pitch_mm = static_cast<int>(a);
      have_pitch = true;
    } else if (key == "speed") {
      if (have_speed) return fail(lineno, "duplicate speed");
      if (!want(2) || !parse_int(tok[1], a) || a < 1)
        return fail(lineno, "expected: speed MMPS (positive)");
      sc.params.motion.speed_mm_s = static_cast<int>(a);
      have_speed = true;
    } else if (key == "slide-rule") {
      if (have_rule) return fail(lineno, "duplicate slide-rule");
      if (!want(2) || (tok[1] != "single" && tok[1] != "double"))
        return fail(lineno, "expected: slide-rule single|double");
      sc.params.motion.slide_rule = tok[1] == "single"
                                        ? SlideRule::single_flank
                                        : SlideRule::double_flank;
      have_rule = true;
    } else if (key == "round-timeout") {
      if (have_timeout) return fail(lineno, "duplicate round-timeout");
      if (!want(2) || !parse_int(tok[1], a) || a < 1)
        return fail(lineno, "expected: round-timeout T (positive)");
      sc.params.round_timeout = a;
      have_timeout = true;
    } else if (key == "max-ticks") {
      if (have_maxticks) return fail(lineno, "duplicate max-ticks");
      if (!want(2) || !parse_int(tok[1], a) || a < 1)
        return fail(lineno, "expected: max-ticks T (positive)");
      sc.params.max_ticks = a;
      have_maxticks = true;
    } else if (key == "at") {
      ScenarioEvent ev;
      if (tok.size() >= 3 && tok[2] == "set-output") {
        if (!want(5) || !parse_int(tok[1], a) || !parse_int(tok[3], b) ||
            !parse_int(tok[4], c))
          return fail(lineno, "expected: at T set-output X Y");
        ev.kind = ScenarioEvent::Kind::set_output;
        ev.pos = {static_cast<int>(b), static_cast<int>(c)};
      } else if (tok.size() >= 3 && tok[2] == "fail") {
        if (!want(4) || !parse_int(tok[1], a) || !parse_int(tok[3], b))
          return fail(lineno, "expected: at T fail ID");
        ev.kind = ScenarioEvent::Kind::fail;
        ev.id = static_cast<int>(b);
      } else {
        return fail(lineno, "expected: at T set-output X Y | at T fail ID");
      }
      if (a < 0) return fail(lineno, "event tick must be >= 0");
      ev.at = a;
      sc.events.push_back(ev);
      event_lines.push_back(lineno);
    } else {
      return fail(lineno, "unknown keyword '" + key + "'");
    }
  }

  // file-level validation, citing the first offending line where one exists
  if (!have_grid) return fail(0, "missing grid directive");
  if (!have_input) return fail(0, "missing input directive");
  if (!have_output) return fail(0, "missing output directive");
  if (sc.modules.empty()) return fail(0, "at least one module required");
  if (!sc.grid.in_bounds(sc.grid.input))
    return fail(input_line, "input out of bounds");
  if (!sc.grid.in_bounds(sc.grid.output))
    return fail(output_line, "output out of bounds");
  if (sc.grid.input == sc.grid.output)
    return fail(output_line, "input and output must differ");

  Configuration config;
  for (std::size_t i = 0; i < sc.modules.size(); ++i) {
    const ModuleRecord& rec = sc.modules[i];
    int line = module_lines[i];
    if (!sc.grid.in_bounds(rec.pos))
      return fail(line, "module out of bounds");
    if (config.contains(rec.id))
      return fail(line, "duplicate module id " + std::to_string(rec.id));
    if (config.occupied(rec.pos))
      return fail(line, "duplicate module position " + to_string(rec.pos));
    config.add(rec);
  }
  if (!is_connected(config, Adjacency::four))
    return fail(0, "initial configuration is not 4-connected");

  std::int64_t prev_at = -1;
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    const ScenarioEvent& ev = sc.events[i];
    int line = event_lines[i];
    if (ev.at < prev_at) return fail(line, "events not sorted by tick");
    prev_at = ev.at;
    if (ev.at > sc.params.max_ticks)
      return fail(line, "event tick exceeds max-ticks");
    if (ev.kind == ScenarioEvent::Kind::fail) {
      if (!config.contains(ev.id))
        return fail(line, "fail references unknown module " + std::to_string(ev.id));
    } else {
      if (!sc.grid.in_bounds(ev.pos))
        return fail(line, "set-output out of bounds");
      if (ev.pos == sc.grid.input)
        return fail(line, "set-output must differ from input");
    }
  }
  return Parsed<Scenario>{std::move(sc), {}};
}

/// Canonical pretty-printer; parse(print(s)) == s.
inline std::string print_scenario(const Scenario& sc) {
  std::ostringstream out;
  out << "grid " << sc.grid.width << " " << sc.grid.height << "\n";
  out << "input " << sc.grid.input.x << " " << sc.grid.input.y << "\n";
  out << "output " << sc.grid.output.x << " " << sc.grid.output.y << "\n";
  for (const ModuleRecord& rec : sc.modules)
    out << "module " << rec.id << " " << rec.pos.x << " " << rec.pos.y << "\n";
  out << "seed " << sc.params.seed << "\n";
  if (sc.params.latency.kind == LatencyModel::Kind::fixed)
    out << "latency fixed " << sc.params.latency.a << "\n";
  else
    out << "latency uniform " << sc.params.latency.a << " "
        << sc.params.latency.b << "\n";
  out << "pitch " << sc.params.motion.pitch_mm << "\n";
  out << "speed " << sc.params.motion.speed_mm_s << "\n";
  out << "slide-rule "
      << (sc.params.motion.slide_rule == SlideRule::single_flank ? "single"
                                                                 : "double")
      << "\n";
  out << "round-timeout " << sc.params.round_timeout << "\n";
  out << "max-ticks " << sc.params.max_ticks << "\n";
  for (const ScenarioEvent& ev : sc.events) {
    if (ev.kind == ScenarioEvent::Kind::set_output)
      out << "at " << ev.at << " set-output " << ev.pos.x << " " << ev.pos.y
          << "\n";
    else
      out << "at " << ev.at << " fail " << ev.id << "\n";
  }
  return out.str();
}

}  // namespace dili
