#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dili/lattice.hpp"

namespace dili {

enum class Dir { E, N, S, W };

inline constexpr std::array<Dir, 4> kDirs = {Dir::E, Dir::N, Dir::S, Dir::W};

inline Coord step(Coord c, Dir d) {
  switch (d) {
    case Dir::E: return {c.x + 1, c.y};
    case Dir::N: return {c.x, c.y + 1};
    case Dir::S: return {c.x, c.y - 1};
    case Dir::W: return {c.x - 1, c.y};
  }
  return c;
}

inline bool perpendicular(Dir a, Dir b) {
  bool ax = (a == Dir::E || a == Dir::W);
  bool bx = (b == Dir::E || b == Dir::W);
  return ax != bx;
}

// The two directions perpendicular to d, in canonical order.
inline std::array<Dir, 2> flank_dirs(Dir d) {
  if (d == Dir::E || d == Dir::W) return {Dir::N, Dir::S};
  return {Dir::E, Dir::W};
}

inline char dir_char(Dir d) {
  switch (d) {
    case Dir::E: return 'E';
    case Dir::N: return 'N';
    case Dir::S: return 'S';
    case Dir::W: return 'W';
  }
  return '?';
}

inline std::optional<Dir> dir_from_char(char c) {
  switch (c) {
    case 'E': return Dir::E;
    case 'N': return Dir::N;
    case 'S': return Dir::S;
    case 'W': return Dir::W;
    default: return std::nullopt;
  }
}

enum class ManeuverKind { slide, corner };

/// A slide (one cell) or corner (two perpendicular cells) move of one module.
/// driver is set only for failed movers actuated by a live flank neighbor.
struct Maneuver {
  int mover = 0;
  ManeuverKind kind = ManeuverKind::slide;
  std::vector<Dir> legs;
  std::optional<int> driver;

  friend bool operator==(const Maneuver& a, const Maneuver& b) {
    return a.mover == b.mover && a.kind == b.kind && a.legs == b.legs &&
           a.driver == b.driver;
  }
  friend bool operator<(const Maneuver& a, const Maneuver& b) {
    if (a.mover != b.mover) return a.mover < b.mover;
    if (a.legs != b.legs) return a.legs < b.legs;
    return a.driver < b.driver;
  }
};

inline std::string legs_string(const std::vector<Dir>& legs) {
  std::string s;
  for (Dir d : legs) s += dir_char(d);
  return s;
}

inline Coord maneuver_end(Coord start, const std::vector<Dir>& legs) {
  Coord c = start;
  for (Dir d : legs) c = step(c, d);
  return c;
}

enum class SlideRule { single_flank, double_flank };

struct MotionParams {
  int pitch_mm = 12;
  int speed_mm_s = 12;
  SlideRule slide_rule = SlideRule::single_flank;
};

enum class RejectReason {
  occupied,
  out_of_bounds,
  no_flank,
  disconnect,
  dead_actuator,
};

inline const char* reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::occupied: return "occupied";
    case RejectReason::out_of_bounds: return "out_of_bounds";
    case RejectReason::no_flank: return "no_flank";
    case RejectReason::disconnect: return "disconnect";
    case RejectReason::dead_actuator: return "dead_actuator";
  }
  return "?";
}

struct ManeuverCheck {
  bool ok = false;
  RejectReason reason = RejectReason::occupied;
  std::optional<int> driver;  // filled for accepted moves of failed movers
};

namespace detail {

// Occupancy seen by a leg executing while the mover sits at mover_at: every
// module except the mover itself, which occupies mover_at.
struct LegView {
  const Configuration* config;
  int mover;
  Coord mover_at;

  bool occupied(Coord c) const {
    if (c == mover_at) return true;
    auto id = config->id_at(c);
    return id && *id != mover;
  }
  // Occupied by a module other than the mover (flank candidates).
  std::optional<int> other_at(Coord c) const {
    auto id = config->id_at(c);
    if (id && *id != mover) return id;
    return std::nullopt;
  }
};

// Cells that satisfy the slide-legality flank requirement for a leg from p
// along d, under the given rule. Empty result means the leg has no stator.
inline std::vector<int> flank_modules(const LegView& view, Coord p, Dir d,
                                      SlideRule rule) {
  std::vector<int> out;
  Coord q = step(p, d);
  for (Dir s : flank_dirs(d)) {
    auto near = view.other_at(step(p, s));
    auto far = view.other_at(step(q, s));
    if (rule == SlideRule::double_flank) {
      if (near && far) {
        out.push_back(*near);
        out.push_back(*far);
      }
    } else {
      if (near) out.push_back(*near);
      if (far) out.push_back(*far);
    }
  }
  return out;
}

inline std::vector<Coord> cells_with(const Configuration& config, int mover,
                                     Coord mover_at) {
  std::vector<Coord> cells;
  for (const auto& [id, rec] : config.records())
    cells.push_back(id == mover ? mover_at : rec.pos);
  return cells;
}

}  // namespace detail

/// Deterministic driver choice for a failed mover: the smallest-id alive
/// flank module that is 4-adjacent to the mover's starting cell.
inline std::optional<int> pick_driver(const Configuration& config, int mover,
                                      const std::vector<Dir>& legs,
                                      SlideRule rule) {
  Coord start = config.record(mover).pos;
  Coord at = start;
  std::optional<int> best;
  for (Dir d : legs) {
    detail::LegView view{&config, mover, at};
    for (int id : detail::flank_modules(view, at, d, rule)) {
      const ModuleRecord& rec = config.record(id);
      if (rec.status != ModuleStatus::alive) continue;
      if (manhattan(rec.pos, start) != 1) continue;
      if (!best || id < *best) best = id;
    }
    at = step(at, d);
  }
  return best;
}

/// Full legality test, conditions evaluated in a fixed order:
/// destination bounds/occupancy per leg, flank per leg, mid-corner
/// 8-connectivity, final 4-connectivity plus docked landing, actuation.
inline ManeuverCheck check_maneuver(const Configuration& config,
                                    const Grid& grid, const Maneuver& m,
                                    const MotionParams& params) {
  const ModuleRecord& mover = config.record(m.mover);
  if (m.legs.empty() || m.legs.size() > 2)
    throw std::invalid_argument("maneuver must have 1 or 2 legs");
  if (m.legs.size() == 2 && !perpendicular(m.legs[0], m.legs[1]))
    throw std::invalid_argument("corner legs must be perpendicular");

  auto reject = [](RejectReason r) { return ManeuverCheck{false, r, {}}; };

  // (a) each leg's destination is in bounds and unoccupied when it executes
  Coord at = mover.pos;
  for (Dir d : m.legs) {
    Coord to = step(at, d);
    if (!grid.in_bounds(to)) return reject(RejectReason::out_of_bounds);
    detail::LegView view{&config, m.mover, at};
    if (view.occupied(to)) return reject(RejectReason::occupied);
    at = to;
  }

  // (b) slide legality: each leg needs a stator flank under the rule
  at = mover.pos;
  for (Dir d : m.legs) {
    detail::LegView view{&config, m.mover, at};
    if (detail::flank_modules(view, at, d, params.slide_rule).empty())
      return reject(RejectReason::no_flank);
    at = step(at, d);
  }

  // (c) intermediate state of a corner must stay 8-connected
  if (m.legs.size() == 2) {
    Coord mid = step(mover.pos, m.legs[0]);
    if (!cells_connected(detail::cells_with(config, m.mover, mid),
                         Adjacency::eight))
      return reject(RejectReason::disconnect);
  }

  // (d) final state 4-connected, mover docked to at least one module
  Coord end = maneuver_end(mover.pos, m.legs);
  if (!cells_connected(detail::cells_with(config, m.mover, end),
                       Adjacency::four))
    return reject(RejectReason::disconnect);
  {
    bool docked = false;
    for (Coord d : kUnitSteps) {
      auto id = config.id_at({end.x + d.x, end.y + d.y});
      if (id && *id != m.mover) docked = true;
    }
    if (!docked) return reject(RejectReason::disconnect);
  }

  // (e) actuation: a failed mover needs an alive flank on every leg and a
  // driver adjacent to its starting cell
  ManeuverCheck ok{true, RejectReason::occupied, {}};
  if (mover.status == ModuleStatus::failed) {
    Coord pos = mover.pos;
    for (Dir d : m.legs) {
      detail::LegView view{&config, m.mover, pos};
      bool alive_flank = false;
      for (int id : detail::flank_modules(view, pos, d, params.slide_rule))
        if (config.record(id).status == ModuleStatus::alive) alive_flank = true;
      if (!alive_flank) return reject(RejectReason::dead_actuator);
      pos = step(pos, d);
    }
    ok.driver = pick_driver(config, m.mover, m.legs, params.slide_rule);
    if (!ok.driver) return reject(RejectReason::dead_actuator);
    if (m.driver && m.driver != ok.driver)
      return reject(RejectReason::dead_actuator);
  } else if (m.driver) {
    return reject(RejectReason::dead_actuator);  // alive movers have no driver
  }
  return ok;
}

/// The twelve geometric maneuver shapes of one module, in canonical order:
/// four slides (E,N,S,W), then corners by first and second leg.
inline std::vector<Maneuver> maneuver_shapes(int mover) {
  std::vector<Maneuver> out;
  for (Dir d : kDirs)
    out.push_back({mover, ManeuverKind::slide, {d}, {}});
  for (Dir a : kDirs)
    for (Dir b : kDirs)
      if (perpendicular(a, b))
        out.push_back({mover, ManeuverKind::corner, {a, b}, {}});
  return out;
}

/// Every legal maneuver of the given module. Maneuvers of failed movers carry
/// the deterministic driver choice.
inline std::vector<Maneuver> legal_maneuvers(const Configuration& config,
                                             const Grid& grid, int mover,
                                             const MotionParams& params) {
  std::vector<Maneuver> out;
  for (Maneuver m : maneuver_shapes(mover)) {
    ManeuverCheck check = check_maneuver(config, grid, m, params);
    if (!check.ok) continue;
    m.driver = check.driver;
    out.push_back(std::move(m));
  }
  return out;
}

/// Applies a maneuver, throwing with the failed condition when it is illegal.
inline Configuration apply_maneuver(const Configuration& config,
                                    const Grid& grid, const Maneuver& m,
                                    const MotionParams& params) {
  ManeuverCheck check = check_maneuver(config, grid, m, params);
  if (!check.ok)
    throw std::invalid_argument(std::string("illegal maneuver: ") +
                                reason_name(check.reason));
  Configuration out = config;
  out.move_module(m.mover, maneuver_end(config.record(m.mover).pos, m.legs));
  return out;
}

/// Ticks for one leg of travel; 1 tick = 1 ms simulated.
inline std::int64_t leg_duration_ticks(const MotionParams& params) {
  return std::llround(1000.0 * params.pitch_mm / params.speed_mm_s);
}

inline std::int64_t maneuver_duration_ticks(const Maneuver& m,
                                            const MotionParams& params) {
  return static_cast<std::int64_t>(m.legs.size()) * leg_duration_ticks(params);
}

/// Completion offsets of the six polarity substeps within one leg.
inline std::array<std::int64_t, 6> substep_offsets(std::int64_t leg_ticks) {
  std::array<std::int64_t, 6> out{};
  for (int k = 1; k <= 6; ++k)
    out[k - 1] = std::llround(static_cast<double>(k) * leg_ticks / 6.0);
  return out;
}

/// Motion count of a maneuver: one per unit-cell leg.
inline int motion_count(const Maneuver& m) {
  return static_cast<int>(m.legs.size());
}

}  // namespace dili
