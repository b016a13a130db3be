#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "dili/lattice.hpp"
#include "dili/motion.hpp"
#include "dili/scenario.hpp"

namespace dili {

struct SearchBounds {
  std::int64_t max_states = 2'000'000;
  std::int64_t max_depth = 64;
};

struct OracleResult {
  std::optional<std::int64_t> motions;  // nullopt = unknown
  std::int64_t states_explored = 0;
};

namespace detail {

// Oracle states are anonymous sorted cell sets; module identity is
// irrelevant to the goal predicate.
inline Configuration configuration_of(const std::vector<Coord>& cells) {
  Configuration config;
  int id = 1;
  for (Coord c : cells) config.add({id++, c, ModuleStatus::alive});
  return config;
}

struct CellMove {
  std::vector<Coord> next;
  std::int64_t cost = 0;
};

inline std::vector<CellMove> cell_moves(const std::vector<Coord>& cells,
                                        const Grid& grid,
                                        const MotionParams& params) {
  Configuration config = configuration_of(cells);
  std::vector<CellMove> out;
  int id = 0;
  for (Coord c : cells) {
    ++id;
    if (c == grid.input || c == grid.output) continue;  // anchored
    for (const Maneuver& m : maneuver_shapes(id)) {
      if (!check_maneuver(config, grid, m, params).ok) continue;
      std::vector<Coord> next;
      next.reserve(cells.size());
      for (Coord other : cells)
        next.push_back(other == c ? maneuver_end(c, m.legs) : other);
      std::sort(next.begin(), next.end());
      out.push_back({std::move(next), static_cast<std::int64_t>(m.legs.size())});
    }
  }
  return out;
}

}  // namespace detail

/// Exact minimum number of unit-cell motions to join input and output with an
/// occupied 4-connected chain, by uniform-cost search over anonymous cell
/// sets. Returns unknown when a bound is hit or no solution exists within it.
inline OracleResult optimal_motion_count(const Scenario& sc,
                                         SearchBounds bounds) {
  const Grid& grid = sc.grid;
  std::vector<Coord> start;
  for (const ModuleRecord& rec : sc.modules) start.push_back(rec.pos);
  std::sort(start.begin(), start.end());
  if (!cells_connected(start, Adjacency::four))
    throw std::invalid_argument("initial state disconnected");

  auto is_goal = [&](const std::vector<Coord>& cells) {
    return cells_path_exists(cells, grid.input, grid.output);
  };

  using State = std::vector<Coord>;
  using Entry = std::pair<std::int64_t, State>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
  std::map<State, std::int64_t> best;
  frontier.push({0, start});
  best[start] = 0;

  OracleResult result;
  bool bounded = false;
  while (!frontier.empty()) {
    auto [dist, state] = frontier.top();
    frontier.pop();
    auto it = best.find(state);
    if (it != best.end() && it->second < dist) continue;  // stale entry
    result.states_explored += 1;
    if (is_goal(state)) {
      result.motions = dist;
      return result;
    }
    if (static_cast<std::int64_t>(best.size()) > bounds.max_states) {
      bounded = true;
      break;
    }
    for (detail::CellMove& mv : detail::cell_moves(state, grid, sc.params.motion)) {
      std::int64_t ndist = dist + mv.cost;
      if (ndist > bounds.max_depth) {
        bounded = true;
        continue;
      }
      auto bit = best.find(mv.next);
      if (bit != best.end() && bit->second <= ndist) continue;
      best[mv.next] = ndist;
      frontier.push({ndist, std::move(mv.next)});
    }
  }
  (void)bounded;  // exhaustion without goal is reported as unknown either way
  return result;
}

struct GreedyResult {
  bool reached = false;
  std::int64_t motions = 0;
  std::vector<Maneuver> moves;
  Configuration final_config;
};

namespace detail {

// Greedy tie-break order: leg sequences compared E < N < S < W, shorter first.
inline std::vector<Maneuver> shapes_in_tiebreak_order(int mover) {
  std::vector<Maneuver> shapes = maneuver_shapes(mover);
  std::sort(shapes.begin(), shapes.end(),
            [](const Maneuver& a, const Maneuver& b) {
              std::size_t n = std::min(a.legs.size(), b.legs.size());
              for (std::size_t i = 0; i < n; ++i)
                if (a.legs[i] != b.legs[i])
                  return dir_rank(a.legs[i]) < dir_rank(b.legs[i]);
              return a.legs.size() < b.legs.size();
            });
  return shapes;
}

}  // namespace detail

/// Centralized comparator for the distributed heuristic: repeatedly applies
/// the legal maneuver that maximally decreases the sum of module distances to
/// the output. Ties: smaller mover id, then leg order E,N,S,W. Stops at the
/// goal or at a local minimum (reported as failure with the stalled state).
inline GreedyResult greedy_baseline(const Scenario& sc) {
  const Grid& grid = sc.grid;
  GreedyResult result;
  Configuration config = sc.initial_configuration();

  while (true) {
    if (path_exists(config, grid.input, grid.output)) {
      result.reached = true;
      break;
    }
    std::optional<Maneuver> best;
    int best_decrease = 0;
    for (const auto& [id, rec] : config.records()) {
      if (rec.pos == grid.input || rec.pos == grid.output) continue;
      for (const Maneuver& m : detail::shapes_in_tiebreak_order(id)) {
        int decrease = manhattan(rec.pos, grid.output) -
                       manhattan(maneuver_end(rec.pos, m.legs), grid.output);
        if (decrease <= best_decrease) continue;
        if (!check_maneuver(config, grid, m, sc.params.motion).ok) continue;
        best = m;
        best_decrease = decrease;
      }
    }
    if (!best) break;  // local minimum
    config = apply_maneuver(config, grid, *best, sc.params.motion);
    result.motions += static_cast<std::int64_t>(best->legs.size());
    result.moves.push_back(*best);
  }
  result.final_config = config;
  return result;
}

}  // namespace dili
