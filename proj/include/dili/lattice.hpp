#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dili {

struct Coord {
  int x = 0;
  int y = 0;

  friend bool operator==(Coord a, Coord b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(Coord a, Coord b) { return !(a == b); }
  friend bool operator<(Coord a, Coord b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  }
};

inline std::string to_string(Coord c) {
  return std::to_string(c.x) + "," + std::to_string(c.y);
}

struct Grid {
  int width = 1;
  int height = 1;
  Coord input;
  Coord output;

  bool in_bounds(Coord c) const {
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
  }
};

enum class ModuleStatus { alive, failed };

struct ModuleRecord {
  int id = 0;
  Coord pos;
  ModuleStatus status = ModuleStatus::alive;

  friend bool operator==(const ModuleRecord& a, const ModuleRecord& b) {
    return a.id == b.id && a.pos == b.pos && a.status == b.status;
  }
};

/// The global physical state: a set of modules with distinct cells.
/// Iteration is always in ascending id order.
class Configuration {
 public:
  void add(const ModuleRecord& rec) {
    if (by_id_.count(rec.id))
      throw std::invalid_argument("duplicate module id " + std::to_string(rec.id));
    if (by_pos_.count(rec.pos))
      throw std::invalid_argument("duplicate module position " + to_string(rec.pos));
    by_id_[rec.id] = rec;
    by_pos_[rec.pos] = rec.id;
  }

  bool contains(int id) const { return by_id_.count(id) != 0; }
  bool occupied(Coord c) const { return by_pos_.count(c) != 0; }

  std::optional<int> id_at(Coord c) const {
    auto it = by_pos_.find(c);
    if (it == by_pos_.end()) return std::nullopt;
    return it->second;
  }

  const ModuleRecord& record(int id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::out_of_range("unknown module id " + std::to_string(id));
    return it->second;
  }

  void move_module(int id, Coord to) {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::out_of_range("unknown module id " + std::to_string(id));
    if (by_pos_.count(to))
      throw std::invalid_argument("destination occupied " + to_string(to));
    by_pos_.erase(it->second.pos);
    it->second.pos = to;
    by_pos_[to] = id;
  }

  void set_status(int id, ModuleStatus s) {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::out_of_range("unknown module id " + std::to_string(id));
    it->second.status = s;
  }

  std::size_t size() const { return by_id_.size(); }
  bool empty() const { return by_id_.empty(); }

  const std::map<int, ModuleRecord>& records() const { return by_id_; }

  std::vector<Coord> cells() const {
    std::vector<Coord> out;
    out.reserve(by_pos_.size());
    for (const auto& [pos, id] : by_pos_) out.push_back(pos);
    return out;  // sorted: map key order
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.by_id_ == b.by_id_;
  }

 private:
  std::map<int, ModuleRecord> by_id_;
  std::map<Coord, int> by_pos_;
};

enum class Adjacency { four, eight };

inline int manhattan(Coord a, Coord b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

// Canonical direction order E, N, S, W; used everywhere a scan order matters.
inline constexpr Coord kUnitSteps[4] = {{1, 0}, {0, 1}, {0, -1}, {-1, 0}};

inline std::vector<Coord> neighbors4(const Grid& grid, Coord c) {
  if (!grid.in_bounds(c))
    throw std::out_of_range("cell out of bounds " + to_string(c));
  std::vector<Coord> out;
  for (Coord d : kUnitSteps) {
    Coord n{c.x + d.x, c.y + d.y};
    if (grid.in_bounds(n)) out.push_back(n);
  }
  return out;
}

/// Connectivity of a plain cell set. Empty sets and singletons count as
/// connected.
inline bool cells_connected(const std::vector<Coord>& cells, Adjacency adj) {
  if (cells.size() <= 1) return true;
  std::vector<Coord> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  auto occupied = [&](Coord c) {
    return std::binary_search(sorted.begin(), sorted.end(), c);
  };
  std::vector<Coord> stack{sorted.front()};
  std::vector<Coord> seen{sorted.front()};
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        if (dx == 0 && dy == 0) continue;
        if (adj == Adjacency::four && dx != 0 && dy != 0) continue;
        Coord n{c.x + dx, c.y + dy};
        if (!occupied(n)) continue;
        if (std::binary_search(seen.begin(), seen.end(), n)) continue;
        seen.insert(std::lower_bound(seen.begin(), seen.end(), n), n);
        stack.push_back(n);
      }
    }
  }
  return seen.size() == sorted.size();
}

inline bool is_connected(const Configuration& config, Adjacency adj) {
  return cells_connected(config.cells(), adj);
}

/// True iff removing the module's cell 4-disconnects the remaining cells.
inline bool is_cut_module(const Configuration& config, int id) {
  Coord gone = config.record(id).pos;
  std::vector<Coord> rest;
  for (Coord c : config.cells())
    if (c != gone) rest.push_back(c);
  return !cells_connected(rest, Adjacency::four);
}

inline bool cells_path_exists(const std::vector<Coord>& cells, Coord a, Coord b) {
  std::vector<Coord> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  auto occupied = [&](Coord c) {
    return std::binary_search(sorted.begin(), sorted.end(), c);
  };
  if (!occupied(a) || !occupied(b)) return false;
  if (a == b) return true;
  std::vector<Coord> stack{a};
  std::vector<Coord> seen{a};
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    for (Coord d : kUnitSteps) {
      Coord n{c.x + d.x, c.y + d.y};
      if (!occupied(n)) continue;
      if (n == b) return true;
      auto it = std::lower_bound(seen.begin(), seen.end(), n);
      if (it != seen.end() && *it == n) continue;
      seen.insert(it, n);
      stack.push_back(n);
    }
  }
  return false;
}

/// True iff a and b are both occupied and joined by a chain of 4-adjacent
/// occupied cells.
inline bool path_exists(const Configuration& config, Coord a, Coord b) {
  return cells_path_exists(config.cells(), a, b);
}

/// Length in cells of the shortest occupied 4-connected chain from a to b,
/// or nullopt when no such chain exists.
inline std::optional<int> shortest_chain_len(const Configuration& config,
                                             Coord a, Coord b) {
  std::vector<Coord> sorted = config.cells();
  auto occupied = [&](Coord c) {
    return std::binary_search(sorted.begin(), sorted.end(), c);
  };
  if (!occupied(a) || !occupied(b)) return std::nullopt;
  if (a == b) return 1;
  std::map<Coord, int> dist;
  dist[a] = 1;
  std::vector<Coord> frontier{a};
  while (!frontier.empty()) {
    std::vector<Coord> next;
    for (Coord c : frontier) {
      for (Coord d : kUnitSteps) {
        Coord n{c.x + d.x, c.y + d.y};
        if (!occupied(n) || dist.count(n)) continue;
        dist[n] = dist[c] + 1;
        if (n == b) return dist[n];
        next.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

/// Deterministic Manhattan path from input to output: x first, then y.
inline std::vector<Coord> target_path(Coord input, Coord output) {
  std::vector<Coord> path{input};
  Coord cur = input;
  int sx = output.x > cur.x ? 1 : -1;
  while (cur.x != output.x) {
    cur.x += sx;
    path.push_back(cur);
  }
  int sy = output.y > cur.y ? 1 : -1;
  while (cur.y != output.y) {
    cur.y += sy;
    path.push_back(cur);
  }
  return path;
}

}  // namespace dili
