#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dili/lattice.hpp"
#include "dili/scenario.hpp"
#include "dili/trace.hpp"

namespace dili {

struct RenderOverlay {
  std::optional<int> leader;
};

/// One ASCII frame, north row first. Glyph precedence: L > X > # > I > O.
inline std::string render_ascii(const Grid& grid, const Configuration& config,
                                const RenderOverlay& overlay = {}) {
  std::ostringstream out;
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) {
      Coord c{x, y};
      char glyph = '.';
      if (c == grid.input) glyph = 'I';
      if (c == grid.output) glyph = 'O';
      auto id = config.id_at(c);
      if (id) {
        const ModuleRecord& rec = config.record(*id);
        glyph = rec.status == ModuleStatus::failed ? 'X' : '#';
        if (overlay.leader && *overlay.leader == *id) glyph = 'L';
      }
      out << glyph;
    }
    out << "\n";
  }
  return out.str();
}

namespace detail {

inline std::string svg_frame(const Grid& grid, const Configuration& config,
                             const RenderOverlay& overlay, int frame_index,
                             int cell) {
  std::ostringstream out;
  int oy = frame_index * (grid.height + 1) * cell;
  out << "<g transform=\"translate(0," << oy << ")\">\n";
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      Coord c{x, y};
      int px = x * cell;
      int py = (grid.height - 1 - y) * cell;
      std::string fill = "#ffffff";
      auto id = config.id_at(c);
      if (id) {
        const ModuleRecord& rec = config.record(*id);
        fill = rec.status == ModuleStatus::failed ? "#d06060" : "#606060";
        if (overlay.leader && *overlay.leader == *id) fill = "#e0b040";
      } else if (c == grid.input) {
        fill = "#c0e0ff";
      } else if (c == grid.output) {
        fill = "#c0ffc0";
      }
      out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << fill
          << "\" stroke=\"#b0b0b0\"/>\n";
    }
  }
  out << "</g>\n";
  return out.str();
}

}  // namespace detail

/// Replays the trace and renders one frame per committed maneuver (plus the
/// initial and final states). every=K keeps the initial frame and then every
/// K-th maneuver.
inline std::string render_trace_frames(const Scenario& sc,
                                       const std::vector<TraceEvent>& trace,
                                       int every = 1, bool svg = false) {
  Grid grid = sc.grid;
  Configuration config = sc.initial_configuration();
  RenderOverlay overlay;

  struct Frame {
    std::string body;
    std::int64_t at = 0;
    std::int64_t maneuver = 0;
  };
  std::vector<Frame> frames;
  int frame_count = 0;
  std::int64_t maneuvers = 0;
  const int cell = 14;

  auto snap = [&](std::int64_t at) {
    if (svg)
      frames.push_back(
          {detail::svg_frame(grid, config, overlay, frame_count, cell), at,
           maneuvers});
    else
      frames.push_back({render_ascii(grid, config, overlay), at, maneuvers});
    frame_count += 1;
  };

  snap(0);
  for (const TraceEvent& ev : trace) {
    switch (ev.kind) {
      case TraceKind::LEADER:
        overlay.leader = static_cast<int>(ev.get_int("id"));
        break;
      case TraceKind::MOVE: {
        int id = static_cast<int>(ev.get_int("id"));
        config.move_module(id, ev.get_coord("to"));
        if (ev.get_int("leg") == ev.get_int("of")) {
          maneuvers += 1;
          if (every <= 1 || maneuvers % every == 0) snap(ev.at);
        }
        break;
      }
      case TraceKind::EVENT: {
        auto kind = ev.get("kind");
        if (kind && *kind == "set-output")
          grid.output = {static_cast<int>(ev.get_int("x")),
                         static_cast<int>(ev.get_int("y"))};
        if (kind && *kind == "fail")
          config.set_status(static_cast<int>(ev.get_int("id")),
                            ModuleStatus::failed);
        break;
      }
      case TraceKind::METRICS:
        if (frames.empty() || frames.back().maneuver != maneuvers ||
            frames.back().at != ev.at)
          snap(ev.at);
        break;
      default:
        break;
    }
  }

  std::ostringstream out;
  if (svg) {
    int width = grid.width * cell;
    int height = static_cast<int>(frames.size()) * (grid.height + 1) * cell;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    for (const Frame& f : frames) out << f.body;
    out << "</svg>\n";
  } else {
    for (const Frame& f : frames) {
      out << "t=" << f.at << " maneuver=" << f.maneuver << "\n"
          << f.body << "\n";
    }
  }
  return out.str();
}

}  // namespace dili
