#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <tuple>
#include <variant>
#include <vector>

#include "dili/lattice.hpp"
#include "dili/motion.hpp"
#include "dili/network.hpp"

namespace dili {

// ----------------------------------------------------------------------------
// Sensing

struct MooreCell {
  bool occupied = false;
  int id = 0;
  ModuleStatus status = ModuleStatus::alive;
};

/// 3x3 occupancy/id/status snapshot. Cells are stored row-major with the
/// north row first, west to east; index 4 is the center.
struct MooreMap {
  Coord center;
  std::array<MooreCell, 9> cells{};

  static int index(int dx, int dy) { return (1 - dy) * 3 + (dx + 1); }

  static Coord offset(int idx) { return {idx % 3 - 1, 1 - idx / 3}; }

  const MooreCell& at(int dx, int dy) const { return cells[index(dx, dy)]; }

  Coord cell_pos(int idx) const {
    Coord d = offset(idx);
    return {center.x + d.x, center.y + d.y};
  }
};

/// The leader's 3x3 planning domain; center is the leader itself.
using WindowMap = MooreMap;

// ----------------------------------------------------------------------------
// Agent state

enum class AgentPhase { idle, electing, leader, executing, done };

struct PlannedCommand {
  int target = 0;     // module expected to move
  int addressee = 0;  // module the command is sent to (a flank for failed targets)
  Coord target_pos;
};

struct RoundState {
  bool active = false;
  WindowMap window;
  std::vector<PlannedCommand> plan;
  std::size_t next = 0;
  int cseq = 0;
  int pending_cseq = -1;
  int moved = 0;
};

struct PendingExec {
  std::int64_t epoch = 0;
  int cseq = 0;
  int target = 0;
  int report_to = 0;
  bool self_command = false;
};

struct AgentState {
  int id = 0;
  Coord pos;
  ModuleStatus status = ModuleStatus::alive;
  AgentPhase phase = AgentPhase::idle;
  std::int64_t epoch = 0;

  std::optional<WaveTag> adopted;
  std::optional<int> parent;          // neighbor that delivered the adopted tag
  std::set<int> pending_acks;         // neighbors not yet counted for the tag
  std::vector<int> wave_neighbors;    // docked neighbors at adoption time
  bool echoed = false;

  Coord input;  // conveyor anchors; goal tracks the current output
  Coord goal;
  int leader_id = -1;
  std::int64_t last_activity = 0;
  MooreMap moore;

  RoundState round;
  std::optional<PendingExec> exec;

  std::uint64_t fseq = 0;
  std::set<std::tuple<int, std::int64_t, int, std::uint64_t>> seen_floods;
};

// ----------------------------------------------------------------------------
// Inputs and actions

struct AgentInput {
  enum class Kind { start, message, timeout, maneuver_done, goal_change };
  Kind kind = Kind::start;
  Message msg;                 // message
  std::int64_t done_epoch = 0;  // maneuver_done
  int done_cseq = 0;
  bool done_moved = false;
  Coord new_goal;              // goal_change
  std::int64_t epoch_norm = 0;  // start / goal_change epoch normalization
};

struct SendAction {
  Message msg;  // src filled by the agent; sent_at/uid stamped by the engine
};
struct ExecuteAction {
  std::int64_t epoch = 0;
  int cseq = 0;
  int target = 0;
  Coord objective;
  int report_to = 0;
  bool self_command = false;
};
struct ElectNote {
  WaveTag tag;
  Coord pos;
};
struct LeaderNote {
  WaveTag tag;
  Coord pos;
};
struct CmdNote {
  std::int64_t epoch = 0;
  int cseq = 0;
  int target = 0;
  int addressee = 0;
  Coord objective;
};
struct RoundNote {
  std::int64_t epoch = 0;
  int leader = 0;
  int commands = 0;
  int moved = 0;
};

using AgentAction = std::variant<SendAction, ExecuteAction, ElectNote,
                                 LeaderNote, CmdNote, RoundNote>;

struct AgentEnv {
  std::int64_t now = 0;
  const Grid* grid = nullptr;
  std::vector<int> neighbors;         // docked neighbor ids, ascending
  MooreMap moore;                     // fresh sense of the surroundings
  std::vector<Maneuver> legal_self;   // current legal maneuvers of this module
  std::int64_t round_timeout = 10000;
};

// ----------------------------------------------------------------------------
// Pure policy pieces

/// Candidacy for election: a mobile module able to strictly reduce its
/// distance to the goal. Modules on the input or output cells are anchored.
inline std::optional<WaveTag> candidate_score(const AgentState& state,
                                              const std::vector<Maneuver>& legal) {
  if (state.status == ModuleStatus::failed) return std::nullopt;
  if (state.pos == state.input || state.pos == state.goal) return std::nullopt;
  int here = manhattan(state.pos, state.goal);
  bool improving = false;
  for (const Maneuver& m : legal)
    if (manhattan(maneuver_end(state.pos, m.legs), state.goal) < here)
      improving = true;
  if (!improving) return std::nullopt;
  return WaveTag{state.epoch, -here, state.id};
}

inline int dir_rank(Dir d) {
  switch (d) {
    case Dir::E: return 0;
    case Dir::N: return 1;
    case Dir::S: return 2;
    case Dir::W: return 3;
  }
  return 4;
}

inline bool leg_on_x_axis(Dir d) { return d == Dir::E || d == Dir::W; }

/// Execution preference: maximal distance decrease, then the leg along the
/// axis with more remaining delta, then E,N,S,W order, shorter legs first.
inline bool maneuver_preferred(const Maneuver& a, const Maneuver& b, Coord pos,
                               Coord goal) {
  int here = manhattan(pos, goal);
  int da = here - manhattan(maneuver_end(pos, a.legs), goal);
  int db = here - manhattan(maneuver_end(pos, b.legs), goal);
  if (da != db) return da > db;
  int adx = std::abs(goal.x - pos.x), ady = std::abs(goal.y - pos.y);
  if (adx != ady) {
    bool ax = leg_on_x_axis(a.legs[0]), bx = leg_on_x_axis(b.legs[0]);
    if (ax != bx) return (adx > ady) ? ax : bx;
  }
  std::size_t n = std::min(a.legs.size(), b.legs.size());
  for (std::size_t i = 0; i < n; ++i)
    if (a.legs[i] != b.legs[i])
      return dir_rank(a.legs[i]) < dir_rank(b.legs[i]);
  return a.legs.size() < b.legs.size();
}

/// What a module can rule out from its own senses: cells within Chebyshev
/// distance 1 of the mover plus the grid bounds. Unknown cells are treated
/// optimistically; the engine's guard settles the rest.
inline bool locally_plausible(const Configuration& config, const Grid& grid,
                              int mover, const std::vector<Dir>& legs,
                              SlideRule rule) {
  Coord start = config.record(mover).pos;
  auto known = [&](Coord c) {
    return std::abs(c.x - start.x) <= 1 && std::abs(c.y - start.y) <= 1;
  };
  auto occupied_other = [&](Coord c) {
    auto id = config.id_at(c);
    return id && *id != mover;
  };
  Coord at = start;
  for (Dir d : legs) {
    Coord to = step(at, d);
    if (!grid.in_bounds(to)) return false;
    if (known(to) && occupied_other(to)) return false;
    // flank: some stator cell not known to be empty
    bool flank = false;
    for (Dir s : flank_dirs(d)) {
      for (Coord f : {step(at, s), step(step(at, d), s)}) {
        if (!grid.in_bounds(f)) continue;
        if (f == start) continue;  // vacated by the mover itself
        if (!known(f) || occupied_other(f)) flank = true;
      }
    }
    if (!flank) return false;
    at = to;
  }
  if (config.record(mover).status == ModuleStatus::failed &&
      !pick_driver(config, mover, legs, rule))
    return false;
  return true;
}

/// Candidate maneuvers of a module that strictly decrease its distance to
/// the objective and pass the local plausibility screen, best first.
inline std::vector<Maneuver> improving_candidates(const Configuration& config,
                                                  const Grid& grid, int mover,
                                                  Coord objective,
                                                  SlideRule rule) {
  Coord pos = config.record(mover).pos;
  int here = manhattan(pos, objective);
  std::vector<Maneuver> out;
  for (Maneuver m : maneuver_shapes(mover)) {
    if (manhattan(maneuver_end(pos, m.legs), objective) >= here) continue;
    if (!locally_plausible(config, grid, mover, m.legs, rule)) continue;
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [&](const Maneuver& a, const Maneuver& b) {
    return maneuver_preferred(a, b, pos, objective);
  });
  return out;
}

/// Builds the leader's 3x3 window from its Moore sense.
inline WindowMap assemble_window(const AgentState& state) {
  return state.moore;
}

/// Plans one round over the window: cells in row-major order (north row
/// first, west to east), one command per occupied cell. Failed modules are
/// commanded through a live 4-adjacent in-window flank when an unused one
/// exists; anchored modules are skipped. No module is addressed twice.
inline std::vector<PlannedCommand> plan_round(const WindowMap& window,
                                              Coord goal, Coord input) {
  std::vector<PlannedCommand> plan;
  std::set<int> used;
  auto anchored = [&](Coord c) { return c == input || c == goal; };
  for (int idx = 0; idx < 9; ++idx) {
    const MooreCell& cell = window.cells[idx];
    if (!cell.occupied) continue;
    Coord pos = window.cell_pos(idx);
    if (anchored(pos)) continue;
    if (cell.status == ModuleStatus::alive) {
      if (used.count(cell.id)) continue;
      plan.push_back({cell.id, cell.id, pos});
      used.insert(cell.id);
    } else {
      std::optional<int> flank;
      for (int j = 0; j < 9; ++j) {
        const MooreCell& fc = window.cells[j];
        if (!fc.occupied || fc.status != ModuleStatus::alive) continue;
        Coord fpos = window.cell_pos(j);
        if (manhattan(fpos, pos) != 1 || anchored(fpos)) continue;
        if (used.count(fc.id)) continue;
        if (!flank || fc.id < *flank) flank = fc.id;
      }
      if (!flank) continue;
      plan.push_back({cell.id, *flank, pos});
      used.insert(*flank);
    }
  }
  return plan;
}

// ----------------------------------------------------------------------------
// The per-module state machine

class Agent {
 public:
  AgentState state;

  explicit Agent(AgentState s) : state(std::move(s)) {}

  std::vector<AgentAction> step(const AgentInput& input, const AgentEnv& env) {
    actions_.clear();
    if (state.status == ModuleStatus::failed) return std::move(actions_);
    state.moore = env.moore;
    switch (input.kind) {
      case AgentInput::Kind::start:
        state.last_activity = env.now;
        if (state.phase == AgentPhase::done) state.phase = AgentPhase::idle;
        enter_epoch(std::max(state.epoch, input.epoch_norm), std::nullopt, -1, env);
        break;
      case AgentInput::Kind::goal_change:
        state.last_activity = env.now;
        state.goal = input.new_goal;
        if (state.phase == AgentPhase::done) state.phase = AgentPhase::idle;
        enter_epoch(std::max(state.epoch, input.epoch_norm), std::nullopt, -1, env);
        break;
      case AgentInput::Kind::timeout:
        on_timeout(env);
        break;
      case AgentInput::Kind::maneuver_done:
        state.last_activity = env.now;
        on_maneuver_done(input, env);
        break;
      case AgentInput::Kind::message:
        if (state.phase == AgentPhase::done) break;  // paused; ignore traffic
        state.last_activity = env.now;
        on_message(input.msg, env);
        break;
    }
    return std::move(actions_);
  }

  /// Liveness fallback: a module with no election or round traffic for a
  /// full round_timeout bumps the epoch and re-evaluates its candidacy.
  void on_timeout(const AgentEnv& env) {
    if (state.phase == AgentPhase::done) return;
    if (env.now - state.last_activity < env.round_timeout) return;
    state.last_activity = env.now;
    enter_epoch(state.epoch + 1, std::nullopt, -1, env);
  }

 private:
  std::vector<AgentAction> actions_;

  // --- election: wave extinction with echo --------------------------------

  void enter_epoch(std::int64_t epoch, std::optional<WaveTag> incoming,
                   int from, const AgentEnv& env) {
    state.epoch = epoch;
    state.adopted.reset();
    state.parent.reset();
    state.pending_acks.clear();
    state.wave_neighbors.clear();
    state.echoed = false;
    state.leader_id = -1;
    state.round = RoundState{};
    prune_floods();

    std::optional<WaveTag> own = candidate_score(state, env.legal_self);
    if (own) own->epoch = epoch;
    if (own && (!incoming || beats(*own, *incoming))) {
      actions_.push_back(ElectNote{*own, state.pos});
      adopt(*own, -1, env);
    } else if (incoming) {
      adopt(*incoming, from, env);
    } else {
      state.phase = AgentPhase::idle;
    }
  }

  void adopt(const WaveTag& tag, int from, const AgentEnv& env) {
    state.adopted = tag;
    state.parent = from >= 0 ? std::optional<int>(from) : std::nullopt;
    state.wave_neighbors = env.neighbors;
    state.pending_acks.clear();
    for (int n : state.wave_neighbors)
      if (!state.parent || n != *state.parent) state.pending_acks.insert(n);
    state.echoed = false;
    state.phase = AgentPhase::electing;
    for (int n : state.pending_acks) send_tag(MsgKind::WAVE, n, tag);
    check_wave_complete(env);
  }

  void count_ack(int from, const AgentEnv& env) {
    state.pending_acks.erase(from);
    check_wave_complete(env);
  }

  void check_wave_complete(const AgentEnv& env) {
    if (!state.adopted || state.echoed || !state.pending_acks.empty()) return;
    if (state.parent) {
      send_tag(MsgKind::ECHO, *state.parent, *state.adopted);
      state.echoed = true;
      state.phase = AgentPhase::idle;
    } else if (state.adopted->id == state.id) {
      state.echoed = true;
      declare_leader(env);
    }
  }

  void on_wave(const Message& msg, const AgentEnv& env) {
    const WaveTag& tag = msg.tag;
    if (tag.epoch < state.epoch) return;  // stale wave, extinct
    if (tag.epoch > state.epoch) {
      enter_epoch(tag.epoch, tag, msg.src, env);
      return;
    }
    if (!state.adopted || beats(tag, *state.adopted)) {
      adopt(tag, msg.src, env);
    } else if (tag == *state.adopted) {
      count_ack(msg.src, env);
    }
    // tags smaller than the adopted one are swallowed
  }

  void on_echo(const Message& msg, const AgentEnv& env) {
    if (msg.tag.epoch != state.epoch) return;
    if (!state.adopted || msg.tag != *state.adopted) return;
    count_ack(msg.src, env);
  }

  // --- leader round --------------------------------------------------------

  void declare_leader(const AgentEnv& env) {
    state.phase = AgentPhase::leader;
    state.leader_id = state.id;
    actions_.push_back(LeaderNote{*state.adopted, state.pos});
    state.round = RoundState{};
    state.round.active = true;
    state.round.window = assemble_window(state);
    state.round.plan = plan_round(state.round.window, state.goal, state.input);
    flood(make_leader_ann(), env);
    issue_next(env);
  }

  void issue_next(const AgentEnv& env) {
    RoundState& r = state.round;
    if (!r.active) return;
    if (r.next >= r.plan.size()) {
      r.active = false;
      actions_.push_back(RoundNote{state.epoch, state.id,
                                   static_cast<int>(r.plan.size()), r.moved});
      Message msg;
      msg.kind = MsgKind::ROUND_DONE;
      msg.epoch = state.epoch + 1;
      flood(msg, env);
      enter_epoch(state.epoch + 1, std::nullopt, -1, env);
      return;
    }
    const PlannedCommand& cmd = r.plan[r.next];
    r.cseq += 1;
    r.pending_cseq = r.cseq;
    actions_.push_back(
        CmdNote{state.epoch, r.cseq, cmd.target, cmd.addressee, state.goal});
    if (cmd.addressee == state.id) {
      actions_.push_back(ExecuteAction{state.epoch, r.cseq, cmd.target,
                                       state.goal, state.id, true});
    } else {
      Message msg;
      msg.kind = MsgKind::MOVE_CMD;
      msg.epoch = state.epoch;
      msg.cmd = MoveCommand{state.epoch, r.cseq, cmd.target, state.goal,
                            cmd.addressee == cmd.target
                                ? std::nullopt
                                : std::optional<int>(cmd.addressee)};
      msg.flood.addressee = cmd.addressee;
      msg.flood.ttl = 3;
      flood(msg, env);
    }
  }

  void on_cmd_progress(bool moved, const AgentEnv& env) {
    RoundState& r = state.round;
    if (!r.active) return;
    r.moved += moved ? 1 : 0;
    r.next += 1;
    flood(make_leader_ann(), env);  // round keepalive
    issue_next(env);
  }

  Message make_leader_ann() {
    Message msg;
    msg.kind = MsgKind::LEADER_ANN;
    msg.epoch = state.epoch;
    msg.leader_id = state.id;
    return msg;
  }

  // --- command execution ----------------------------------------------------

  void on_move_cmd(const Message& msg) {
    const MoveCommand& cmd = msg.cmd;
    if (cmd.epoch < state.epoch) return;  // stale command
    if (cmd.epoch > state.epoch) follow_epoch(cmd.epoch, msg.flood.origin);
    state.leader_id = msg.flood.origin;
    if (state.exec) return;  // already busy; leader will time out if needed
    state.phase = AgentPhase::executing;
    state.exec = PendingExec{cmd.epoch, cmd.seq, cmd.target, msg.flood.origin,
                             false};
    actions_.push_back(ExecuteAction{cmd.epoch, cmd.seq, cmd.target,
                                     cmd.objective, msg.flood.origin, false});
  }

  void on_maneuver_done(const AgentInput& input, const AgentEnv& env) {
    if (state.phase == AgentPhase::leader && state.round.active &&
        input.done_cseq == state.round.pending_cseq &&
        input.done_epoch == state.epoch) {
      on_cmd_progress(input.done_moved, env);
      return;
    }
    if (!state.exec || input.done_cseq != state.exec->cseq) return;
    PendingExec exec = *state.exec;
    state.exec.reset();
    if (state.phase == AgentPhase::executing) state.phase = AgentPhase::idle;
    Message msg;
    msg.kind = MsgKind::CMD_DONE;
    msg.epoch = exec.epoch;
    msg.done = CmdDone{exec.epoch, exec.cseq, exec.target, input.done_moved};
    msg.flood.addressee = exec.report_to;
    msg.flood.ttl = 3;
    flood(msg, env);
  }

  void on_cmd_done(const Message& msg, const AgentEnv& env) {
    if (msg.done.epoch != state.epoch) return;
    if (state.phase != AgentPhase::leader || !state.round.active) return;
    if (msg.done.seq != state.round.pending_cseq) return;
    on_cmd_progress(msg.done.moved, env);
  }

  // --- message dispatch, flooding -------------------------------------------

  void follow_epoch(std::int64_t epoch, int leader) {
    state.epoch = epoch;
    state.adopted.reset();
    state.parent.reset();
    state.pending_acks.clear();
    state.wave_neighbors.clear();
    state.echoed = false;
    state.leader_id = leader;
    state.round = RoundState{};
    if (state.phase != AgentPhase::executing) state.phase = AgentPhase::idle;
    prune_floods();
  }

  void on_message(const Message& msg, const AgentEnv& env) {
    switch (msg.kind) {
      case MsgKind::WAVE:
        on_wave(msg, env);
        return;
      case MsgKind::ECHO:
        on_echo(msg, env);
        return;
      case MsgKind::NEW_GOAL:
        state.goal = msg.goal;  // operator broadcasts arrive as goal_change
        return;
      default:
        break;
    }
    // flooded kinds
    auto key = std::make_tuple(static_cast<int>(msg.kind), msg.epoch,
                               msg.flood.origin, msg.flood.fseq);
    if (state.seen_floods.count(key)) return;
    state.seen_floods.insert(key);
    if (msg.flood.ttl == kNoTtl || msg.flood.ttl > 1) {
      Message relay = msg;
      if (relay.flood.ttl != kNoTtl) relay.flood.ttl -= 1;
      for (int n : env.neighbors) {
        if (n == msg.src) continue;
        relay.dst = n;
        send(relay);
      }
    }
    switch (msg.kind) {
      case MsgKind::LEADER_ANN:
        if (msg.epoch > state.epoch)
          follow_epoch(msg.epoch, msg.leader_id);
        else if (msg.epoch == state.epoch && state.phase != AgentPhase::leader)
          state.leader_id = msg.leader_id;
        break;
      case MsgKind::ROUND_DONE:
        if (msg.epoch > state.epoch)
          enter_epoch(msg.epoch, std::nullopt, -1, env);
        break;
      case MsgKind::MOVE_CMD:
        if (msg.flood.addressee == state.id) on_move_cmd(msg, env);
        break;
      case MsgKind::CMD_DONE:
        if (msg.flood.addressee == state.id) on_cmd_done(msg, env);
        break;
      default:
        break;
    }
  }

  void send_tag(MsgKind kind, int dst, const WaveTag& tag) {
    Message msg;
    msg.kind = kind;
    msg.epoch = tag.epoch;
    msg.tag = tag;
    msg.dst = dst;
    send(msg);
  }

  void send(Message msg) {
    msg.src = state.id;
    actions_.push_back(SendAction{msg});
  }

  /// Floods a message to every docked neighbor with fresh flood identity and
  /// remembers it so our own relays are suppressed.
  void flood(Message msg, const AgentEnv& env) {
    msg.flood.origin = state.id;
    msg.flood.fseq = ++state.fseq;
    if (msg.kind == MsgKind::LEADER_ANN || msg.kind == MsgKind::ROUND_DONE)
      msg.flood.ttl = kNoTtl;
    state.seen_floods.insert(std::make_tuple(
        static_cast<int>(msg.kind), msg.epoch, msg.flood.origin, msg.flood.fseq));
    for (int n : env.neighbors) {
      msg.dst = n;
      send(msg);
    }
  }

  void prune_floods() {
    for (auto it = state.seen_floods.begin(); it != state.seen_floods.end();) {
      if (std::get<1>(*it) < state.epoch - 1)
        it = state.seen_floods.erase(it);
      else
        ++it;
    }
  }
};

}  // namespace dili
