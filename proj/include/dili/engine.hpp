#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "dili/agents.hpp"
#include "dili/lattice.hpp"
#include "dili/motion.hpp"
#include "dili/network.hpp"
#include "dili/scenario.hpp"
#include "dili/trace.hpp"

namespace dili {

struct RunResult {
  std::vector<TraceEvent> trace;
  Metrics metrics;
  Configuration final_config;
};

/// Deterministic discrete-event simulation of one scenario. Events are
/// processed in strict (tick, sequence) order; identical scenario and seed
/// give byte-identical traces.
class Engine {
 public:
  explicit Engine(Scenario scenario)
      : scenario_(std::move(scenario)),
        grid_(scenario_.grid),
        params_(scenario_.params),
        rng_(scenario_.params.seed) {}

  static bool goal_monitor(const Configuration& config, Coord input,
                           Coord output) {
    return path_exists(config, input, output);
  }

  /// The physical interlock: full legality of a maneuver against the current
  /// configuration. Decisions surface in the trace as MOVE or REJECT records.
  ManeuverCheck guard_maneuver(const Maneuver& m) const {
    return check_maneuver(config_, grid_, m, params_.motion);
  }

  RunResult run() {
    config_ = scenario_.initial_configuration();
    if (!is_connected(config_, Adjacency::four))
      throw std::invalid_argument("initial configuration is not 4-connected");

    emit_header();
    form_initial_links();
    make_agents();
    pending_events_ = scenario_.events.size();

    evaluate_goal();
    if (!halted_) {
      for (std::size_t i = 0; i < scenario_.events.size(); ++i)
        push_event(make_scenario_event(scenario_.events[i].at, i));
      if (!paused_) start_agents();
    }

    while (!halted_ && !queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      if (ev.at > params_.max_ticks) {
        now_ = params_.max_ticks;
        break;
      }
      now_ = ev.at;
      dispatch(ev);
    }

    finalize();
    RunResult result;
    result.trace = std::move(trace_);
    result.metrics = metrics_;
    result.final_config = config_;
    return result;
  }

 private:
  // --- event queue -----------------------------------------------------------

  struct Event {
    std::int64_t at = 0;
    std::uint64_t seq = 0;
    enum class Kind { deliver, leg, timer, scenario } kind = Kind::timer;
    // deliver
    int src = 0, dst = 0;
    std::uint64_t link_gen = 0, msg_uid = 0;
    // leg
    std::uint64_t flight_id = 0;
    int leg_index = 0;
    // timer
    int agent_id = 0;
    // scenario
    std::size_t scenario_index = 0;

    friend bool operator>(const Event& a, const Event& b) {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  Event make_scenario_event(std::int64_t at, std::size_t index) {
    Event ev;
    ev.at = at;
    ev.kind = Event::Kind::scenario;
    ev.scenario_index = index;
    return ev;
  }

  void push_event(Event ev) {
    ev.seq = ++event_seq_;
    queue_.push(ev);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case Event::Kind::deliver: on_deliver(ev); break;
      case Event::Kind::leg: on_leg(ev); break;
      case Event::Kind::timer: on_timer(ev); break;
      case Event::Kind::scenario: on_scenario(ev); break;
    }
  }

  // --- setup -----------------------------------------------------------------

  void emit_header() {
    TraceEvent ev;
    ev.kind = TraceKind::HEADER;
    ev.kv = {
        {"grid", std::to_string(grid_.width) + "x" + std::to_string(grid_.height)},
        {"input", to_string(grid_.input)},
        {"output", to_string(grid_.output)},
        {"modules", std::to_string(scenario_.modules.size())},
        {"seed", std::to_string(params_.seed)},
        {"latency", params_.latency.format()},
        {"pitch", std::to_string(params_.motion.pitch_mm)},
        {"speed", std::to_string(params_.motion.speed_mm_s)},
        {"slide", params_.motion.slide_rule == SlideRule::single_flank
                      ? "single"
                      : "double"},
        {"round_timeout", std::to_string(params_.round_timeout)},
        {"max_ticks", std::to_string(params_.max_ticks)},
        {"logmsg", params_.log_messages ? "1" : "0"},
    };
    emit(std::move(ev));
  }

  void form_initial_links() {
    for (const auto& [id, rec] : config_.records()) {
      for (Coord d : kUnitSteps) {
        auto other = config_.id_at({rec.pos.x + d.x, rec.pos.y + d.y});
        if (other) transport_.form_link(id, *other, 0);
      }
    }
  }

  void make_agents() {
    for (const auto& [id, rec] : config_.records()) {
      AgentState st;
      st.id = id;
      st.pos = rec.pos;
      st.status = rec.status;
      st.input = grid_.input;
      st.goal = grid_.output;
      agents_.emplace(id, Agent(std::move(st)));
    }
  }

  void start_agents() {
    AgentInput input;
    input.kind = AgentInput::Kind::start;
    input.epoch_norm = 0;
    for (auto& [id, agent] : agents_) {
      if (halted_) break;
      agent_input(id, input);
    }
  }

  // --- agent plumbing --------------------------------------------------------

  AgentEnv make_env(int id) {
    AgentEnv env;
    env.now = now_;
    env.grid = &grid_;
    env.neighbors = transport_.neighbors(id);
    env.moore = sense(id);
    env.legal_self = cached_legal(id);
    env.round_timeout = params_.round_timeout;
    return env;
  }

  MooreMap sense(int id) const {
    MooreMap m;
    m.center = config_.record(id).pos;
    for (int idx = 0; idx < 9; ++idx) {
      Coord pos = m.cell_pos(idx);
      auto other = config_.id_at(pos);
      if (!other) continue;
      const ModuleRecord& rec = config_.record(*other);
      m.cells[idx] = MooreCell{true, rec.id, rec.status};
    }
    return m;
  }

  const std::vector<Maneuver>& cached_legal(int id) {
    auto& entry = legal_cache_[id];
    if (entry.first != config_version_) {
      entry.first = config_version_;
      entry.second = legal_maneuvers(config_, grid_, id, params_.motion);
    }
    return entry.second;
  }

  void agent_input(int id, const AgentInput& input) {
    if (halted_) return;
    Agent& agent = agents_.at(id);
    const ModuleRecord& rec = config_.record(id);
    agent.state.pos = rec.pos;
    agent.state.status = rec.status;
    if (rec.status == ModuleStatus::failed) return;
    std::vector<AgentAction> actions = agent.step(input, make_env(id));
    for (const AgentAction& action : actions) apply_action(id, action);
    watch_epoch(agent.state.epoch);
    arm_timer(id);
  }

  void apply_action(int id, const AgentAction& action) {
    if (halted_) return;
    if (const auto* send = std::get_if<SendAction>(&action)) {
      Message msg = send->msg;
      auto scheduled = transport_.schedule(msg, now_, params_.latency, rng_);
      if (!scheduled) return;  // link gone; local send error
      metrics_.messages_sent += 1;
      Event ev;
      ev.at = scheduled->delivery_tick;
      ev.kind = Event::Kind::deliver;
      ev.src = msg.src;
      ev.dst = msg.dst;
      ev.link_gen = scheduled->generation;
      ev.msg_uid = msg.uid;
      push_event(ev);
    } else if (const auto* exec = std::get_if<ExecuteAction>(&action)) {
      if (flight_ || !exec_queue_.empty())
        exec_queue_.push_back({id, *exec});
      else
        start_execution(id, *exec);
    } else if (const auto* elect = std::get_if<ElectNote>(&action)) {
      TraceEvent ev;
      ev.kind = TraceKind::ELECT;
      ev.kv = {{"epoch", std::to_string(elect->tag.epoch)},
               {"id", std::to_string(elect->tag.id)},
               {"score", std::to_string(elect->tag.score)},
               {"pos", to_string(elect->pos)}};
      emit(std::move(ev));
    } else if (const auto* lead = std::get_if<LeaderNote>(&action)) {
      TraceEvent ev;
      ev.kind = TraceKind::LEADER;
      ev.kv = {{"epoch", std::to_string(lead->tag.epoch)},
               {"id", std::to_string(lead->tag.id)},
               {"score", std::to_string(lead->tag.score)},
               {"pos", to_string(lead->pos)}};
      emit(std::move(ev));
    } else if (const auto* cmd = std::get_if<CmdNote>(&action)) {
      TraceEvent ev;
      ev.kind = TraceKind::CMD;
      ev.kv = {{"epoch", std::to_string(cmd->epoch)},
               {"cseq", std::to_string(cmd->cseq)},
               {"target", std::to_string(cmd->target)},
               {"addr", std::to_string(cmd->addressee)},
               {"obj", to_string(cmd->objective)}};
      emit(std::move(ev));
    } else if (const auto* round = std::get_if<RoundNote>(&action)) {
      TraceEvent ev;
      ev.kind = TraceKind::ROUND;
      ev.kv = {{"epoch", std::to_string(round->epoch)},
               {"leader", std::to_string(round->leader)},
               {"commands", std::to_string(round->commands)},
               {"moved", std::to_string(round->moved)}};
      emit(std::move(ev));
    }
  }

  // --- command execution -----------------------------------------------------

  struct QueuedExec {
    int addressee = 0;
    ExecuteAction act;
  };

  struct Flight {
    std::uint64_t id = 0;
    Maneuver m;
    std::int64_t epoch = 0;
    int cseq = 0;
    int executor = 0;
    Coord from;
    std::int64_t start = 0;
    std::int64_t leg_ticks = 0;
  };

  void start_execution(int addressee, const ExecuteAction& act) {
    if (config_.record(addressee).status == ModuleStatus::failed) return;
    if (!config_.contains(act.target)) {
      noop_done(addressee, act);
      return;
    }
    std::vector<Maneuver> candidates = improving_candidates(
        config_, grid_, act.target, act.objective, params_.motion.slide_rule);
    for (Maneuver& m : candidates) {
      ManeuverCheck check = guard_maneuver(m);
      if (!check.ok) {
        TraceEvent ev;
        ev.kind = TraceKind::REJECT;
        ev.kv = {{"epoch", std::to_string(act.epoch)},
                 {"cseq", std::to_string(act.cseq)},
                 {"id", std::to_string(m.mover)},
                 {"legs", legs_string(m.legs)},
                 {"reason", reason_name(check.reason)}};
        emit(std::move(ev));
        continue;
      }
      m.driver = check.driver;
      begin_flight(addressee, act, m);
      return;
    }
    noop_done(addressee, act);
  }

  void noop_done(int addressee, const ExecuteAction& act) {
    AgentInput input;
    input.kind = AgentInput::Kind::maneuver_done;
    input.done_epoch = act.epoch;
    input.done_cseq = act.cseq;
    input.done_moved = false;
    agent_input(addressee, input);
  }

  void begin_flight(int addressee, const ExecuteAction& act, const Maneuver& m) {
    Flight flight;
    flight.id = ++flight_seq_;
    flight.m = m;
    flight.epoch = act.epoch;
    flight.cseq = act.cseq;
    flight.executor = addressee;
    flight.from = config_.record(m.mover).pos;
    flight.start = now_;
    flight.leg_ticks = leg_duration_ticks(params_.motion);
    flight_ = flight;
    for (std::size_t leg = 0; leg < m.legs.size(); ++leg) {
      Event ev;
      ev.at = now_ + static_cast<std::int64_t>(leg + 1) * flight.leg_ticks;
      ev.kind = Event::Kind::leg;
      ev.flight_id = flight.id;
      ev.leg_index = static_cast<int>(leg);
      push_event(ev);
    }
  }

  void on_leg(const Event& ev) {
    if (!flight_ || flight_->id != ev.flight_id) return;
    Flight& flight = *flight_;
    int leg = ev.leg_index;
    Coord from = flight.from;
    for (int i = 0; i < leg; ++i) from = step(from, flight.m.legs[i]);
    Coord to = step(from, flight.m.legs[leg]);

    config_.move_module(flight.m.mover, to);
    config_version_ += 1;
    metrics_.motions += 1;
    motions_since_entry_ += 1;

    std::int64_t leg_start = flight.start + leg * flight.leg_ticks;
    std::string substeps;
    for (std::int64_t off : substep_offsets(flight.leg_ticks)) {
      if (!substeps.empty()) substeps += ",";
      substeps += std::to_string(leg_start + off);
    }
    TraceEvent rec;
    rec.kind = TraceKind::MOVE;
    rec.kv = {{"epoch", std::to_string(flight.epoch)},
              {"cseq", std::to_string(flight.cseq)},
              {"id", std::to_string(flight.m.mover)},
              {"leg", std::to_string(leg + 1)},
              {"of", std::to_string(flight.m.legs.size())},
              {"legs", legs_string(flight.m.legs)},
              {"from", to_string(from)},
              {"to", to_string(to)},
              {"start", std::to_string(leg_start)},
              {"driver", flight.m.driver ? std::to_string(*flight.m.driver) : "-"},
              {"substeps", substeps}};
    emit(std::move(rec));

    refresh_links(flight.m.mover);

    if (leg + 1 < static_cast<int>(flight.m.legs.size())) return;

    // maneuver boundary
    metrics_.maneuvers += 1;
    int executor = flight.executor;
    std::int64_t epoch = flight.epoch;
    int cseq = flight.cseq;
    flight_.reset();

    evaluate_goal();
    if (halted_) return;
    apply_deferred_injections();
    if (halted_) return;

    if (!paused_) {
      AgentInput input;
      input.kind = AgentInput::Kind::maneuver_done;
      input.done_epoch = epoch;
      input.done_cseq = cseq;
      input.done_moved = true;
      agent_input(executor, input);
    }
    pump_exec_queue();
  }

  void pump_exec_queue() {
    while (!halted_ && !paused_ && !flight_ && !exec_queue_.empty()) {
      QueuedExec next = exec_queue_.front();
      exec_queue_.pop_front();
      start_execution(next.addressee, next.act);
    }
  }

  void refresh_links(int mover) {
    Coord pos = config_.record(mover).pos;
    for (int n : transport_.neighbors(mover)) {
      if (manhattan(pos, config_.record(n).pos) == 1) continue;
      for (const Message& dropped : transport_.break_link(mover, n))
        trace_drop(dropped, DropReason::undock);
    }
    for (Coord d : kUnitSteps) {
      auto other = config_.id_at({pos.x + d.x, pos.y + d.y});
      if (other) transport_.form_link(mover, *other, now_);
    }
  }

  void trace_drop(const Message& msg, DropReason reason) {
    metrics_.messages_dropped += 1;
    TraceEvent ev;
    ev.kind = TraceKind::MSGDROP;
    ev.kv = {{"src", std::to_string(msg.src)},
             {"dst", std::to_string(msg.dst)},
             {"kind", msg_kind_name(msg.kind)},
             {"epoch", std::to_string(msg.epoch)},
             {"reason", drop_reason_name(reason)}};
    emit(std::move(ev));
  }

  // --- deliveries ------------------------------------------------------------

  void on_deliver(const Event& ev) {
    auto msg = transport_.take_delivery(ev.src, ev.dst, ev.link_gen, ev.msg_uid);
    if (!msg) return;  // link broke; drop was traced at undock
    if (config_.record(msg->dst).status == ModuleStatus::failed) {
      trace_drop(*msg, DropReason::dead_dst);
      return;
    }
    metrics_.messages_delivered += 1;
    if (params_.log_messages) {
      TraceEvent rec;
      rec.kind = TraceKind::MSG;
      rec.kv = {{"src", std::to_string(msg->src)},
                {"dst", std::to_string(msg->dst)},
                {"kind", msg_kind_name(msg->kind)},
                {"epoch", std::to_string(msg->epoch)},
                {"sent", std::to_string(msg->sent_at)}};
      emit(std::move(rec));
    }
    AgentInput input;
    input.kind = AgentInput::Kind::message;
    input.msg = *msg;
    agent_input(msg->dst, input);
  }

  // --- timers ----------------------------------------------------------------

  void arm_timer(int id) {
    if (paused_ || halted_) return;
    const Agent& agent = agents_.at(id);
    if (agent.state.status == ModuleStatus::failed) return;
    if (timer_armed_[id]) return;
    timer_armed_[id] = true;
    Event ev;
    ev.at = agent.state.last_activity + params_.round_timeout;
    if (ev.at <= now_) ev.at = now_ + 1;
    ev.kind = Event::Kind::timer;
    ev.agent_id = id;
    push_event(ev);
  }

  void on_timer(const Event& ev) {
    timer_armed_[ev.agent_id] = false;
    if (paused_) return;
    const Agent& agent = agents_.at(ev.agent_id);
    if (agent.state.status == ModuleStatus::failed) return;
    if (now_ - agent.state.last_activity < params_.round_timeout) {
      arm_timer(ev.agent_id);  // activity since arming; re-check later
      return;
    }
    AgentInput input;
    input.kind = AgentInput::Kind::timeout;
    agent_input(ev.agent_id, input);
  }

  // --- scenario events -------------------------------------------------------

  void on_scenario(const Event& ev) {
    if (flight_) {
      deferred_injections_.push_back(ev.scenario_index);
      return;  // applied at the maneuver boundary
    }
    apply_injection(scenario_.events[ev.scenario_index]);
  }

  void apply_deferred_injections() {
    while (!halted_ && !deferred_injections_.empty() && !flight_) {
      std::size_t idx = deferred_injections_.front();
      deferred_injections_.pop_front();
      apply_injection(scenario_.events[idx]);
    }
  }

  void apply_injection(const ScenarioEvent& sev) {
    pending_events_ -= 1;
    TraceEvent rec;
    rec.kind = TraceKind::EVENT;
    if (sev.kind == ScenarioEvent::Kind::set_output) {
      rec.kv = {{"kind", "set-output"},
                {"x", std::to_string(sev.pos.x)},
                {"y", std::to_string(sev.pos.y)}};
      emit(std::move(rec));
      grid_.output = sev.pos;
      goal_flag_ = false;  // fresh goal; monitor re-evaluates below
      evaluate_goal();
      if (halted_) return;
      if (goal_flag_) return;  // already satisfied; stay paused for next event
      broadcast_goal_change();
    } else {
      rec.kv = {{"kind", "fail"}, {"id", std::to_string(sev.id)}};
      emit(std::move(rec));
      if (config_.record(sev.id).status == ModuleStatus::failed) return;
      config_.set_status(sev.id, ModuleStatus::failed);
      config_version_ += 1;
      agents_.at(sev.id).state.status = ModuleStatus::failed;
      for (const Message& msg : drop_queued_to(sev.id))
        trace_drop(msg, DropReason::dead_dst);
    }
  }

  std::vector<Message> drop_queued_to(int id) {
    std::vector<Message> dropped;
    for (int n : transport_.neighbors(id)) {
      // breaking and re-forming would lose FIFO history; filter in place
      for (const Message& msg : transport_.drop_in_flight_to(id, n))
        dropped.push_back(msg);
    }
    return dropped;
  }

  void broadcast_goal_change() {
    paused_ = false;
    AgentInput input;
    input.kind = AgentInput::Kind::goal_change;
    input.new_goal = grid_.output;
    input.epoch_norm = max_epoch_entered_ + 1;
    for (auto& [id, agent] : agents_) {
      if (halted_) break;
      if (agent.state.status == ModuleStatus::failed) continue;
      agent_input(id, input);
    }
    pump_exec_queue();
  }

  // --- goal, stuck, halting --------------------------------------------------

  void evaluate_goal() {
    bool satisfied = goal_monitor(config_, grid_.input, grid_.output);
    if (!satisfied) {
      goal_flag_ = false;
      return;
    }
    if (goal_flag_) return;
    goal_flag_ = true;
    TraceEvent rec;
    rec.kind = TraceKind::GOAL;
    auto len = shortest_chain_len(config_, grid_.input, grid_.output);
    rec.kv = {{"pathlen", len ? std::to_string(*len) : "0"}};
    emit(std::move(rec));
    if (pending_events_ > 0 || !deferred_injections_.empty()) {
      pause_agents();
    } else {
      halted_ = true;
    }
  }

  void pause_agents() {
    paused_ = true;
    exec_queue_.clear();
    for (auto& [id, agent] : agents_) {
      if (agent.state.status == ModuleStatus::alive)
        agent.state.phase = AgentPhase::done;
    }
  }

  void watch_epoch(std::int64_t epoch) {
    if (epoch <= max_epoch_entered_) return;
    max_epoch_entered_ = epoch;
    int candidates = 0;
    for (const auto& [id, agent] : agents_) {
      const ModuleRecord& rec = config_.record(id);
      if (rec.status != ModuleStatus::alive) continue;
      if (rec.pos == grid_.input || rec.pos == grid_.output) continue;
      int here = manhattan(rec.pos, grid_.output);
      bool improving = false;
      for (const Maneuver& m : cached_legal(id))
        if (manhattan(maneuver_end(rec.pos, m.legs), grid_.output) < here)
          improving = true;
      if (improving) candidates += 1;
    }
    bool prev_empty = had_entry_ && prev_candidates_ == 0 &&
                      motions_since_entry_ == 0;
    strikes_ = prev_empty ? strikes_ + 1 : 0;
    prev_candidates_ = candidates;
    motions_since_entry_ = 0;
    had_entry_ = true;
    if (strikes_ >= 2) {
      TraceEvent rec;
      rec.kind = TraceKind::STUCK;
      rec.kv = {{"epoch", std::to_string(epoch)}};
      emit(std::move(rec));
      halted_ = true;
    }
  }

  void finalize() {
    metrics_.simtime_ms = now_;
    metrics_.epochs = max_epoch_entered_ + 1;
    metrics_.goal_reached = goal_monitor(config_, grid_.input, grid_.output);
    if (metrics_.goal_reached)
      metrics_.final_path_len =
          shortest_chain_len(config_, grid_.input, grid_.output);
    TraceEvent rec;
    rec.kind = TraceKind::METRICS;
    rec.kv = {{"delivered", std::to_string(metrics_.messages_delivered)},
              {"dropped", std::to_string(metrics_.messages_dropped)},
              {"epochs", std::to_string(metrics_.epochs)},
              {"goal", metrics_.goal_reached ? "true" : "false"},
              {"maneuvers", std::to_string(metrics_.maneuvers)},
              {"motions", std::to_string(metrics_.motions)},
              {"pathlen", metrics_.final_path_len
                              ? std::to_string(*metrics_.final_path_len)
                              : "none"},
              {"sent", std::to_string(metrics_.messages_sent)},
              {"simtime", std::to_string(metrics_.simtime_ms)}};
    emit(std::move(rec));
  }

  void emit(TraceEvent ev) {
    ev.at = now_;
    ev.seq = ++trace_seq_;
    trace_.push_back(std::move(ev));
  }

  // --- state -----------------------------------------------------------------

  Scenario scenario_;
  Grid grid_;
  SimParams params_;
  DeterministicRng rng_;

  Configuration config_;
  std::uint64_t config_version_ = 1;
  std::map<int, Agent> agents_;
  Transport transport_;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t event_seq_ = 0;
  std::int64_t now_ = 0;

  std::optional<Flight> flight_;
  std::uint64_t flight_seq_ = 0;
  std::deque<QueuedExec> exec_queue_;
  std::deque<std::size_t> deferred_injections_;
  std::size_t pending_events_ = 0;

  std::map<int, bool> timer_armed_;
  std::map<int, std::pair<std::uint64_t, std::vector<Maneuver>>> legal_cache_;

  bool goal_flag_ = false;
  bool paused_ = false;
  bool halted_ = false;

  std::int64_t max_epoch_entered_ = -1;
  int prev_candidates_ = 0;
  std::int64_t motions_since_entry_ = 0;
  bool had_entry_ = false;
  int strikes_ = 0;

  std::vector<TraceEvent> trace_;
  std::int64_t trace_seq_ = -1;  // HEADER gets seq 0
  Metrics metrics_;
};

}  // namespace dili
