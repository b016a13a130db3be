#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dili/engine.hpp"
#include "dili/lattice.hpp"
#include "dili/motion.hpp"
#include "dili/scenario.hpp"
#include "dili/trace.hpp"

namespace dili {

struct VerifyCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;

  bool pass() const {
    for (const VerifyCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }

  std::string format() const {
    std::ostringstream out;
    for (const VerifyCheck& c : checks) {
      out << (c.pass ? "[ok]   " : "[FAIL] ") << c.name;
      if (!c.pass) out << ": " << c.detail;
      out << "\n";
    }
    out << (pass() ? "verify: PASS" : "verify: FAIL") << "\n";
    return out.str();
  }
};

namespace detail {

/// Replays a trace against its scenario and re-checks every invariant the
/// engine is supposed to maintain.
class TraceVerifier {
 public:
  TraceVerifier(const Scenario& sc, const std::vector<TraceEvent>& trace)
      : sc_(sc), trace_(trace) {
    static const char* kNames[] = {
        "structure", "header",  "legality", "connectivity", "serialization",
        "timing",     "progress", "election", "window",      "epochs",
        "messages",   "events",  "goal",     "metrics"};
    for (const char* name : kNames) order_.push_back(name);
  }

  VerifyReport run() {
    config_ = sc_.initial_configuration();
    grid_ = sc_.grid;
    params_ = sc_.params;
    leg_ticks_ = leg_duration_ticks(params_.motion);

    if (trace_.empty()) {
      fail("structure", "empty trace");
      return report();
    }
    if (trace_.front().kind != TraceKind::HEADER)
      fail("structure", "first record is not HEADER");
    if (trace_.back().kind != TraceKind::METRICS)
      fail("structure", "last record is not METRICS");

    for (std::size_t i = 0; i < trace_.size(); ++i) {
      const TraceEvent& ev = trace_[i];
      try {
        process(ev, i);
      } catch (const std::exception& e) {
        fail("legality", where(ev) + ": " + e.what());
        break;
      }
    }
    if (!saw_metrics_) fail("structure", "missing METRICS record");
    return report();
  }

 private:
  static std::string where(const TraceEvent& ev) {
    return std::string(trace_kind_name(ev.kind)) + " record at=" +
           std::to_string(ev.at) + " seq=" + std::to_string(ev.seq);
  }

  void fail(const std::string& name, const std::string& detail) {
    if (!failures_.count(name)) failures_[name] = detail;
  }

  VerifyReport report() const {
    VerifyReport rep;
    for (const std::string& name : order_) {
      auto it = failures_.find(name);
      if (it == failures_.end())
        rep.checks.push_back({name, true, ""});
      else
        rep.checks.push_back({name, false, it->second});
    }
    return rep;
  }

  // --- helpers ---------------------------------------------------------------

  bool anchored(Coord pos) const {
    return pos == grid_.input || pos == grid_.output;
  }

  bool central_candidate(int id) const {
    const ModuleRecord& rec = config_.record(id);
    if (rec.status != ModuleStatus::alive || anchored(rec.pos)) return false;
    int here = manhattan(rec.pos, grid_.output);
    for (const Maneuver& m : legal_maneuvers(config_, grid_, id, params_.motion))
      if (manhattan(maneuver_end(rec.pos, m.legs), grid_.output) < here)
        return true;
    return false;
  }

  std::optional<WaveTag> central_argmax() const {
    std::optional<WaveTag> best;
    for (const auto& [id, rec] : config_.records()) {
      if (!central_candidate(id)) continue;
      WaveTag tag{0, -manhattan(rec.pos, grid_.output), id};
      if (!best || beats(tag, *best)) best = tag;
    }
    return best;
  }

  void scan_epoch(const TraceEvent& ev) {
    std::int64_t epoch = ev.get_int("epoch");
    if (epoch < last_scan_epoch_)
      fail("epochs", where(ev) + ": epoch " + std::to_string(epoch) +
                         " after epoch " + std::to_string(last_scan_epoch_));
    last_scan_epoch_ = std::max(last_scan_epoch_, epoch);
  }

  // --- record handlers -------------------------------------------------------

  void process(const TraceEvent& ev, std::size_t index) {
    switch (ev.kind) {
      case TraceKind::HEADER: on_header(ev, index); break;
      case TraceKind::ELECT: on_elect(ev); break;
      case TraceKind::LEADER: on_leader(ev); break;
      case TraceKind::CMD: on_cmd(ev); break;
      case TraceKind::MOVE: on_move(ev); break;
      case TraceKind::REJECT: scan_epoch(ev); break;
      case TraceKind::ROUND: on_round(ev); break;
      case TraceKind::MSG: on_msg(ev); break;
      case TraceKind::MSGDROP: drop_records_ += 1; break;
      case TraceKind::EVENT: on_event(ev); break;
      case TraceKind::GOAL: on_goal(ev); break;
      case TraceKind::STUCK: break;
      case TraceKind::METRICS: on_metrics(ev, index); break;
    }
  }

  void on_header(const TraceEvent& ev, std::size_t index) {
    if (index != 0) {
      fail("structure", "HEADER not first");
      return;
    }
    auto expect = [&](const std::string& key, const std::string& want) {
      auto got = ev.get(key);
      if (!got || *got != want)
        fail("header", "header " + key + "='" + (got ? *got : "") +
                           "', scenario says '" + want + "'");
    };
    expect("grid", std::to_string(sc_.grid.width) + "x" +
                       std::to_string(sc_.grid.height));
    expect("input", to_string(sc_.grid.input));
    expect("output", to_string(sc_.grid.output));
    expect("modules", std::to_string(sc_.modules.size()));
    expect("latency", sc_.params.latency.format());
    expect("pitch", std::to_string(sc_.params.motion.pitch_mm));
    expect("speed", std::to_string(sc_.params.motion.speed_mm_s));
    expect("slide", sc_.params.motion.slide_rule == SlideRule::single_flank
                        ? "single"
                        : "double");
    expect("round_timeout", std::to_string(sc_.params.round_timeout));
    // seed and max_ticks may be overridden on the command line
    auto logmsg = ev.get("logmsg");
    log_messages_ = logmsg && *logmsg == "1";
  }

  void on_elect(const TraceEvent& ev) {
    scan_epoch(ev);
    int id = static_cast<int>(ev.get_int("id"));
    if (!config_.contains(id)) {
      fail("election", where(ev) + ": unknown module");
      return;
    }
    const ModuleRecord& rec = config_.record(id);
    if (ev.get_coord("pos") != rec.pos)
      fail("election", where(ev) + ": pos does not match configuration");
    if (!central_candidate(id))
      fail("election", where(ev) + ": module " + std::to_string(id) +
                           " is not a candidate centrally");
    if (ev.get_int("score") != -manhattan(rec.pos, grid_.output))
      fail("election", where(ev) + ": score mismatch");
  }

  void on_leader(const TraceEvent& ev) {
    scan_epoch(ev);
    std::int64_t epoch = ev.get_int("epoch");
    int id = static_cast<int>(ev.get_int("id"));
    int score = static_cast<int>(ev.get_int("score"));
    if (leaders_.count(epoch)) {
      fail("election",
           where(ev) + ": second LEADER in epoch " + std::to_string(epoch));
      return;
    }
    leaders_[epoch] = {id, ev.get_coord("pos")};
    auto expected = central_argmax();
    if (!expected) {
      fail("election", where(ev) + ": leader declared with no central candidate");
      return;
    }
    if (expected->id != id || expected->score != score)
      fail("election",
           where(ev) + ": leader (" + std::to_string(score) + "," +
               std::to_string(id) + ") but central argmax is (" +
               std::to_string(expected->score) + "," +
               std::to_string(expected->id) + ")");
    if (config_.contains(id) && config_.record(id).pos != ev.get_coord("pos"))
      fail("election", where(ev) + ": pos does not match configuration");
  }

  void on_cmd(const TraceEvent& ev) {
    scan_epoch(ev);
    std::int64_t epoch = ev.get_int("epoch");
    int cseq = static_cast<int>(ev.get_int("cseq"));
    int target = static_cast<int>(ev.get_int("target"));
    int addr = static_cast<int>(ev.get_int("addr"));
    Coord obj = ev.get_coord("obj");

    auto lit = leaders_.find(epoch);
    if (lit == leaders_.end()) {
      fail("window", where(ev) + ": command without a leader in epoch " +
                         std::to_string(epoch));
      return;
    }
    Coord center = lit->second.second;
    auto in_window = [&](Coord p) {
      return std::abs(p.x - center.x) <= 1 && std::abs(p.y - center.y) <= 1;
    };
    if (!config_.contains(target) || !config_.contains(addr)) {
      fail("window", where(ev) + ": unknown module in command");
      return;
    }
    if (!in_window(config_.record(target).pos) &&
        !in_window(config_.record(addr).pos))
      fail("window", where(ev) + ": neither target nor addressee in the window");
    if (obj != grid_.output)
      fail("window", where(ev) + ": objective is not the goal in force");
    auto& addrs = epoch_addressees_[epoch];
    if (addrs.count(addr))
      fail("window", where(ev) + ": addressee " + std::to_string(addr) +
                         " commanded twice in epoch " + std::to_string(epoch));
    addrs.insert(addr);
    if (static_cast<int>(addrs.size()) > 9)
      fail("window", where(ev) + ": more than 9 commands in one epoch");
    cmds_[{epoch, cseq}] = CmdInfo{target, addr, obj};
  }

  struct CmdInfo {
    int target = 0;
    int addr = 0;
    Coord obj;
  };

  struct ActiveManeuver {
    std::int64_t epoch = 0;
    int cseq = 0;
    int id = 0;
    std::vector<Dir> legs;
    std::optional<int> driver;
    Coord start_pos;
    std::int64_t start_tick = 0;
    int next_leg = 1;
  };

  void on_move(const TraceEvent& ev) {
    scan_epoch(ev);
    std::int64_t epoch = ev.get_int("epoch");
    int cseq = static_cast<int>(ev.get_int("cseq"));
    int id = static_cast<int>(ev.get_int("id"));
    int leg = static_cast<int>(ev.get_int("leg"));
    int of = static_cast<int>(ev.get_int("of"));
    Coord from = ev.get_coord("from");
    Coord to = ev.get_coord("to");
    std::int64_t start = ev.get_int("start");

    std::vector<Dir> legs;
    for (char c : *ev.get("legs")) {
      auto d = dir_from_char(c);
      if (!d) {
        fail("legality", where(ev) + ": bad legs string");
        return;
      }
      legs.push_back(*d);
    }

    if (!active_) {
      if (leg != 1 || static_cast<int>(legs.size()) != of || of < 1 || of > 2) {
        fail("serialization", where(ev) + ": maneuver does not start at leg 1");
        return;
      }
      auto cit = cmds_.find({epoch, cseq});
      if (cit == cmds_.end())
        fail("window", where(ev) + ": MOVE without a matching command");
      else if (cit->second.target != id)
        fail("window", where(ev) + ": mover is not the commanded target");

      if (last_maneuver_end_ > start)
        fail("serialization", where(ev) + ": maneuver overlaps the previous one");

      ActiveManeuver am;
      am.epoch = epoch;
      am.cseq = cseq;
      am.id = id;
      am.legs = legs;
      am.start_pos = config_.record(id).pos;
      am.start_tick = start;
      auto drv = ev.get("driver");
      if (drv && *drv != "-") am.driver = std::stoi(*drv);

      Maneuver m{id,
                 legs.size() == 1 ? ManeuverKind::slide : ManeuverKind::corner,
                 legs, am.driver};
      ManeuverCheck check = check_maneuver(config_, grid_, m, params_.motion);
      if (!check.ok)
        fail("legality",
             where(ev) + ": illegal maneuver (" + reason_name(check.reason) + ")");
      active_ = am;
    } else {
      if (active_->id != id || active_->cseq != cseq ||
          active_->epoch != epoch || leg != active_->next_leg ||
          legs != active_->legs) {
        fail("serialization", where(ev) + ": interleaved or inconsistent legs");
        return;
      }
    }

    // per-leg geometry and timing
    if (config_.record(id).pos != from)
      fail("legality", where(ev) + ": from does not match configuration");
    if (step(from, active_->legs[leg - 1]) != to)
      fail("legality", where(ev) + ": to does not follow the leg direction");
    std::int64_t expect_start = active_->start_tick + (leg - 1) * leg_ticks_;
    if (start != expect_start || ev.at != expect_start + leg_ticks_)
      fail("timing", where(ev) + ": leg does not take " +
                         std::to_string(leg_ticks_) + " ticks");
    auto sub = ev.get("substeps");
    std::vector<std::int64_t> subs;
    if (sub) {
      std::istringstream ss(*sub);
      std::string tok;
      while (std::getline(ss, tok, ',')) subs.push_back(std::stoll(tok));
    }
    auto offsets = substep_offsets(leg_ticks_);
    bool subs_ok = subs.size() == 6;
    for (std::size_t i = 0; subs_ok && i < 6; ++i)
      subs_ok = subs[i] == start + offsets[i];
    if (!subs_ok)
      fail("timing", where(ev) + ": expected 6 substeps per leg");

    config_.move_module(id, to);
    move_records_ += 1;

    if (leg == of) {
      maneuvers_completed_ += 1;
      last_maneuver_end_ = ev.at;
      if (!is_connected(config_, Adjacency::four))
        fail("connectivity", where(ev) + ": configuration 4-disconnected");
      auto cit = cmds_.find({epoch, cseq});
      if (cit != cmds_.end()) {
        int before = manhattan(active_->start_pos, cit->second.obj);
        int after = manhattan(config_.record(id).pos, cit->second.obj);
        if (after >= before)
          fail("progress", where(ev) + ": maneuver does not decrease distance");
      }
      active_.reset();
    } else {
      if (!is_connected(config_, Adjacency::eight))
        fail("connectivity", where(ev) + ": mid-corner state 8-disconnected");
      active_->next_leg += 1;
    }
  }

  void on_round(const TraceEvent& ev) {
    scan_epoch(ev);
    std::int64_t epoch = ev.get_int("epoch");
    auto lit = leaders_.find(epoch);
    if (lit == leaders_.end() ||
        lit->second.first != static_cast<int>(ev.get_int("leader")))
      fail("election", where(ev) + ": ROUND leader does not match LEADER record");
  }

  void on_msg(const TraceEvent& ev) {
    msg_records_ += 1;
    if (!log_messages_) {
      fail("messages", where(ev) + ": MSG record but logging disabled");
      return;
    }
    int src = static_cast<int>(ev.get_int("src"));
    int dst = static_cast<int>(ev.get_int("dst"));
    std::int64_t sent = ev.get_int("sent");
    if (src == dst) fail("messages", where(ev) + ": src == dst");
    if (!config_.contains(src) || !config_.contains(dst)) {
      fail("messages", where(ev) + ": unknown endpoint");
      return;
    }
    if (manhattan(config_.record(src).pos, config_.record(dst).pos) != 1)
      fail("messages", where(ev) + ": delivery between non-adjacent modules");
    auto fit = fail_tick_.find(src);
    if (fit != fail_tick_.end() && sent > fit->second)
      fail("messages", where(ev) + ": message sent by a failed module");
    auto key = src < dst ? std::make_pair(src, dst) : std::make_pair(dst, src);
    auto lit = last_delivery_.find(key);
    if (lit != last_delivery_.end() && ev.at <= lit->second)
      fail("messages", where(ev) + ": per-link deliveries not strictly increasing");
    last_delivery_[key] = ev.at;
  }

  void on_event(const TraceEvent& ev) {
    if (next_event_ >= sc_.events.size()) {
      fail("events", where(ev) + ": more EVENT records than scenario events");
      return;
    }
    const ScenarioEvent& sev = sc_.events[next_event_++];
    if (ev.at < sev.at)
      fail("events", where(ev) + ": applied before its scenario tick");
    auto kind = ev.get("kind");
    if (sev.kind == ScenarioEvent::Kind::set_output) {
      if (!kind || *kind != "set-output" ||
          static_cast<int>(ev.get_int("x")) != sev.pos.x ||
          static_cast<int>(ev.get_int("y")) != sev.pos.y)
        fail("events", where(ev) + ": does not match scenario event");
      grid_.output = sev.pos;
    } else {
      if (!kind || *kind != "fail" ||
          static_cast<int>(ev.get_int("id")) != sev.id)
        fail("events", where(ev) + ": does not match scenario event");
      if (config_.contains(sev.id)) {
        config_.set_status(sev.id, ModuleStatus::failed);
        if (!fail_tick_.count(sev.id)) fail_tick_[sev.id] = ev.at;
      }
    }
  }

  void on_goal(const TraceEvent& ev) {
    goal_records_ += 1;
    if (!path_exists(config_, grid_.input, grid_.output)) {
      fail("goal", where(ev) + ": GOAL but no occupied path exists");
      return;
    }
    auto len = shortest_chain_len(config_, grid_.input, grid_.output);
    if (!len || ev.get_int("pathlen") != *len)
      fail("goal", where(ev) + ": pathlen mismatch");
  }

  void on_metrics(const TraceEvent& ev, std::size_t index) {
    saw_metrics_ = true;
    if (index + 1 != trace_.size())
      fail("structure", "records after METRICS");
    auto check_eq = [&](const std::string& key, std::int64_t want) {
      if (ev.get_int(key) != want)
        fail("metrics", "metrics " + key + "=" + std::to_string(ev.get_int(key)) +
                            " but replay computed " + std::to_string(want));
    };
    check_eq("motions", move_records_);
    check_eq("maneuvers", maneuvers_completed_);
    check_eq("dropped", drop_records_);
    if (log_messages_) check_eq("delivered", msg_records_);
    if (ev.get_int("sent") <
        ev.get_int("delivered") + ev.get_int("dropped"))
      fail("metrics", "sent < delivered + dropped");
    bool goal_now = path_exists(config_, grid_.input, grid_.output);
    auto goal_field = ev.get("goal");
    if (!goal_field || (*goal_field == "true") != goal_now)
      fail("metrics", "goal flag does not match the final configuration");
    auto pathlen = ev.get("pathlen");
    if (goal_now) {
      auto len = shortest_chain_len(config_, grid_.input, grid_.output);
      if (!pathlen || !len || *pathlen != std::to_string(*len))
        fail("metrics", "final path length mismatch");
    } else if (pathlen && *pathlen != "none") {
      fail("metrics", "pathlen set although goal not reached");
    }
    if (ev.get_int("simtime") != ev.at)
      fail("metrics", "simtime does not match the METRICS tick");
    if (ev.get_int("epochs") < static_cast<std::int64_t>(epochs_seen()))
      fail("metrics", "fewer epochs than the trace shows");
  }

  std::size_t epochs_seen() const {
    std::set<std::int64_t> epochs;
    for (const TraceEvent& ev : trace_) {
      switch (ev.kind) {
        case TraceKind::ELECT:
        case TraceKind::LEADER:
        case TraceKind::CMD:
        case TraceKind::MOVE:
        case TraceKind::REJECT:
        case TraceKind::ROUND:
          epochs.insert(ev.get_int("epoch"));
          break;
        default:
          break;
      }
    }
    return epochs.size();
  }

  // --- state -----------------------------------------------------------------

  const Scenario& sc_;
  const std::vector<TraceEvent>& trace_;
  std::vector<std::string> order_;
  std::map<std::string, std::string> failures_;

  Configuration config_;
  Grid grid_;
  SimParams params_;
  std::int64_t leg_ticks_ = 1000;
  bool log_messages_ = false;

  std::map<std::int64_t, std::pair<int, Coord>> leaders_;
  std::map<std::pair<std::int64_t, int>, CmdInfo> cmds_;
  std::map<std::int64_t, std::set<int>> epoch_addressees_;
  std::optional<ActiveManeuver> active_;
  std::int64_t last_maneuver_end_ = -1;
  std::int64_t last_scan_epoch_ = -1;

  std::map<std::pair<int, int>, std::int64_t> last_delivery_;
  std::map<int, std::int64_t> fail_tick_;
  std::size_t next_event_ = 0;

  std::int64_t move_records_ = 0;
  std::int64_t maneuvers_completed_ = 0;
  std::int64_t msg_records_ = 0;
  std::int64_t drop_records_ = 0;
  std::int64_t goal_records_ = 0;
  bool saw_metrics_ = false;
};

}  // namespace detail

inline VerifyReport verify_trace(const Scenario& sc,
                                 const std::vector<TraceEvent>& trace) {
  return detail::TraceVerifier(sc, trace).run();
}

/// Parses and verifies in one step; a parse failure surfaces as a failing
/// "structure" check.
inline VerifyReport verify_trace_text(const Scenario& sc,
                                      const std::string& text) {
  auto parsed = read_trace(text);
  if (!parsed) {
    VerifyReport rep;
    rep.checks.push_back({"structure", false, parsed.error.format()});
    return rep;
  }
  return verify_trace(sc, *parsed.value);
}

}  // namespace dili
