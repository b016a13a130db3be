#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dili/lattice.hpp"

namespace dili {

/// Seeded generator with an explicitly portable bounded-draw so traces are
/// byte-identical across platforms.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform draw in [lo, hi] by rejection sampling.
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next());  // full range
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return lo + static_cast<std::int64_t>(v % span);
  }

 private:
  std::mt19937_64 engine_;
};

enum class MsgKind {
  WAVE,
  ECHO,
  LEADER_ANN,
  MOVE_CMD,
  CMD_DONE,
  ROUND_DONE,
  NEW_GOAL,
};

inline const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::WAVE: return "wave";
    case MsgKind::ECHO: return "echo";
    case MsgKind::LEADER_ANN: return "leader_ann";
    case MsgKind::MOVE_CMD: return "move_cmd";
    case MsgKind::CMD_DONE: return "cmd_done";
    case MsgKind::ROUND_DONE: return "round_done";
    case MsgKind::NEW_GOAL: return "new_goal";
  }
  return "?";
}

/// Election wave tag. Higher epoch wins, then higher score, then smaller id.
struct WaveTag {
  std::int64_t epoch = 0;
  int score = 0;
  int id = 0;

  friend bool operator==(const WaveTag& a, const WaveTag& b) {
    return a.epoch == b.epoch && a.score == b.score && a.id == b.id;
  }
  friend bool operator!=(const WaveTag& a, const WaveTag& b) { return !(a == b); }
};

inline bool beats(const WaveTag& a, const WaveTag& b) {
  if (a.epoch != b.epoch) return a.epoch > b.epoch;
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

struct MoveCommand {
  std::int64_t epoch = 0;
  int seq = 0;
  int target = 0;             // module expected to move
  Coord objective;            // output cell in force when issued
  std::optional<int> driver;  // addressee when the target is failed
};

struct CmdDone {
  std::int64_t epoch = 0;
  int seq = 0;
  int target = 0;
  bool moved = false;
};

/// Flood bookkeeping for multi-hop payloads. ttl counts remaining link
/// traversals; kNoTtl floods without a hop bound.
inline constexpr int kNoTtl = -1;

struct FloodHeader {
  int origin = 0;
  std::uint64_t fseq = 0;
  int ttl = kNoTtl;
  int addressee = 0;  // module the payload is for (floods only)
};

/// One-hop datagram between docked modules. Unused payload fields stay
/// zeroed; kind selects which ones matter.
struct Message {
  int src = 0;
  int dst = 0;
  MsgKind kind = MsgKind::WAVE;
  std::int64_t epoch = 0;
  std::int64_t sent_at = 0;

  WaveTag tag;         // WAVE, ECHO
  MoveCommand cmd;     // MOVE_CMD
  CmdDone done;        // CMD_DONE
  FloodHeader flood;   // LEADER_ANN, MOVE_CMD, CMD_DONE, ROUND_DONE
  int leader_id = 0;   // LEADER_ANN
  Coord goal;          // NEW_GOAL

  std::uint64_t uid = 0;  // transport identity
};

struct LatencyModel {
  enum class Kind { fixed, uniform };
  Kind kind = Kind::uniform;
  std::int64_t a = 1;
  std::int64_t b = 20;

  static LatencyModel fixed(std::int64_t t) {
    return {Kind::fixed, t, t};
  }
  static LatencyModel uniform(std::int64_t a, std::int64_t b) {
    return {Kind::uniform, a, b};
  }

  std::int64_t sample(DeterministicRng& rng) const {
    if (kind == Kind::fixed) return a;
    return rng.uniform(a, b);
  }

  bool valid() const { return kind == Kind::fixed ? a >= 1 : (1 <= a && a <= b); }

  std::string format() const {
    if (kind == Kind::fixed) return "fixed," + std::to_string(a);
    return "uniform," + std::to_string(a) + "," + std::to_string(b);
  }

  friend bool operator==(const LatencyModel& x, const LatencyModel& y) {
    return x.kind == y.kind && x.a == y.a && x.b == y.b;
  }
};

struct LinkKey {
  int a = 0;
  int b = 0;

  static LinkKey of(int x, int y) { return x < y ? LinkKey{x, y} : LinkKey{y, x}; }

  friend bool operator<(LinkKey p, LinkKey q) {
    return p.a != q.a ? p.a < q.a : p.b < q.b;
  }
  friend bool operator==(LinkKey p, LinkKey q) { return p.a == q.a && p.b == q.b; }
};

/// Channel that exists while two module faces are docked. Deliveries on a
/// link are strictly increasing in tick.
struct LinkState {
  std::int64_t last_delivery = 0;
  std::uint64_t generation = 0;
  std::map<std::uint64_t, Message> in_flight;  // uid -> message
};

enum class DropReason { undock, dead_dst };

inline const char* drop_reason_name(DropReason r) {
  return r == DropReason::undock ? "undock" : "dead_dst";
}

/// Simulated transport owned by the engine's event loop. It only schedules
/// and books deliveries; the engine decides event ordering and tracing.
class Transport {
 public:
  bool has_link(int x, int y) const { return links_.count(LinkKey::of(x, y)); }

  void form_link(int x, int y, std::int64_t now) {
    LinkKey key = LinkKey::of(x, y);
    if (links_.count(key)) return;
    LinkState state;
    state.last_delivery = now;
    state.generation = ++next_generation_;
    links_[key] = state;
  }

  /// Breaks a docked link; returns the in-flight messages dropped with it.
  std::vector<Message> break_link(int x, int y) {
    LinkKey key = LinkKey::of(x, y);
    auto it = links_.find(key);
    std::vector<Message> dropped;
    if (it == links_.end()) return dropped;
    for (auto& [uid, msg] : it->second.in_flight) dropped.push_back(msg);
    links_.erase(it);
    return dropped;
  }

  std::vector<int> neighbors(int id) const {
    std::vector<int> out;
    for (const auto& [key, state] : links_) {
      if (key.a == id) out.push_back(key.b);
      if (key.b == id) out.push_back(key.a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  struct Scheduled {
    std::int64_t delivery_tick = 0;
    std::uint64_t generation = 0;
  };

  /// Samples latency and books the delivery, clamped so per-link delivery
  /// ticks stay strictly increasing. Returns nullopt when no docked link
  /// exists (reported to the sender as a local error).
  std::optional<Scheduled> schedule(Message& msg, std::int64_t now,
                                    const LatencyModel& model,
                                    DeterministicRng& rng) {
    auto it = links_.find(LinkKey::of(msg.src, msg.dst));
    if (it == links_.end()) return std::nullopt;
    LinkState& link = it->second;
    msg.sent_at = now;
    msg.uid = ++next_uid_;
    std::int64_t tick = std::max(now + model.sample(rng), link.last_delivery + 1);
    link.last_delivery = tick;
    link.in_flight[msg.uid] = msg;
    return Scheduled{tick, link.generation};
  }

  /// Removes in-flight messages addressed to dst on the (dst, other) link,
  /// e.g. when dst fails; the link itself stays docked.
  std::vector<Message> drop_in_flight_to(int dst, int other) {
    std::vector<Message> out;
    auto it = links_.find(LinkKey::of(dst, other));
    if (it == links_.end()) return out;
    auto& in_flight = it->second.in_flight;
    for (auto mit = in_flight.begin(); mit != in_flight.end();) {
      if (mit->second.dst == dst) {
        out.push_back(mit->second);
        mit = in_flight.erase(mit);
      } else {
        ++mit;
      }
    }
    return out;
  }

  /// Claims a scheduled delivery. Returns nullopt when the link broke (the
  /// drop was already reported at undock time).
  std::optional<Message> take_delivery(int src, int dst, std::uint64_t generation,
                                       std::uint64_t uid) {
    auto it = links_.find(LinkKey::of(src, dst));
    if (it == links_.end() || it->second.generation != generation)
      return std::nullopt;
    auto mit = it->second.in_flight.find(uid);
    if (mit == it->second.in_flight.end()) return std::nullopt;
    Message msg = mit->second;
    it->second.in_flight.erase(mit);
    return msg;
  }

  const std::map<LinkKey, LinkState>& links() const { return links_; }

 private:
  std::map<LinkKey, LinkState> links_;
  std::uint64_t next_uid_ = 0;
  std::uint64_t next_generation_ = 0;
};

}  // namespace dili
