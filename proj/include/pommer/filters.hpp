#ifndef POMMER_FILTERS_HPP_
#define POMMER_FILTERS_HPP_

// Post-processing of a policy's actions: jitter correction hands control to
// an expert when the agent is stuck or bouncing between two cells, and the
// action filter vetoes moves onto cells about to burn.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "pommer/agent.hpp"
#include "pommer/random.hpp"
#include "pommer/threat.hpp"

namespace pommer {

struct PositionHistory {
  std::vector<int> xs;  // rows
  std::vector<int> ys;  // columns
  int takeover_remaining = 0;

  void append(Position p) {
    xs.push_back(p.row);
    ys.push_back(p.col);
  }
  std::size_t size() const { return xs.size(); }
};

enum class JitterVerdict : std::uint8_t { None, Static, OscillateX, OscillateY };

inline int expert_steps(JitterVerdict v) {
  switch (v) {
    case JitterVerdict::Static: return 3;
    case JitterVerdict::OscillateX:
    case JitterVerdict::OscillateY: return 2;
    case JitterVerdict::None: return 0;
  }
  return 0;
}

inline const char* verdict_name(JitterVerdict v) {
  switch (v) {
    case JitterVerdict::None: return "None";
    case JitterVerdict::Static: return "Static";
    case JitterVerdict::OscillateX: return "OscillateX";
    case JitterVerdict::OscillateY: return "OscillateY";
  }
  return "?";
}

namespace detail {

// Distinct values among v[n-len], v[n-len+stride], ... ; nullopt when the
// history is shorter than `len`.
inline std::optional<std::set<int>> window_values(const std::vector<int>& v,
                                                  std::size_t len,
                                                  std::size_t stride = 1) {
  if (v.size() < len) return std::nullopt;
  std::set<int> out;
  for (std::size_t i = v.size() - len; i < v.size(); i += stride) out.insert(v[i]);
  return out;
}

// Two-cell bounce along `axis` while `other` holds still.
inline bool oscillates(const std::vector<int>& axis, const std::vector<int>& other) {
  const auto odd = window_values(axis, 10, 2);
  const auto even = window_values(axis, 11, 2);
  if (odd && even && odd->size() == 1 && even->size() == 1 && *odd != *even) {
    return true;
  }
  const auto long_axis = window_values(axis, 35);
  const auto long_other = window_values(other, 35);
  return long_axis && long_other && long_axis->size() == 2 && long_other->size() == 1;
}

}  // namespace detail

inline JitterVerdict detect_jitter(const PositionHistory& h) {
  const auto x15 = detail::window_values(h.xs, 15);
  const auto y15 = detail::window_values(h.ys, 15);
  if (x15 && y15 && x15->size() == 1 && y15->size() == 1) return JitterVerdict::Static;
  if (detail::oscillates(h.xs, h.ys)) return JitterVerdict::OscillateX;
  if (detail::oscillates(h.ys, h.xs)) return JitterVerdict::OscillateY;
  return JitterVerdict::None;
}

struct FilterResult {
  Action action = Action::Stop;
  bool intervened = false;
  bool fallback = false;  // every option looked unsafe
};

/// Bombs as the action filter sees them. A sliding bomb is counted both where
/// it is and where it is heading.
inline std::vector<Bomb> filter_bombs(const RawObservation& obs) {
  std::vector<Bomb> out = obs.bombs;
  for (const Bomb& b : obs.bombs) {
    const Position next = projected_position(obs, b);
    if (next != b.position) {
      Bomb copy = b;
      copy.position = next;
      out.push_back(copy);
    }
  }
  return out;
}

/// Where `a` takes the agent, given what it can see. Blocked moves stay put.
/// A kick relocates the kicked bomb in `bombs`.
inline Position destination(const RawObservation& obs, Action a,
                            std::vector<Bomb>& bombs) {
  const Position here = obs.position;
  if (!is_move(a)) return here;
  const Position t = moved(here, a);
  if (!t.in_bounds() || obs.board[t.index()] != Cell::Passage) return here;
  if (obs.bomb_index_at(t) < 0) return t;
  const Position beyond = moved(t, a);
  if (!obs.can_kick || !beyond.in_bounds() ||
      obs.board[beyond.index()] != Cell::Passage || obs.bomb_index_at(beyond) >= 0 ||
      obs.agent_at(beyond) >= 0) {
    return here;
  }
  for (Bomb& b : bombs) {
    if (b.position == t) b.position = beyond;
  }
  return t;
}

/// True when `a` leaves the agent on a cell holding flames now, or inside
/// the blast of a bomb due within two ticks.
inline bool action_unsafe(const RawObservation& obs, Action a) {
  std::vector<Bomb> bombs = filter_bombs(obs);
  const Position dest = destination(obs, a, bombs);
  return threat_map(obs, bombs).threatened_within(dest, 2);
}

inline FilterResult apply_action_filter(const RawObservation& obs, Action proposed,
                                        Rng& rng) {
  if (!action_unsafe(obs, proposed)) return {proposed, false, false};
  std::vector<Action> rejected = {proposed};
  auto is_rejected = [&](Action a) {
    return std::find(rejected.begin(), rejected.end(), a) != rejected.end();
  };
  for (;;) {
    std::vector<Action> options;
    for (const Action a : kMoveActions) {
      if (!is_rejected(a)) options.push_back(a);
    }
    if (options.empty()) break;
    const Action pick = options[rng.uniform_int(options.size())];
    if (!action_unsafe(obs, pick)) return {pick, true, false};
    rejected.push_back(pick);
  }
  if (!is_rejected(Action::Stop) && !action_unsafe(obs, Action::Stop)) {
    return {Action::Stop, true, false};
  }
  return {Action::Stop, true, true};
}

struct ArmingFlags {
  bool jitter = false;
  bool action = false;
};

inline ArmingFlags probabilistic_arming(Rng& rng, double p_jitter = 0.10,
                                        double p_action = 0.30) {
  ArmingFlags f;
  f.jitter = rng.bernoulli(p_jitter);
  f.action = rng.bernoulli(p_action);
  return f;
}

/// Per-agent state of both post-processors. Call observe_tick() once per
/// tick; if it returns an action the expert has control this tick and the
/// policy should not be queried. Then pass the chosen action to filter().
class FilterPipeline {
 public:
  FilterPipeline(ArmingFlags flags, Agent* expert) : flags_(flags), expert_(expert) {
    if (flags_.jitter && expert_ == nullptr) {
      throw std::invalid_argument("jitter correction needs an expert");
    }
  }

  void reset(std::uint64_t seed) {
    history_ = {};
    rng_ = Rng(seed);
    if (expert_) expert_->reset(derive_seed(seed, 1));
  }

  const ArmingFlags& flags() const { return flags_; }
  void set_flags(ArmingFlags f) {
    if (f.jitter && expert_ == nullptr) {
      throw std::invalid_argument("jitter correction needs an expert");
    }
    flags_ = f;
  }
  const PositionHistory& history() const { return history_; }
  JitterVerdict last_verdict() const { return last_verdict_; }

  std::optional<Action> observe_tick(const RawObservation& obs) {
    last_verdict_ = JitterVerdict::None;
    if (!flags_.jitter) return std::nullopt;
    history_.append(obs.position);
    if (history_.takeover_remaining == 0) {
      last_verdict_ = detect_jitter(history_);
      history_.takeover_remaining = expert_steps(last_verdict_);
    }
    if (history_.takeover_remaining == 0) return std::nullopt;
    --history_.takeover_remaining;
    return expert_->act(obs);
  }

  FilterResult filter(const RawObservation& obs, Action a) {
    if (!flags_.action) return {a, false, false};
    return apply_action_filter(obs, a, rng_);
  }

 private:
  ArmingFlags flags_;
  Agent* expert_;
  PositionHistory history_;
  JitterVerdict last_verdict_ = JitterVerdict::None;
  Rng rng_{0};
};

}  // namespace pommer

#endif  // POMMER_FILTERS_HPP_
