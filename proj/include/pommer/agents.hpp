#ifndef POMMER_AGENTS_HPP_
#define POMMER_AGENTS_HPP_

#include <array>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pommer/agent.hpp"
#include "pommer/filters.hpp"
#include "pommer/random.hpp"
#include "pommer/threat.hpp"

namespace pommer {

class StaticAgent : public Agent {
 public:
  std::string name() const override { return "StaticAgent"; }
  Action act(const RawObservation&) override { return Action::Stop; }
};

/// Uniform over all six actions.
class RandomAgent : public Agent {
 public:
  std::string name() const override { return "RandomAgent"; }
  void reset(std::uint64_t seed) override { rng_ = Rng(seed); }
  Action act(const RawObservation&) override {
    return static_cast<Action>(rng_.uniform_int(kNumActions));
  }

 private:
  Rng rng_{0};
};

/// Training-only teammate: drops a bomb on its first turn and waits on it.
class SuicideTeammate : public Agent {
 public:
  std::string name() const override { return "SuicideTeammate"; }
  void reset(std::uint64_t) override { placed_ = false; }
  Action act(const RawObservation&) override {
    if (placed_) return Action::Stop;
    placed_ = true;
    return Action::PlaceBomb;
  }

 private:
  bool placed_ = false;
};

struct SimpleAgentOptions {
  bool bombs = true;
  // Flee once the agent's own cell will burn within this many ticks.
  int flee_horizon = kBombLife;
};

/// Scripted heuristic player. In priority order: escape danger, bomb an
/// enemy or an adjacent wooden wall when a retreat exists, fetch a visible
/// powerup, close in on a visible enemy, else wander without stepping into
/// danger. Paths are breadth-first over visible open cells; ties among
/// equally good first steps go to the agent's own generator.
class SimpleAgent : public Agent {
 public:
  explicit SimpleAgent(SimpleAgentOptions options = {}) : options_(options) {}

  std::string name() const override {
    return options_.bombs ? "SimpleAgent" : "SimpleAgent_NoBomb";
  }
  void reset(std::uint64_t seed) override { rng_ = Rng(seed); }

  Action act(const RawObservation& obs) override {
    const std::vector<Bomb> bombs = projected_bombs(obs);
    const ThreatMap threat = threat_map(obs, bombs);

    if (threat.threatened_within(obs.position, options_.flee_horizon)) {
      return flee(obs, threat);
    }
    if (options_.bombs && wants_bomb(obs) && retreat_exists(obs, bombs)) {
      return Action::PlaceBomb;
    }
    auto walkable = [&](Position p) {
      return !threat.threatened_within(p, options_.flee_horizon + 1);
    };
    if (auto a = step_toward(obs, walkable, [&](Position p) {
          return obs.items[p.index()] != Powerup::None;
        })) {
      return *a;
    }
    if (auto a = step_toward(obs, walkable, [&](Position p) {
          return adjacent_to_enemy(obs, p);
        })) {
      return *a;
    }
    std::vector<Action> options;
    for (const Action a : kMoveActions) {
      const Position t = moved(obs.position, a);
      if (passable(obs, t) && walkable(t)) options.push_back(a);
    }
    if (options.empty()) return Action::Stop;
    return options[rng_.uniform_int(options.size())];
  }

 private:
  static bool passable(const RawObservation& obs, Position p) {
    return p.in_bounds() && obs.board[p.index()] == Cell::Passage &&
           obs.bomb_index_at(p) < 0 && obs.agent_at(p) < 0;
  }

  static bool adjacent_to_enemy(const RawObservation& obs, Position p) {
    for (const int e : obs.enemies) {
      const auto& q = obs.agent_positions[e];
      if (q && std::abs(q->row - p.row) + std::abs(q->col - p.col) == 1) return true;
    }
    return false;
  }

  bool wants_bomb(const RawObservation& obs) const {
    if (obs.ammo <= 0 || obs.bomb_index_at(obs.position) >= 0) return false;
    bool target = false;
    for_each_blast_cell(obs.board, obs.position, obs.blast_strength, [&](Position p) {
      const int who = obs.agent_at(p);
      if (who >= 0 && who != obs.self_id && who != obs.teammate) target = true;
    });
    for (const Action a : kMoveActions) {
      const Position t = moved(obs.position, a);
      if (t.in_bounds() && obs.board[t.index()] == Cell::WoodenWall) target = true;
    }
    return target;
  }

  bool retreat_exists(const RawObservation& obs, std::vector<Bomb> bombs) const {
    Bomb mine;
    mine.position = obs.position;
    mine.life = kBombLife;
    mine.blast_strength = obs.blast_strength;
    mine.owner = obs.self_id;
    bombs.push_back(mine);
    const ThreatMap threat = threat_map(obs, bombs);
    return !escape_moves(obs, threat).empty();
  }

  // First moves of the quickest routes to a cell that stays clear, never
  // standing on a cell while it burns. Waiting in place is allowed.
  static std::vector<Action> escape_moves(const RawObservation& obs,
                                          const ThreatMap& threat) {
    if (threat.clear_from(obs.position, 1)) return {Action::Stop};
    constexpr int kDepth = kBombLife + kFlameLife + 1;
    constexpr std::array<Action, 5> kSteps = {Action::Stop, Action::Up, Action::Down,
                                              Action::Left, Action::Right};
    // Bitmask of first moves that reach each cell at the current depth.
    std::array<std::uint8_t, kNumCells> reach{};
    reach[obs.position.index()] = 1;  // placeholder bit, replaced at depth 1
    for (int k = 1; k <= kDepth; ++k) {
      std::array<std::uint8_t, kNumCells> next{};
      std::uint8_t found = 0;
      for (int i = 0; i < kNumCells; ++i) {
        if (reach[i] == 0) continue;
        const Position from = Position::from_index(i);
        for (const Action a : kSteps) {
          const Position to = moved(from, a);
          if (a != Action::Stop && !passable(obs, to)) continue;
          if (threat.lethal_at(to, k)) continue;
          const std::uint8_t via =
              k == 1 ? static_cast<std::uint8_t>(1u << static_cast<int>(a)) : reach[i];
          next[to.index()] |= via;
          if (threat.clear_from(to, k + 1)) found |= via;
        }
      }
      if (found != 0) {
        std::vector<Action> out;
        for (const Action a : kSteps) {
          if (found & (1u << static_cast<int>(a))) out.push_back(a);
        }
        return out;
      }
      reach = next;
    }
    return {};
  }

  Action flee(const RawObservation& obs, const ThreatMap& threat) {
    std::vector<Action> moves = escape_moves(obs, threat);
    if (moves.empty()) {
      // Trapped: at least survive the next tick if possible.
      constexpr std::array<Action, 5> kSteps = {Action::Stop, Action::Up, Action::Down,
                                                Action::Left, Action::Right};
      for (const Action a : kSteps) {
        const Position t = moved(obs.position, a);
        if ((a == Action::Stop || passable(obs, t)) && !threat.lethal_at(t, 1)) {
          moves.push_back(a);
        }
      }
    }
    if (moves.empty()) return Action::Stop;
    return moves[rng_.uniform_int(moves.size())];
  }

  // First step of a shortest visible path to the nearest cell satisfying
  // `goal`; nullopt when none is reachable or the agent is already there.
  template <typename Walkable, typename Goal>
  std::optional<Action> step_toward(const RawObservation& obs, Walkable&& walkable,
                                    Goal&& goal) {
    std::array<int, kNumCells> dist;
    dist.fill(-1);
    std::array<std::uint8_t, kNumCells> origins{};  // bitmask of first moves
    std::deque<Position> frontier;
    dist[obs.position.index()] = 0;
    frontier.push_back(obs.position);
    int best = -1;
    std::uint8_t best_origins = 0;
    while (!frontier.empty()) {
      const Position p = frontier.front();
      frontier.pop_front();
      const int d = dist[p.index()];
      if (best >= 0 && d > best) break;
      if (d > 0 && goal(p)) {
        best = d;
        best_origins |= origins[p.index()];
        continue;
      }
      for (const Action a : kMoveActions) {
        const Position q = moved(p, a);
        if (!passable(obs, q) || !walkable(q)) continue;
        const std::uint8_t via =
            d == 0 ? static_cast<std::uint8_t>(1u << static_cast<int>(a)) : origins[p.index()];
        if (dist[q.index()] < 0) {
          dist[q.index()] = d + 1;
          origins[q.index()] = via;
          frontier.push_back(q);
        } else if (dist[q.index()] == d + 1) {
          origins[q.index()] |= via;
        }
      }
    }
    if (best < 0) return std::nullopt;
    std::vector<Action> moves;
    for (const Action a : kMoveActions) {
      if (best_origins & (1u << static_cast<int>(a))) moves.push_back(a);
    }
    return moves[rng_.uniform_int(moves.size())];
  }

  SimpleAgentOptions options_;
  Rng rng_{0};
};

/// A policy with jitter correction and/or the action filter attached.
class FilteredAgent : public Agent {
 public:
  FilteredAgent(AgentPtr inner, ArmingFlags flags, AgentPtr expert)
      : inner_(std::move(inner)),
        expert_(std::move(expert)),
        pipeline_(flags, expert_.get()) {}

  std::string name() const override {
    std::string n = inner_->name();
    if (pipeline_.flags().jitter) n += "_jitter";
    if (pipeline_.flags().action) n += "_action";
    return n;
  }
  void reset(std::uint64_t seed) override {
    inner_->reset(seed);
    pipeline_.reset(derive_seed(seed, "filters"));
  }
  Action act(const RawObservation& obs) override {
    std::optional<Action> a = pipeline_.observe_tick(obs);
    if (!a) a = inner_->act(obs);
    return pipeline_.filter(obs, *a).action;
  }

  Agent& inner() { return *inner_; }
  FilterPipeline& pipeline() { return pipeline_; }

 private:
  AgentPtr inner_;
  AgentPtr expert_;
  FilterPipeline pipeline_;
};

/// Returns `policy` itself when both flags are off.
inline AgentPtr wrap_with_filters(AgentPtr policy, bool use_jitter, bool use_action_filter,
                                  AgentPtr expert = nullptr) {
  if (!use_jitter && !use_action_filter) return policy;
  if (use_jitter && !expert) throw std::invalid_argument("jitter correction needs an expert");
  return std::make_unique<FilteredAgent>(std::move(policy),
                                         ArmingFlags{use_jitter, use_action_filter},
                                         std::move(expert));
}

}  // namespace pommer

#endif  // POMMER_AGENTS_HPP_
