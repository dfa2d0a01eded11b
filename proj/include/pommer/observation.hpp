#ifndef POMMER_OBSERVATION_HPP_
#define POMMER_OBSERVATION_HPP_

#include <array>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pommer/engine.hpp"

namespace pommer {

inline constexpr int kViewRadius = 5;

/// One agent's fog-limited view of the board plus its own attributes.
/// Nothing outside the (2*kViewRadius+1)^2 window around the agent leaks in.
struct RawObservation {
  Grid board{};        // Fog outside the window
  ItemGrid items{};    // revealed and visible items only
  FlameGrid flames{};  // visible flames
  std::vector<Bomb> bombs;  // visible bombs (owner is not exposed: -1)
  std::array<std::optional<Position>, kNumAgents> agent_positions{};
  std::array<bool, kNumAgents> alive{};

  int self_id = 0;
  Position position;
  int ammo = 0;
  int blast_strength = 0;
  bool can_kick = false;
  int teammate = 0;
  std::array<int, 2> enemies{};
  int tick = 0;

  bool visible(Position p) const { return board[p.index()] != Cell::Fog; }

  int bomb_index_at(Position p) const {
    for (std::size_t i = 0; i < bombs.size(); ++i) {
      if (bombs[i].position == p) return static_cast<int>(i);
    }
    return -1;
  }

  /// Visible agent standing on `p`, or -1.
  int agent_at(Position p) const {
    for (int i = 0; i < kNumAgents; ++i) {
      if (agent_positions[i] && *agent_positions[i] == p) return i;
    }
    return -1;
  }

  bool operator==(const RawObservation&) const = default;
};

inline bool in_view(Position viewer, Position p) {
  return std::abs(p.row - viewer.row) <= kViewRadius &&
         std::abs(p.col - viewer.col) <= kViewRadius;
}

inline RawObservation observe(const GameState& state, int agent_id) {
  if (agent_id < 0 || agent_id >= kNumAgents) {
    throw std::out_of_range("agent id out of range");
  }
  const AgentState& self = state.agents[agent_id];
  if (!self.alive) throw std::logic_error("cannot observe a dead agent");

  RawObservation obs;
  obs.self_id = agent_id;
  obs.position = self.position;
  obs.ammo = self.ammo;
  obs.blast_strength = self.blast_strength;
  obs.can_kick = self.can_kick;
  obs.teammate = teammate_of(agent_id);
  obs.enemies = {(agent_id + 1) % kNumAgents, (agent_id + 3) % kNumAgents};
  if (obs.enemies[0] > obs.enemies[1]) std::swap(obs.enemies[0], obs.enemies[1]);
  obs.tick = state.tick;

  obs.items.fill(Powerup::None);
  obs.flames.fill(0);
  for (int i = 0; i < kNumCells; ++i) {
    const Position p = Position::from_index(i);
    if (!in_view(self.position, p)) {
      obs.board[i] = Cell::Fog;
      continue;
    }
    obs.board[i] = state.board[i];
    obs.flames[i] = state.flames[i];
    if (state.board[i] == Cell::Passage) obs.items[i] = state.items[i];
  }
  for (const Bomb& b : state.bombs) {
    if (!in_view(self.position, b.position)) continue;
    Bomb seen = b;
    seen.owner = -1;
    obs.bombs.push_back(seen);
  }
  for (int i = 0; i < kNumAgents; ++i) {
    const AgentState& a = state.agents[i];
    obs.alive[i] = a.alive;
    if (a.alive && in_view(self.position, a.position)) {
      obs.agent_positions[i] = a.position;
    }
  }
  return obs;
}

}  // namespace pommer

#endif  // POMMER_OBSERVATION_HPP_
