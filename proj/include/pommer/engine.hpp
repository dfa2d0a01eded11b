#ifndef POMMER_ENGINE_HPP_
#define POMMER_ENGINE_HPP_

// Deterministic 2v2 team simulation: board generation, simultaneous action
// resolution, bomb and flame physics, powerups and termination.

#include <algorithm>
#include <array>
#include <bitset>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pommer/random.hpp"

namespace pommer {

inline constexpr int kBoardSize = 11;
inline constexpr int kNumCells = kBoardSize * kBoardSize;
inline constexpr int kNumAgents = 4;
inline constexpr int kMaxTicks = 800;
inline constexpr int kBombLife = 10;
inline constexpr int kFlameLife = 2;
inline constexpr int kInitialBlastStrength = 3;
inline constexpr int kInitialAmmo = 1;
inline constexpr int kNumActions = 6;

enum class Cell : std::uint8_t { Passage, RigidWall, WoodenWall, Fog };
enum class Powerup : std::uint8_t { None, ExtraBomb, IncrRange, Kick };
enum class Action : std::uint8_t { Stop, Up, Down, Left, Right, PlaceBomb };
enum class Outcome : std::uint8_t { Team0Wins, Team1Wins, Tie };

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Stop, Action::Up,    Action::Down,
    Action::Left, Action::Right, Action::PlaceBomb};
inline constexpr std::array<Action, 4> kMoveActions = {
    Action::Up, Action::Down, Action::Left, Action::Right};

constexpr bool is_move(Action a) {
  return a == Action::Up || a == Action::Down || a == Action::Left ||
         a == Action::Right;
}

inline std::string_view action_name(Action a) {
  constexpr std::array<std::string_view, kNumActions> names = {
      "Stop", "Up", "Down", "Left", "Right", "PlaceBomb"};
  return names[static_cast<int>(a)];
}

inline std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Team0Wins: return "Team0Wins";
    case Outcome::Team1Wins: return "Team1Wins";
    case Outcome::Tie: return "Tie";
  }
  return "?";
}

inline Action action_from_int(int v) {
  if (v < 0 || v >= kNumActions) {
    throw std::out_of_range("action index out of range: " + std::to_string(v));
  }
  return static_cast<Action>(v);
}

struct Position {
  int row = 0;
  int col = 0;

  constexpr bool operator==(const Position&) const = default;
  constexpr bool in_bounds() const {
    return row >= 0 && row < kBoardSize && col >= 0 && col < kBoardSize;
  }
  constexpr int index() const { return row * kBoardSize + col; }
  static constexpr Position from_index(int i) {
    return {i / kBoardSize, i % kBoardSize};
  }
};

/// Cell reached by one step of `a`; non-movement actions return `p`.
constexpr Position moved(Position p, Action a) {
  switch (a) {
    case Action::Up: return {p.row - 1, p.col};
    case Action::Down: return {p.row + 1, p.col};
    case Action::Left: return {p.row, p.col - 1};
    case Action::Right: return {p.row, p.col + 1};
    default: return p;
  }
}

using Grid = std::array<Cell, kNumCells>;
using FlameGrid = std::array<std::uint8_t, kNumCells>;
using ItemGrid = std::array<Powerup, kNumCells>;
using CellSet = std::bitset<kNumCells>;

inline constexpr std::array<Position, kNumAgents> kStartCorners = {
    Position{0, 0}, Position{0, kBoardSize - 1},
    Position{kBoardSize - 1, kBoardSize - 1}, Position{kBoardSize - 1, 0}};

constexpr int team_of(int agent_id) { return agent_id % 2; }
constexpr int teammate_of(int agent_id) { return (agent_id + 2) % kNumAgents; }

struct AgentState {
  int id = 0;
  Position position;
  bool alive = true;
  int ammo = kInitialAmmo;
  int ammo_capacity = kInitialAmmo;
  int blast_strength = kInitialBlastStrength;
  bool can_kick = false;

  int team() const { return team_of(id); }
  bool operator==(const AgentState&) const = default;
};

struct Bomb {
  Position position;
  int life = kBombLife;
  int blast_strength = kInitialBlastStrength;
  int owner = 0;
  Action velocity = Action::Stop;  // a movement action while sliding

  bool operator==(const Bomb&) const = default;
};

struct BoardConfig {
  int rigid_walls = 36;
  int wooden_walls = 36;
  double powerup_probability = 0.5;

  bool operator==(const BoardConfig&) const = default;
};

struct GameState {
  Grid board{};
  ItemGrid items{};  // concealed while the cell is a wooden wall
  FlameGrid flames{};
  std::array<AgentState, kNumAgents> agents{};
  std::vector<Bomb> bombs;
  int tick = 0;
  std::uint64_t seed = 0;

  Cell cell(Position p) const { return board[p.index()]; }

  int bomb_index_at(Position p) const {
    for (std::size_t i = 0; i < bombs.size(); ++i) {
      if (bombs[i].position == p) return static_cast<int>(i);
    }
    return -1;
  }

  int alive_count() const {
    int n = 0;
    for (const auto& a : agents) n += a.alive ? 1 : 0;
    return n;
  }

  bool operator==(const GameState&) const = default;
};

struct StepEvents {
  std::array<Action, kNumAgents> actions{};  // as applied; dead agents: Stop
  std::vector<int> deaths;
  std::vector<Bomb> bombs_placed;
  std::vector<Position> explosions;
  std::vector<std::pair<int, Powerup>> pickups;
  CellSet lethal_cells;  // flame cells when deaths were resolved
  std::optional<Outcome> outcome;
};

/// Calls `visit(Position)` for every cell reached by a blast of `strength`
/// centred on `origin`: the centre plus up to strength-1 cells per direction.
/// A rigid wall stops the arm without flame; a wooden wall takes flame and
/// stops it. Fog is treated as open so observation-based predictions stay
/// conservative.
template <typename Visit>
void for_each_blast_cell(const Grid& board, Position origin, int strength,
                         Visit&& visit) {
  visit(origin);
  for (const Action dir : kMoveActions) {
    Position p = origin;
    for (int k = 1; k < strength; ++k) {
      p = moved(p, dir);
      if (!p.in_bounds()) break;
      const Cell c = board[p.index()];
      if (c == Cell::RigidWall) break;
      visit(p);
      if (c == Cell::WoodenWall) break;
    }
  }
}

inline CellSet blast_cells(const Grid& board, Position origin, int strength) {
  CellSet out;
  for_each_blast_cell(board, origin, strength,
                      [&](Position p) { out.set(p.index()); });
  return out;
}

namespace detail {

inline bool in_clear_zone(Position p) {
  for (const Position corner : kStartCorners) {
    const int dr = std::abs(p.row - corner.row);
    const int dc = std::abs(p.col - corner.col);
    // 2x2 block at the corner plus the edge cells two steps out.
    if (dr <= 1 && dc <= 1) return true;
    if ((dr == 2 && dc == 0) || (dr == 0 && dc == 2)) return true;
  }
  return false;
}

// Corners mutually reachable through cells that are not rigid walls.
inline bool corners_connected(const Grid& board) {
  CellSet seen;
  std::vector<Position> frontier{kStartCorners[0]};
  seen.set(kStartCorners[0].index());
  while (!frontier.empty()) {
    const Position p = frontier.back();
    frontier.pop_back();
    for (const Action dir : kMoveActions) {
      const Position q = moved(p, dir);
      if (!q.in_bounds() || seen.test(q.index())) continue;
      if (board[q.index()] == Cell::RigidWall) continue;
      seen.set(q.index());
      frontier.push_back(q);
    }
  }
  return std::all_of(kStartCorners.begin(), kStartCorners.end(),
                     [&](Position c) { return seen.test(c.index()); });
}

}  // namespace detail

/// Fresh game: walls symmetric under transposition, agents in the corners.
inline GameState generate_board(std::uint64_t seed, const BoardConfig& config = {}) {
  if (config.rigid_walls < 0 || config.wooden_walls < 0) {
    throw std::invalid_argument("wall counts must be non-negative");
  }
  Rng rng(seed);

  // Placement units: transposed pairs (i<j) and single diagonal cells.
  std::vector<std::pair<Position, Position>> units;
  for (int i = 0; i < kBoardSize; ++i) {
    for (int j = i; j < kBoardSize; ++j) {
      const Position a{i, j};
      if (detail::in_clear_zone(a)) continue;
      units.push_back({a, Position{j, i}});
    }
  }
  int capacity = 0;
  for (const auto& u : units) capacity += u.first == u.second ? 1 : 2;
  if (config.rigid_walls + config.wooden_walls > capacity) {
    throw std::invalid_argument("wall counts exceed the placeable area");
  }

  GameState state;
  state.seed = seed;
  for (int attempt = 0;; ++attempt) {
    state.board.fill(Cell::Passage);
    rng.shuffle(std::span(units));
    std::vector<char> used(units.size(), 0);
    auto place = [&](Cell kind, int count) {
      for (std::size_t u = 0; u < units.size() && count > 0; ++u) {
        const auto& [a, b] = units[u];
        const int size = a == b ? 1 : 2;
        if (used[u] || size > count) continue;
        state.board[a.index()] = kind;
        state.board[b.index()] = kind;
        used[u] = 1;
        count -= size;
      }
      return count == 0;
    };
    const bool ok = place(Cell::RigidWall, config.rigid_walls) &&
                    place(Cell::WoodenWall, config.wooden_walls);
    if (ok && detail::corners_connected(state.board)) break;
    if (attempt > 10000) {
      throw std::runtime_error("could not generate a connected board");
    }
  }

  state.items.fill(Powerup::None);
  for (int i = 0; i < kNumCells; ++i) {
    if (state.board[i] != Cell::WoodenWall) continue;
    if (rng.bernoulli(config.powerup_probability)) {
      state.items[i] = static_cast<Powerup>(1 + rng.uniform_int(3));
    }
  }

  state.flames.fill(0);
  for (int id = 0; id < kNumAgents; ++id) {
    AgentState& a = state.agents[id];
    a = AgentState{};
    a.id = id;
    a.position = kStartCorners[id];
  }
  return state;
}

inline std::optional<Outcome> terminal_status(const GameState& state) {
  const bool team0 = state.agents[0].alive || state.agents[2].alive;
  const bool team1 = state.agents[1].alive || state.agents[3].alive;
  if (!team0 && !team1) return Outcome::Tie;
  if (team0 && !team1) return Outcome::Team0Wins;
  if (!team0 && team1) return Outcome::Team1Wins;
  if (state.tick >= kMaxTicks) return Outcome::Tie;
  return std::nullopt;
}

struct ExplosionReport {
  std::vector<Position> exploded;
  CellSet new_flames;
};

/// Detonates every bomb whose life reached 0 or that sits on a flame, then
/// every bomb caught by those blasts, until no further bomb is reached. All
/// blasts of one call are blocked by the walls as they stood before it.
inline ExplosionReport resolve_explosions(GameState& state) {
  ExplosionReport report;
  const std::size_t n = state.bombs.size();
  std::vector<char> exploding(n, 0);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i) {
    const Bomb& b = state.bombs[i];
    if (b.life <= 0 || state.flames[b.position.index()] > 0) {
      exploding[i] = 1;
      pending.push_back(i);
    }
  }
  while (!pending.empty()) {
    const Bomb& b = state.bombs[pending.back()];
    pending.pop_back();
    report.new_flames |= blast_cells(state.board, b.position, b.blast_strength);
    for (std::size_t j = 0; j < n; ++j) {
      if (!exploding[j] && report.new_flames.test(state.bombs[j].position.index())) {
        exploding[j] = 1;
        pending.push_back(j);
      }
    }
  }
  if (report.new_flames.none()) return report;

  for (int i = 0; i < kNumCells; ++i) {
    if (!report.new_flames.test(i)) continue;
    if (state.board[i] == Cell::WoodenWall) state.board[i] = Cell::Passage;
    state.flames[i] = kFlameLife;
  }
  std::vector<Bomb> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Bomb& b = state.bombs[i];
    if (exploding[i]) {
      report.exploded.push_back(b.position);
      AgentState& owner = state.agents[b.owner];
      owner.ammo = std::min(owner.ammo + 1, owner.ammo_capacity);
    } else {
      kept.push_back(b);
    }
  }
  state.bombs = std::move(kept);
  return report;
}

namespace detail {

inline void advance_bombs(GameState& state) {
  for (Bomb& b : state.bombs) --b.life;
  const std::size_t n = state.bombs.size();
  std::vector<Position> dest(n);
  std::vector<char> moving(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Bomb& b = state.bombs[i];
    if (b.velocity == Action::Stop) continue;
    dest[i] = moved(b.position, b.velocity);
    moving[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!moving[i]) continue;
    const Position d = dest[i];
    bool blocked = !d.in_bounds() || state.board[d.index()] != Cell::Passage ||
                   state.bomb_index_at(d) >= 0;
    for (const AgentState& a : state.agents) {
      blocked = blocked || (a.alive && a.position == d);
    }
    for (std::size_t j = 0; j < n && !blocked; ++j) {
      blocked = j != i && moving[j] && dest[j] == d;
    }
    if (blocked) state.bombs[i].velocity = Action::Stop;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Bomb& b = state.bombs[i];
    if (moving[i] && b.velocity != Action::Stop) b.position = dest[i];
  }
}

// Simultaneous movement. Every rejection turns a mover into a stayer, so the
// loop reaches a fixed point in at most kNumAgents rounds.
inline void resolve_movement(GameState& state,
                             const std::array<Action, kNumAgents>& actions) {
  std::array<bool, kNumAgents> moving{};
  std::array<Position, kNumAgents> target{};
  for (int i = 0; i < kNumAgents; ++i) {
    const AgentState& a = state.agents[i];
    target[i] = a.position;
    if (!a.alive || !is_move(actions[i])) continue;
    const Position t = moved(a.position, actions[i]);
    if (!t.in_bounds() || state.board[t.index()] != Cell::Passage) continue;
    moving[i] = true;
    target[i] = t;
  }
  std::array<int, kNumAgents> kicked_bomb{-1, -1, -1, -1};
  std::array<Position, kNumAgents> kick_dest{};

  auto final_cell = [&](int j) {
    return moving[j] ? target[j] : state.agents[j].position;
  };

  for (bool changed = true; changed;) {
    changed = false;
    // Rejections of one round are judged against the same snapshot.
    std::array<bool, kNumAgents> reject_now{};
    for (int i = 0; i < kNumAgents; ++i) {
      kicked_bomb[i] = -1;
      if (!moving[i]) continue;
      const AgentState& a = state.agents[i];
      bool reject = false;
      for (int j = 0; j < kNumAgents && !reject; ++j) {
        if (j == i || !state.agents[j].alive) continue;
        const AgentState& b = state.agents[j];
        if (moving[j]) {
          reject = target[j] == target[i] ||
                   (target[j] == a.position && target[i] == b.position);
        } else {
          reject = b.position == target[i];
        }
      }
      if (!reject) {
        const int bomb = state.bomb_index_at(target[i]);
        if (bomb >= 0) {
          const Position d = moved(target[i], actions[i]);
          reject = !a.can_kick || !d.in_bounds() ||
                   state.board[d.index()] != Cell::Passage ||
                   state.bomb_index_at(d) >= 0;
          for (int j = 0; j < kNumAgents && !reject; ++j) {
            reject = state.agents[j].alive && final_cell(j) == d;
          }
          if (!reject) {
            kicked_bomb[i] = bomb;
            kick_dest[i] = d;
          }
        }
      }
      reject_now[i] = reject;
    }
    for (int i = 0; i < kNumAgents; ++i) {
      if (reject_now[i]) {
        moving[i] = false;
        changed = true;
      }
    }
    // Two kicks into the same cell both fail.
    for (int i = 0; i < kNumAgents && !changed; ++i) {
      for (int j = i + 1; j < kNumAgents; ++j) {
        if (kicked_bomb[i] >= 0 && kicked_bomb[j] >= 0 &&
            kick_dest[i] == kick_dest[j]) {
          moving[i] = moving[j] = false;
          changed = true;
        }
      }
    }
  }

  for (int i = 0; i < kNumAgents; ++i) {
    if (!moving[i]) continue;
    state.agents[i].position = target[i];
    if (kicked_bomb[i] >= 0) {
      Bomb& b = state.bombs[kicked_bomb[i]];
      b.position = kick_dest[i];
      b.velocity = actions[i];
    }
  }
}

}  // namespace detail

/// Advances `state` by one tick in place. Throws on a terminal state.
inline StepEvents step_in_place(GameState& state,
                                const std::array<Action, kNumAgents>& actions) {
  if (terminal_status(state)) {
    throw std::logic_error("step called on a terminal state");
  }
  StepEvents events;
  for (int i = 0; i < kNumAgents; ++i) {
    events.actions[i] = state.agents[i].alive ? actions[i] : Action::Stop;
  }

  detail::advance_bombs(state);
  detail::resolve_movement(state, events.actions);

  for (AgentState& a : state.agents) {
    if (!a.alive || events.actions[a.id] != Action::PlaceBomb) continue;
    if (a.ammo <= 0 || state.bomb_index_at(a.position) >= 0) continue;
    Bomb b;
    b.position = a.position;
    b.life = kBombLife;
    b.blast_strength = a.blast_strength;
    b.owner = a.id;
    state.bombs.push_back(b);
    events.bombs_placed.push_back(b);
    --a.ammo;
  }

  events.explosions = resolve_explosions(state).exploded;

  for (int i = 0; i < kNumCells; ++i) {
    if (state.flames[i] > 0) events.lethal_cells.set(i);
  }
  for (AgentState& a : state.agents) {
    if (a.alive && events.lethal_cells.test(a.position.index())) {
      a.alive = false;
      events.deaths.push_back(a.id);
    }
  }

  for (auto& f : state.flames) {
    if (f > 0) --f;
  }

  for (AgentState& a : state.agents) {
    if (!a.alive) continue;
    Powerup& item = state.items[a.position.index()];
    if (item == Powerup::None) continue;
    switch (item) {
      case Powerup::ExtraBomb:
        ++a.ammo_capacity;
        ++a.ammo;
        break;
      case Powerup::IncrRange: ++a.blast_strength; break;
      case Powerup::Kick: a.can_kick = true; break;
      case Powerup::None: break;
    }
    events.pickups.push_back({a.id, item});
    item = Powerup::None;
  }

  ++state.tick;
  events.outcome = terminal_status(state);
  return events;
}

inline std::pair<GameState, StepEvents> step(
    GameState state, const std::array<Action, kNumAgents>& actions) {
  StepEvents events = step_in_place(state, actions);
  return {std::move(state), std::move(events)};
}

/// Order-sensitive digest of a state; used to fingerprint replays.
inline std::uint64_t state_hash(const GameState& s) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(s.tick));
  auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  for (int i = 0; i < kNumCells; ++i) {
    feed((static_cast<std::uint64_t>(s.board[i]) << 16) |
         (static_cast<std::uint64_t>(s.items[i]) << 8) | s.flames[i]);
  }
  for (const AgentState& a : s.agents) {
    feed(static_cast<std::uint64_t>(a.position.index()) |
         (static_cast<std::uint64_t>(a.alive) << 8) |
         (static_cast<std::uint64_t>(a.ammo) << 16) |
         (static_cast<std::uint64_t>(a.ammo_capacity) << 24) |
         (static_cast<std::uint64_t>(a.blast_strength) << 32) |
         (static_cast<std::uint64_t>(a.can_kick) << 40));
  }
  for (const Bomb& b : s.bombs) {
    feed(static_cast<std::uint64_t>(b.position.index()) |
         (static_cast<std::uint64_t>(b.life) << 8) |
         (static_cast<std::uint64_t>(b.blast_strength) << 16) |
         (static_cast<std::uint64_t>(b.owner) << 24) |
         (static_cast<std::uint64_t>(b.velocity) << 32));
  }
  return h;
}

}  // namespace pommer

#endif  // POMMER_ENGINE_HPP_
