#ifndef POMMER_THREAT_HPP_
#define POMMER_THREAT_HPP_

// Forecast of which cells hold flames over the next ticks, computed from what
// an agent can see. Step 1 is the next engine tick.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pommer/observation.hpp"

namespace pommer {

inline constexpr int kMaxForecastSteps = 31;

/// Step at which each bomb detonates, counting chains: a bomb on a flame goes
/// off at step 1, and a bomb inside an earlier blast goes off with it.
inline std::vector<int> detonation_steps(const Grid& board, const FlameGrid& flames,
                                         std::span<const Bomb> bombs) {
  const std::size_t n = bombs.size();
  std::vector<int> when(n);
  std::vector<CellSet> reach(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Bomb& b = bombs[i];
    when[i] = flames[b.position.index()] > 0 ? 1 : std::max(b.life, 1);
    reach[i] = blast_cells(board, b.position, b.blast_strength);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (when[i] < when[j] && reach[i].test(bombs[j].position.index())) {
          when[j] = when[i];
          changed = true;
        }
      }
    }
  }
  return when;
}

/// Bit k-1 of cells[i] is set when cell i holds flames during step k.
struct ThreatMap {
  std::array<std::uint32_t, kNumCells> cells{};

  bool lethal_at(Position p, int step) const {
    return step >= 1 && step <= kMaxForecastSteps &&
           ((cells[p.index()] >> (step - 1)) & 1u);
  }
  /// Any flames during steps 1..horizon.
  bool threatened_within(Position p, int horizon) const {
    if (horizon <= 0) return false;
    const std::uint32_t mask =
        horizon >= 32 ? ~0u : ((1u << horizon) - 1u);
    return (cells[p.index()] & mask) != 0;
  }
  /// No flames at `step` or later.
  bool clear_from(Position p, int step) const {
    if (step > kMaxForecastSteps) return true;
    return (cells[p.index()] >> (step - 1)) == 0;
  }
  bool threatened(Position p) const { return cells[p.index()] != 0; }
};

inline ThreatMap threat_map(const Grid& board, const FlameGrid& flames,
                            std::span<const Bomb> bombs) {
  ThreatMap map;
  auto mark = [&](int cell, int from, int count) {
    for (int s = from; s < from + count && s <= kMaxForecastSteps; ++s) {
      map.cells[cell] |= 1u << (s - 1);
    }
  };
  for (int i = 0; i < kNumCells; ++i) {
    if (flames[i] > 0) mark(i, 1, flames[i]);
  }
  const std::vector<int> when = detonation_steps(board, flames, bombs);
  for (std::size_t i = 0; i < bombs.size(); ++i) {
    for_each_blast_cell(board, bombs[i].position, bombs[i].blast_strength,
                        [&](Position p) { mark(p.index(), when[i], kFlameLife); });
  }
  return map;
}

/// Cell a sliding bomb will occupy after the next tick, judged from the view.
inline Position projected_position(const RawObservation& obs, const Bomb& b) {
  if (b.velocity == Action::Stop) return b.position;
  const Position d = moved(b.position, b.velocity);
  if (!d.in_bounds() || obs.board[d.index()] != Cell::Passage ||
      obs.bomb_index_at(d) >= 0 || obs.agent_at(d) >= 0) {
    return b.position;
  }
  return d;
}

inline std::vector<Bomb> projected_bombs(const RawObservation& obs) {
  std::vector<Bomb> out = obs.bombs;
  for (Bomb& b : out) b.position = projected_position(obs, b);
  return out;
}

inline ThreatMap threat_map(const RawObservation& obs, std::span<const Bomb> bombs) {
  return threat_map(obs.board, obs.flames, bombs);
}

}  // namespace pommer

#endif  // POMMER_THREAT_HPP_
