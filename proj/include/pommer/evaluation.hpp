#ifndef POMMER_EVALUATION_HPP_
#define POMMER_EVALUATION_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pommer/match.hpp"
#include "pommer/parallel.hpp"
#include "pommer/registry.hpp"
#include "pommer/replay.hpp"

namespace pommer {

struct MatchResult {
  Outcome outcome = Outcome::Tie;
  int length = 0;
  std::array<int, kNumAgents> death_tick{-1, -1, -1, -1};
  std::string replay_path;

  bool operator==(const MatchResult&) const = default;
};

struct MatchOptions {
  BoardConfig board;
  std::uint64_t config_hash = 0;
  std::optional<std::filesystem::path> replay_path;
};

/// Team A takes seats 0 and 2, team B seats 1 and 3.
inline MatchResult run_match(const AgentCatalog& catalog,
                             const std::array<std::string, 2>& team_a,
                             const std::array<std::string, 2>& team_b, std::uint64_t seed,
                             const MatchOptions& options = {}) {
  const std::array<std::string, kNumAgents> names = {team_a[0], team_b[0], team_a[1],
                                                     team_b[1]};
  std::array<AgentPtr, kNumAgents> agents;
  std::array<Agent*, kNumAgents> seats{};
  for (int i = 0; i < kNumAgents; ++i) {
    agents[i] = catalog.make(names[i]);
    seats[i] = agents[i].get();
  }
  Replay replay;
  replay.seed = seed;
  replay.config_hash = options.config_hash;
  replay.agents = names;
  replay.board = options.board;
  GameResult g;
  if (options.replay_path) {
    g = play_game(seats, seed, options.board, ReplayRecorder(replay));
    finish_replay(replay, g);
    write_replay(*options.replay_path, replay);
  } else {
    g = play_game(seats, seed, options.board);
  }
  MatchResult m;
  m.outcome = g.outcome;
  m.length = g.length;
  m.death_tick = g.death_tick;
  if (options.replay_path) m.replay_path = options.replay_path->string();
  return m;
}

/// One opponent row of a win/loss/tie table.
struct WLTRow {
  std::string learner;
  std::string opponent;
  int games = 0;
  int wins = 0;
  int losses = 0;
  int ties = 0;

  double win_rate() const { return games ? static_cast<double>(wins) / games : 0.0; }
  double loss_rate() const { return games ? static_cast<double>(losses) / games : 0.0; }
  double tie_rate() const { return games ? static_cast<double>(ties) / games : 0.0; }
};

struct TournamentOptions {
  BoardConfig board;
  std::uint64_t config_hash = 0;
  int workers = 1;
  std::optional<std::filesystem::path> replay_dir;
};

inline std::uint64_t tournament_game_seed(std::uint64_t base_seed, int game) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(game));
}

/// Side the learner plays in game `i`: team 0 on even games.
inline int learner_team_in_game(int i) { return i % 2; }

/// `n` games of a learner pair against an opponent pair. Game i uses its own
/// derived seed; the learner pair alternates between the two diagonal corner
/// pairs every game.
inline WLTRow tournament(const AgentCatalog& catalog, const std::string& learner,
                         const std::string& opponent, int n, std::uint64_t base_seed,
                         const TournamentOptions& options = {},
                         std::vector<MatchResult>* results = nullptr) {
  if (n < 1) throw std::invalid_argument("tournament needs at least one game");
  catalog.validate(learner);
  catalog.validate(opponent);
  if (options.replay_dir) std::filesystem::create_directories(*options.replay_dir);
  std::vector<MatchResult> games(n);
  parallel_for(static_cast<std::size_t>(n), options.workers, [&](std::size_t i) {
    const int gi = static_cast<int>(i);
    const std::array<std::string, 2> l = {learner, learner};
    const std::array<std::string, 2> o = {opponent, opponent};
    MatchOptions mo;
    mo.board = options.board;
    mo.config_hash = options.config_hash;
    if (options.replay_dir) {
      std::ostringstream name;
      name << "game_" << gi << ".jsonl";
      mo.replay_path = *options.replay_dir / name.str();
    }
    const std::uint64_t seed = tournament_game_seed(base_seed, gi);
    games[i] = learner_team_in_game(gi) == 0 ? run_match(catalog, l, o, seed, mo)
                                             : run_match(catalog, o, l, seed, mo);
  });
  WLTRow row{learner, opponent, n};
  for (int i = 0; i < n; ++i) {
    const Outcome o = games[i].outcome;
    if (o == Outcome::Tie) {
      ++row.ties;
    } else if ((o == Outcome::Team0Wins) == (learner_team_in_game(i) == 0)) {
      ++row.wins;
    } else {
      ++row.losses;
    }
  }
  if (results) *results = std::move(games);
  return row;
}

inline nlohmann::json row_json(const WLTRow& r, std::uint64_t config_hash) {
  auto r3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
  return {{"learner", r.learner},     {"opponent", r.opponent},
          {"games", r.games},         {"win", r3(r.win_rate())},
          {"loss", r3(r.loss_rate())}, {"tie", r3(r.tie_rate())},
          {"wins", r.wins},           {"losses", r.losses},
          {"ties", r.ties},           {"config_hash", hex64(config_hash)}};
}

// Filter sensitivity: each filtered variant minus the unfiltered one.

struct RateDelta {
  double win = 0, loss = 0, tie = 0;
};

/// tables[variant][opponent]. `vanilla` names the unfiltered variant; every
/// variant must cover the same opponents.
inline std::map<std::string, std::map<std::string, RateDelta>> filter_sensitivity(
    const std::map<std::string, std::map<std::string, WLTRow>>& tables,
    const std::string& vanilla) {
  auto base_it = tables.find(vanilla);
  if (base_it == tables.end()) throw std::invalid_argument("no table for " + vanilla);
  const auto& base = base_it->second;
  std::map<std::string, std::map<std::string, RateDelta>> out;
  for (const auto& [variant, rows] : tables) {
    if (rows.size() != base.size()) {
      throw std::invalid_argument("mismatched opponent sets for " + variant);
    }
    for (const auto& [opponent, row] : rows) {
      auto b = base.find(opponent);
      if (b == base.end()) throw std::invalid_argument("mismatched opponent sets for " + variant);
      out[variant][opponent] = {row.win_rate() - b->second.win_rate(),
                                row.loss_rate() - b->second.loss_rate(),
                                row.tie_rate() - b->second.tie_rate()};
    }
  }
  return out;
}

/// One-sided test that proportion 1 exceeds proportion 2 (pooled z-test).
/// Returns the p-value.
inline double one_sided_p_greater(int x1, int n1, int x2, int n2) {
  if (n1 <= 0 || n2 <= 0) throw std::invalid_argument("empty sample");
  const double p1 = static_cast<double>(x1) / n1, p2 = static_cast<double>(x2) / n2;
  const double pooled = static_cast<double>(x1 + x2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (se == 0.0) return p1 > p2 ? 0.0 : 1.0;
  const double z = (p1 - p2) / se;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

// Heatmaps.

using CountGrid = std::array<std::array<std::int64_t, kBoardSize>, kBoardSize>;

struct Heatmaps {
  CountGrid position{};
  CountGrid bombs{};
  std::int64_t alive_ticks = 0;
  std::int64_t bombs_placed = 0;
  int replays = 0;
};

/// Reflects a cell so that `corner`'s start position maps to the top left.
inline Position normalize_to_top_left(Position p, int agent_id) {
  const Position start = kStartCorners[agent_id];
  if (start.row != 0) p.row = kBoardSize - 1 - p.row;
  if (start.col != 0) p.col = kBoardSize - 1 - p.col;
  return p;
}

/// Adds one replay for the agent in seat `learner_id`. Positions are counted
/// for every tick the agent starts alive; bombs at every placement it makes.
inline void accumulate_heatmaps(Heatmaps& h, const Replay& r, int learner_id) {
  GameState state = generate_board(board_seed(r.seed), r.board);
  for (const ReplayTick& t : r.ticks) {
    const AgentState& me = state.agents[learner_id];
    if (me.alive) {
      const Position p = normalize_to_top_left(me.position, learner_id);
      ++h.position[p.row][p.col];
      ++h.alive_ticks;
    }
    const StepEvents ev = step_in_place(state, t.actions);
    for (const Bomb& b : ev.bombs_placed) {
      if (b.owner != learner_id) continue;
      const Position p = normalize_to_top_left(b.position, learner_id);
      ++h.bombs[p.row][p.col];
      ++h.bombs_placed;
    }
  }
  ++h.replays;
}

/// First seat whose agent is named `learner`, or -1.
inline int learner_seat(const Replay& r, const std::string& learner) {
  for (int i = 0; i < kNumAgents; ++i) {
    if (r.agents[i] == learner) return i;
  }
  return -1;
}

/// Fraction of position mass outside the learner's home quadrant (the 6x6
/// block at the normalized top left).
inline double mass_outside_home(const CountGrid& g) {
  std::int64_t total = 0, home = 0;
  for (int r = 0; r < kBoardSize; ++r) {
    for (int c = 0; c < kBoardSize; ++c) {
      total += g[r][c];
      if (r <= kBoardSize / 2 && c <= kBoardSize / 2) home += g[r][c];
    }
  }
  return total ? 1.0 - static_cast<double>(home) / total : 0.0;
}

inline nlohmann::json grid_json(const CountGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : g) rows.push_back(row);
  return rows;
}

// Rolling reward.

/// Sliding-window means in order. With at least `window` values the series
/// holds one mean per full window; with fewer it holds the prefix means.
inline std::vector<double> rolling_reward(const std::vector<double>& rewards, int window) {
  if (rewards.empty()) throw std::invalid_argument("rolling_reward: empty log");
  if (window < 1) throw std::invalid_argument("rolling_reward: window must be positive");
  const std::size_t w = static_cast<std::size_t>(window);
  std::vector<double> out;
  if (rewards.size() < w) {
    double sum = 0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      sum += rewards[i];
      out.push_back(sum / static_cast<double>(i + 1));
    }
    return out;
  }
  // Recomputed per window rather than with a running sum so long series do
  // not accumulate rounding drift.
  for (std::size_t end = w; end <= rewards.size(); ++end) {
    double sum = 0;
    for (std::size_t i = end - w; i < end; ++i) sum += rewards[i];
    out.push_back(sum / static_cast<double>(w));
  }
  return out;
}

}  // namespace pommer

#endif  // POMMER_EVALUATION_HPP_
