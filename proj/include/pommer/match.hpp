#ifndef POMMER_MATCH_HPP_
#define POMMER_MATCH_HPP_

#include <array>
#include <cstdint>

#include "pommer/agent.hpp"
#include "pommer/random.hpp"

namespace pommer {

struct GameResult {
  Outcome outcome = Outcome::Tie;
  int length = 0;
  std::array<int, kNumAgents> death_tick{-1, -1, -1, -1};
  GameState final_state;
};

/// Per-game seeds. Board and agents draw from separate streams.
inline std::uint64_t board_seed(std::uint64_t game_seed) {
  return derive_seed(game_seed, "board");
}
inline std::uint64_t agent_seed(std::uint64_t game_seed, int seat) {
  return derive_seed(derive_seed(game_seed, "agent"), static_cast<std::uint64_t>(seat));
}

struct NoStepHook {
  void operator()(const GameState&, const std::array<Action, kNumAgents>&,
                  const StepEvents&) const {}
};

/// Plays one game to the end. `seats[i]` controls agent i. `on_step` sees the
/// state before each tick, the executed actions and the tick's events.
template <typename OnStep = NoStepHook>
GameResult play_game(const std::array<Agent*, kNumAgents>& seats, std::uint64_t seed,
                     const BoardConfig& config = {}, OnStep&& on_step = {}) {
  for (int i = 0; i < kNumAgents; ++i) seats[i]->reset(agent_seed(seed, i));
  GameState state = generate_board(board_seed(seed), config);
  GameResult result;
  while (!terminal_status(state)) {
    std::array<Action, kNumAgents> actions{};
    for (int i = 0; i < kNumAgents; ++i) {
      if (state.agents[i].alive) actions[i] = seats[i]->act(observe(state, i));
    }
    const GameState before = state;
    const StepEvents events = step_in_place(state, actions);
    for (const int d : events.deaths) result.death_tick[d] = before.tick;
    on_step(before, events.actions, events);
  }
  result.outcome = *terminal_status(state);
  result.length = state.tick;
  result.final_state = std::move(state);
  return result;
}

}  // namespace pommer

#endif  // POMMER_MATCH_HPP_
