#ifndef POMMER_REPLAY_HPP_
#define POMMER_REPLAY_HPP_

// Replay file: one JSON object per line.
//
//   {"type":"header","version":1,"seed":..,"config_hash":"<hex>",
//    "agents":[4 names],"board":{...}}
//   {"tick":t,"actions":[4 ints],"deaths":[ids],"bombs":[[r,c],..]}   per tick;
//        the last tick record also carries "outcome"
//   {"type":"footer","ticks":n,"actions_digest":"<hex>",
//    "final_state":"<hex>","death_tick":[4 ints]}
//
// The footer digests make any edit to the action stream detectable even when
// the edited action happens to leave the game unchanged.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pommer/binary_io.hpp"
#include "pommer/engine.hpp"
#include "pommer/match.hpp"

namespace pommer {

inline constexpr int kReplayVersion = 1;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw FileFormatError("bad hex digest '" + s + "'");
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    throw FileFormatError("bad hex digest '" + s + "'");
  }
  if (used != s.size()) throw FileFormatError("bad hex digest '" + s + "'");
  return v;
}

struct ReplayTick {
  int tick = 0;
  std::array<Action, kNumAgents> actions{};
  std::vector<int> deaths;
  std::vector<Position> bombs;
  std::optional<Outcome> outcome;
};

struct Replay {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::array<std::string, kNumAgents> agents;
  BoardConfig board;
  std::vector<ReplayTick> ticks;
  std::uint64_t actions_digest = 0;
  std::uint64_t final_state = 0;
  std::array<int, kNumAgents> death_tick{-1, -1, -1, -1};
};

/// FNV-1a over the action bytes in tick order.
inline std::uint64_t actions_digest(const std::vector<ReplayTick>& ticks) {
  std::string bytes;
  bytes.reserve(ticks.size() * kNumAgents);
  for (const ReplayTick& t : ticks) {
    for (const Action a : t.actions) bytes.push_back(static_cast<char>(a));
  }
  return fnv1a(bytes);
}

/// Step hook for play_game() that fills a Replay.
class ReplayRecorder {
 public:
  explicit ReplayRecorder(Replay& replay) : replay_(&replay) {}

  void operator()(const GameState& before, const std::array<Action, kNumAgents>& actions,
                  const StepEvents& events) {
    ReplayTick t;
    t.tick = before.tick;
    t.actions = actions;
    t.deaths = events.deaths;
    for (const Bomb& b : events.bombs_placed) t.bombs.push_back(b.position);
    t.outcome = events.outcome;
    replay_->ticks.push_back(std::move(t));
  }

 private:
  Replay* replay_;
};

inline void finish_replay(Replay& replay, const GameResult& result) {
  replay.actions_digest = actions_digest(replay.ticks);
  replay.final_state = state_hash(result.final_state);
  replay.death_tick = result.death_tick;
}

inline void write_replay(const std::filesystem::path& path, const Replay& r) {
  using nlohmann::json;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  json header = {{"type", "header"},
                 {"version", kReplayVersion},
                 {"seed", r.seed},
                 {"config_hash", hex64(r.config_hash)},
                 {"agents", r.agents},
                 {"board",
                  {{"rigid_walls", r.board.rigid_walls},
                   {"wooden_walls", r.board.wooden_walls},
                   {"powerup_probability", r.board.powerup_probability}}}};
  out << header.dump() << "\n";
  for (const ReplayTick& t : r.ticks) {
    json rec;
    rec["tick"] = t.tick;
    json actions = json::array();
    for (const Action a : t.actions) actions.push_back(static_cast<int>(a));
    rec["actions"] = actions;
    rec["deaths"] = t.deaths;
    json bombs = json::array();
    for (const Position p : t.bombs) bombs.push_back({p.row, p.col});
    rec["bombs"] = bombs;
    if (t.outcome) rec["outcome"] = std::string(outcome_name(*t.outcome));
    out << rec.dump() << "\n";
  }
  json footer = {{"type", "footer"},
                 {"ticks", r.ticks.size()},
                 {"actions_digest", hex64(r.actions_digest)},
                 {"final_state", hex64(r.final_state)},
                 {"death_tick", r.death_tick}};
  out << footer.dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Outcome outcome_from_name(const std::string& s) {
  for (const Outcome o : {Outcome::Team0Wins, Outcome::Team1Wins, Outcome::Tie}) {
    if (outcome_name(o) == s) return o;
  }
  throw FileFormatError("unknown outcome '" + s + "'");
}

/// Parses a replay file. Throws FileFormatError on malformed content.
inline Replay read_replay(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open " + path.string());
  Replay r;
  std::string line;
  int line_no = 0;
  bool have_header = false, have_footer = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (have_footer) throw FileFormatError("content after footer");
      const json j = json::parse(line);
      if (!have_header) {
        if (j.at("type") != "header") throw FileFormatError("missing header");
        if (j.at("version").get<int>() != kReplayVersion) {
          throw FileFormatError("unsupported replay version");
        }
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
        const auto names = j.at("agents").get<std::vector<std::string>>();
        if (names.size() != kNumAgents) throw FileFormatError("need four agent names");
        for (int i = 0; i < kNumAgents; ++i) r.agents[i] = names[i];
        const json& b = j.at("board");
        r.board.rigid_walls = b.at("rigid_walls").get<int>();
        r.board.wooden_walls = b.at("wooden_walls").get<int>();
        r.board.powerup_probability = b.at("powerup_probability").get<double>();
        have_header = true;
        continue;
      }
      if (j.contains("type")) {
        if (j.at("type") != "footer") throw FileFormatError("unexpected record type");
        if (j.at("ticks").get<std::size_t>() != r.ticks.size()) {
          throw FileFormatError("tick count mismatch");
        }
        r.actions_digest = parse_hex64(j.at("actions_digest").get<std::string>());
        r.final_state = parse_hex64(j.at("final_state").get<std::string>());
        const auto dt = j.at("death_tick").get<std::vector<int>>();
        if (dt.size() != kNumAgents) throw FileFormatError("bad death_tick");
        for (int i = 0; i < kNumAgents; ++i) r.death_tick[i] = dt[i];
        have_footer = true;
        continue;
      }
      ReplayTick t;
      t.tick = j.at("tick").get<int>();
      const auto actions = j.at("actions").get<std::vector<int>>();
      if (actions.size() != kNumAgents) throw FileFormatError("need four actions");
      for (int i = 0; i < kNumAgents; ++i) {
        if (actions[i] < 0 || actions[i] >= kNumActions) {
          throw FileFormatError("action out of range");
        }
        t.actions[i] = static_cast<Action>(actions[i]);
      }
      t.deaths = j.at("deaths").get<std::vector<int>>();
      for (const auto& b : j.at("bombs")) {
        t.bombs.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
      }
      if (j.contains("outcome")) t.outcome = outcome_from_name(j.at("outcome").get<std::string>());
      r.ticks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FileFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header || !have_footer) throw FileFormatError("truncated replay");
  return r;
}

struct ReplayCheck {
  bool ok = true;
  std::string message;
  std::optional<Outcome> outcome;
  GameState final_state;
};

/// Re-simulates from the header seed and the action stream and compares
/// every recorded event and digest.
inline ReplayCheck verify_replay(const Replay& r) {
  ReplayCheck c;
  auto fail = [&c](std::string msg) {
    c.ok = false;
    c.message = std::move(msg);
    return c;
  };
  if (actions_digest(r.ticks) != r.actions_digest) return fail("action stream digest mismatch");
  GameState state = generate_board(board_seed(r.seed), r.board);
  std::array<int, kNumAgents> death_tick{-1, -1, -1, -1};
  for (std::size_t i = 0; i < r.ticks.size(); ++i) {
    const ReplayTick& t = r.ticks[i];
    const std::string where = "tick " + std::to_string(t.tick) + ": ";
    if (t.tick != state.tick) return fail(where + "out of sequence");
    if (terminal_status(state)) return fail(where + "game already over");
    const StepEvents ev = step_in_place(state, t.actions);
    if (ev.actions != t.actions) return fail(where + "action recorded for a dead agent");
    if (ev.deaths != t.deaths) return fail(where + "deaths differ");
    std::vector<Position> bombs;
    for (const Bomb& b : ev.bombs_placed) bombs.push_back(b.position);
    if (bombs != t.bombs) return fail(where + "bomb placements differ");
    if (ev.outcome != t.outcome) return fail(where + "outcome differs");
    for (const int d : ev.deaths) death_tick[d] = t.tick;
  }
  if (!terminal_status(state)) return fail("replay ends before the game does");
  if (death_tick != r.death_tick) return fail("death ticks differ");
  if (state_hash(state) != r.final_state) return fail("final state digest mismatch");
  c.outcome = terminal_status(state);
  c.final_state = std::move(state);
  return c;
}

}  // namespace pommer

#endif  // POMMER_REPLAY_HPP_
