#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "pommer/evaluation.hpp"

namespace pommer {
namespace {

namespace fs = std::filesystem;

class EvalDir : public ::testing::Test {
 protected:
  fs::path dir_ = fs::temp_directory_path() /
                  ("pommer_eval_" + std::to_string(::getpid()) + "_" +
                   ::testing::UnitTest::GetInstance()->current_test_info()->name());
  void SetUp() override { fs::create_directories(dir_); }
  void TearDown() override { fs::remove_all(dir_); }
};

TEST(RunMatch, StaticTeamsAlwaysTieAtLimit) {
  AgentCatalog cat;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MatchResult m = run_match(cat, {"StaticAgent", "StaticAgent"},
                                    {"StaticAgent", "StaticAgent"}, seed);
    EXPECT_EQ(m.outcome, Outcome::Tie);
    EXPECT_EQ(m.length, kMaxTicks);
    for (int d : m.death_tick) EXPECT_EQ(d, -1);
  }
}

TEST(RunMatch, Deterministic) {
  AgentCatalog cat;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = run_match(cat, {"SimpleAgent", "RandomAgent"},
                             {"SimpleAgent_jitter_action", "SimpleAgent"}, seed);
    const auto b = run_match(cat, {"SimpleAgent", "RandomAgent"},
                             {"SimpleAgent_jitter_action", "SimpleAgent"}, seed);
    EXPECT_EQ(a, b);
  }
}

TEST(RunMatch, UnknownNamesRejected) {
  AgentCatalog cat;
  EXPECT_THROW(run_match(cat, {"Nobody", "StaticAgent"}, {"StaticAgent", "StaticAgent"}, 1),
               UnknownAgent);
  // Network agents need a loaded policy.
  EXPECT_THROW(cat.validate("Imitation_jitter"), UnknownAgent);
  EXPECT_THROW(cat.validate("StaticAgent_sideways"), UnknownAgent);
  cat.validate("StaticAgent_Vanilla");
  cat.validate("SimpleAgent_jitter_action");
}

TEST(RunMatch, SimpleBeatsStaticMajority) {
  AgentCatalog cat;
  const WLTRow row = tournament(cat, "SimpleAgent", "StaticAgent", 200, 17, {.workers = 0});
  EXPECT_GT(row.wins, 100);
}

TEST(Tournament, RatesPartitionAndSeedsDistinct) {
  AgentCatalog cat;
  std::vector<MatchResult> results;
  const WLTRow row =
      tournament(cat, "SimpleAgent", "RandomAgent", 40, 3, {.workers = 2}, &results);
  EXPECT_EQ(row.wins + row.losses + row.ties, 40);
  EXPECT_NEAR(row.win_rate() + row.loss_rate() + row.tie_rate(), 1.0, 1e-9);
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 40; ++i) seeds.insert(tournament_game_seed(3, i));
  EXPECT_EQ(seeds.size(), 40u);
  const auto j = row_json(row, 0xabc);
  EXPECT_EQ(j["games"], 40);
  EXPECT_DOUBLE_EQ(j["win"].get<double>(), std::round(row.win_rate() * 1000) / 1000);
}

TEST(Tournament, WorkersDoNotChangeResults) {
  AgentCatalog cat;
  std::vector<MatchResult> a, b;
  tournament(cat, "SimpleAgent", "SimpleAgent_NoBomb", 12, 8, {.workers = 1}, &a);
  tournament(cat, "SimpleAgent", "SimpleAgent_NoBomb", 12, 8, {.workers = 3}, &b);
  EXPECT_EQ(a, b);
}

TEST(Tournament, MirrorMatchIsBalanced) {
  AgentCatalog cat;
  const WLTRow row = tournament(cat, "SimpleAgent", "SimpleAgent", 400, 21, {.workers = 0});
  // Under symmetry each game contributes +1, -1 or 0 to wins - losses with
  // mean zero and variance (wins + losses) / n.
  const double sd = std::sqrt(static_cast<double>(row.wins + row.losses));
  EXPECT_LE(std::abs(row.wins - row.losses), 3.0 * sd) << row.wins << " " << row.losses;
}

TEST(Tournament, NeedsGames) {
  AgentCatalog cat;
  EXPECT_THROW(tournament(cat, "StaticAgent", "StaticAgent", 0, 1), std::invalid_argument);
}

WLTRow row_of(int w, int l, int t) { return {"x", "y", w + l + t, w, l, t}; }

TEST(FilterSensitivity, DeltasAgainstVanilla) {
  std::map<std::string, std::map<std::string, WLTRow>> tables;
  tables["Vanilla"]["StaticAgent"] = row_of(10, 5, 5);
  tables["Vanilla"]["SimpleAgent"] = row_of(4, 12, 4);
  tables["action"]["StaticAgent"] = row_of(14, 1, 5);
  tables["action"]["SimpleAgent"] = row_of(8, 8, 4);
  const auto d = filter_sensitivity(tables, "Vanilla");
  for (const auto& [opp, delta] : d.at("Vanilla")) {
    EXPECT_EQ(delta.win, 0.0);
    EXPECT_EQ(delta.loss, 0.0);
    EXPECT_EQ(delta.tie, 0.0);
  }
  EXPECT_NEAR(d.at("action").at("StaticAgent").loss, -0.2, 1e-12);
  EXPECT_NEAR(d.at("action").at("SimpleAgent").win, 0.2, 1e-12);
}

TEST(FilterSensitivity, MismatchedOpponentsRejected) {
  std::map<std::string, std::map<std::string, WLTRow>> tables;
  tables["Vanilla"]["StaticAgent"] = row_of(1, 1, 1);
  tables["action"]["SimpleAgent"] = row_of(1, 1, 1);
  EXPECT_THROW(filter_sensitivity(tables, "Vanilla"), std::invalid_argument);
  tables["action"]["StaticAgent"] = row_of(1, 1, 1);
  EXPECT_THROW(filter_sensitivity(tables, "Vanilla"), std::invalid_argument);
  EXPECT_THROW(filter_sensitivity(tables, "missing"), std::invalid_argument);
}

TEST(ProportionTest, KnownValues) {
  // z = 0 gives one half.
  EXPECT_NEAR(one_sided_p_greater(50, 100, 50, 100), 0.5, 1e-12);
  // 60/100 vs 40/100: pooled 0.5, se = sqrt(0.5 * 0.5 * 0.02), z = 2.828.
  EXPECT_NEAR(one_sided_p_greater(60, 100, 40, 100), 0.0023388674905236, 1e-9);
  EXPECT_GT(one_sided_p_greater(40, 100, 60, 100), 0.99);
  EXPECT_EQ(one_sided_p_greater(10, 10, 0, 10) < 0.05, true);
}

TEST(Rolling, Examples) {
  EXPECT_EQ(rolling_reward(std::vector<double>(50, 0.5), 10), std::vector<double>(41, 0.5));
  const std::vector<double> raw = {1, -1, 0.5, 0.5, -1};
  EXPECT_EQ(rolling_reward(raw, 1), raw);
  std::vector<double> alt;
  for (int i = 0; i < 30; ++i) alt.push_back(i % 2 ? -1.0 : 1.0);
  for (double x : rolling_reward(alt, 2)) EXPECT_EQ(x, 0.0);
}

TEST(Rolling, ShortLogGivesPrefixMeans) {
  const auto s = rolling_reward({1.0, 0.0, 0.5}, 1000);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_DOUBLE_EQ(s[2], 0.5);
  EXPECT_THROW(rolling_reward({}, 5), std::invalid_argument);
  EXPECT_THROW(rolling_reward({1.0}, 0), std::invalid_argument);
}

TEST_F(EvalDir, ReplaysVerifyAndReproduceOutcomes) {
  AgentCatalog cat;
  std::vector<MatchResult> results;
  tournament(cat, "SimpleAgent_jitter_action", "SimpleAgent", 10, 5,
             {.config_hash = 0x1234, .workers = 2, .replay_dir = dir_}, &results);
  for (int i = 0; i < 10; ++i) {
    const Replay r = read_replay(dir_ / ("game_" + std::to_string(i) + ".jsonl"));
    EXPECT_EQ(r.config_hash, 0x1234u);
    const ReplayCheck c = verify_replay(r);
    EXPECT_TRUE(c.ok) << c.message;
    EXPECT_EQ(c.outcome, results[i].outcome);
    EXPECT_EQ(r.ticks.size(), static_cast<std::size_t>(results[i].length));
    EXPECT_EQ(r.death_tick, results[i].death_tick);
  }
}

TEST_F(EvalDir, AnyActionTamperIsDetected) {
  AgentCatalog cat;
  const fs::path path = dir_ / "g.jsonl";
  run_match(cat, {"SimpleAgent", "SimpleAgent"}, {"RandomAgent", "RandomAgent"}, 9,
            {.replay_path = path});
  std::string text;
  {
    std::ifstream in(path, std::ios::binary);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  // Offsets of every action digit.
  std::vector<std::size_t> digits;
  for (std::size_t p = text.find("\"actions\":["); p != std::string::npos;
       p = text.find("\"actions\":[", p + 1)) {
    for (std::size_t q = p + 11; text[q] != ']'; ++q) {
      if (std::isdigit(static_cast<unsigned char>(text[q]))) digits.push_back(q);
    }
  }
  ASSERT_GT(digits.size(), 100u);
  Rng rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t at = digits[rng.uniform_int(digits.size())];
    std::string bad = text;
    bad[at] = static_cast<char>('0' + (bad[at] - '0' + 1 + rng.uniform_int(5)) % 6);
    const fs::path tampered = dir_ / "bad.jsonl";
    std::ofstream(tampered, std::ios::binary) << bad;
    bool rejected = false;
    try {
      rejected = !verify_replay(read_replay(tampered)).ok;
    } catch (const FileFormatError&) {
      rejected = true;
    }
    EXPECT_TRUE(rejected) << "offset " << at;
  }
  // Flipping a digit to a non-action character is a format error.
  std::string bad = text;
  bad[digits.front()] = '9';
  std::ofstream(dir_ / "bad2.jsonl", std::ios::binary) << bad;
  EXPECT_THROW(read_replay(dir_ / "bad2.jsonl"), FileFormatError);
}

TEST_F(EvalDir, TamperedSimulationWithFixedDigestIsDetected) {
  AgentCatalog cat;
  const fs::path path = dir_ / "g.jsonl";
  run_match(cat, {"SimpleAgent", "SimpleAgent"}, {"SimpleAgent", "SimpleAgent"}, 12,
            {.replay_path = path});
  Replay r = read_replay(path);
  // Make agent 0 place a bomb at its first tick and patch the digest so only
  // re-simulation can catch the change.
  ASSERT_NE(r.ticks[0].actions[0], Action::PlaceBomb);
  r.ticks[0].actions[0] = Action::PlaceBomb;
  r.actions_digest = actions_digest(r.ticks);
  EXPECT_FALSE(verify_replay(r).ok);
}

TEST(ReplayIo, MissingAndTruncated) {
  EXPECT_THROW(read_replay("/nonexistent/replay.jsonl"), FileFormatError);
  const fs::path p = fs::temp_directory_path() / ("pommer_trunc_" + std::to_string(::getpid()));
  std::ofstream(p) << "{\"type\":\"header\"";
  EXPECT_THROW(read_replay(p), FileFormatError);
  fs::remove(p);
}

TEST(Heatmap, NormalizationMapsEveryCornerHome) {
  for (int id = 0; id < kNumAgents; ++id) {
    const Position p = normalize_to_top_left(kStartCorners[id], id);
    EXPECT_EQ(p.row, kStartCorners[0].row);
    EXPECT_EQ(p.col, kStartCorners[0].col);
  }
  CountGrid g{};
  g[0][0] = 3;
  g[10][10] = 1;
  EXPECT_DOUBLE_EQ(mass_outside_home(g), 0.25);
}

TEST_F(EvalDir, HeatmapCountingIdentities) {
  AgentCatalog cat;
  std::vector<MatchResult> results;
  const int n = 8;
  tournament(cat, "SimpleAgent", "RandomAgent", n, 31, {.workers = 2, .replay_dir = dir_},
             &results);
  Heatmaps h;
  std::int64_t alive_oracle = 0, bombs_oracle = 0;
  for (int i = 0; i < n; ++i) {
    const Replay r = read_replay(dir_ / ("game_" + std::to_string(i) + ".jsonl"));
    const int seat = learner_seat(r, "SimpleAgent");
    ASSERT_EQ(seat, learner_team_in_game(i) == 0 ? 0 : 1);
    accumulate_heatmaps(h, r, seat);

    // Alive ticks from the death record alone.
    const int d = results[i].death_tick[seat];
    alive_oracle += d >= 0 ? d + 1 : results[i].length;

    // Placements: a PlaceBomb tick whose recorded new bombs include the
    // cell the agent occupied when it acted.
    GameState s = generate_board(board_seed(r.seed), r.board);
    for (const ReplayTick& t : r.ticks) {
      const Position at = s.agents[seat].position;
      const bool alive = s.agents[seat].alive;
      if (alive && t.actions[seat] == Action::PlaceBomb &&
          std::find(t.bombs.begin(), t.bombs.end(), at) != t.bombs.end()) {
        ++bombs_oracle;
      }
      step_in_place(s, t.actions);
    }
  }
  auto total = [](const CountGrid& g) {
    std::int64_t s = 0;
    for (const auto& row : g) {
      for (auto v : row) s += v;
    }
    return s;
  };
  EXPECT_EQ(h.replays, n);
  EXPECT_EQ(total(h.position), alive_oracle);
  EXPECT_EQ(h.alive_ticks, alive_oracle);
  EXPECT_EQ(total(h.bombs), bombs_oracle);
  EXPECT_GT(bombs_oracle, 0);
}

}  // namespace
}  // namespace pommer
