#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun pommer(const std::string& args, const fs::path& cwd) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" POMMER_CLI_PATH "' " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Last non-empty output line parsed as JSON.
nlohmann::json last_json(const std::string& out) {
  std::string s = out;
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return nlohmann::json::parse(s.substr(s.rfind('\n') == std::string::npos ? 0 : s.rfind('\n') + 1));
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir_ = fs::temp_directory_path() /
                  ("pommer_cli_" + std::to_string(::getpid()) + "_" +
                   ::testing::UnitTest::GetInstance()->current_test_info()->name());
  void SetUp() override { fs::create_directories(dir_); }
  void TearDown() override { fs::remove_all(dir_); }
  CliRun run(const std::string& args) { return pommer(args, dir_); }
};

const char* kSmallNet = "-c net.conv=4,4,4 -c net.dense=16";

TEST_F(Cli, StaticMirrorAlwaysTies) {
  const CliRun r = run("eval --learner StaticAgent --opponent StaticAgent --games 10");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("tie 1.000"), std::string::npos) << r.out;
  const auto j = last_json(r.out);
  EXPECT_EQ(j["ties"], 10);
  EXPECT_EQ(j["tie"], 1.0);
}

TEST_F(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("eval --learner Foo --opponent StaticAgent --games 1").code, 2);
  EXPECT_EQ(run("eval --learner Imitation --opponent StaticAgent --games 1").code, 2);
  EXPECT_EQ(run("eval --learner StaticAgent --opponent StaticAgent --games 0").code, 2);
  EXPECT_EQ(run("eval --learner StaticAgent --opponent StaticAgent --games 1 -c bogus.key=1").code, 2);
  EXPECT_EQ(run("train --plan-only -c curriculum.phases=Imitation:5").code, 2);
}

TEST_F(Cli, MissingOrCorruptFilesExitThree) {
  EXPECT_EQ(run("verify-replay nope.jsonl").code, 3);
  EXPECT_EQ(run("imitate --data nope.bin --out x.ckpt").code, 3);
  EXPECT_EQ(run("eval --learner Imitation --opponent StaticAgent --games 1 --imitation nope").code, 3);
  EXPECT_EQ(run("eval --learner StaticAgent --opponent StaticAgent --games 1 -c missing.cfg").code, 3);
  std::ofstream(dir_ / "junk.bin") << "not a dataset";
  EXPECT_EQ(run("imitate --data junk.bin --out x.ckpt").code, 3);
  std::ofstream(dir_ / "junk.ckpt") << "not a checkpoint";
  EXPECT_EQ(run("eval --learner Imitation --opponent StaticAgent --games 1 --imitation junk.ckpt").code, 3);
}

TEST_F(Cli, VerifyReplayRoundTripAndTamper) {
  ASSERT_EQ(run("eval --learner SimpleAgent --opponent RandomAgent --games 2 --replays reps").code, 0);
  EXPECT_EQ(run("verify-replay reps/game_0.jsonl").code, 0);
  EXPECT_EQ(run("verify-replay reps/game_1.jsonl").code, 0);

  std::string text;
  {
    std::ifstream in(dir_ / "reps/game_0.jsonl");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const std::size_t at = text.find("\"actions\":[") + 11;
  text[at] = text[at] == '0' ? '1' : '0';
  std::ofstream(dir_ / "bad.jsonl") << text;
  EXPECT_EQ(run("verify-replay bad.jsonl").code, 4);
}

TEST_F(Cli, TrainPlanScales) {
  const CliRun r = run("train --plan-only --config scale=0.01");
  ASSERT_EQ(r.code, 0);
  const auto j = last_json(r.out);
  std::vector<int> games;
  for (const auto& p : j["phases"]) games.push_back(p["games"]);
  EXPECT_EQ(games, (std::vector<int>{100, 100, 200, 600}));
  EXPECT_TRUE(j["phases"][0]["policy_frozen"].get<bool>());
}

TEST_F(Cli, PipelineEndToEnd) {
  // Collect, clone, train, evaluate, heatmap, rolling reward.
  CliRun r = run("collect --games 3 --seed 7 --out ds.bin");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_json(r.out)["games"], 3);
  r = run("collect --games 3 --seed 7 --out ds2.bin --workers 2");
  ASSERT_EQ(r.code, 0);
  {
    std::ifstream a(dir_ / "ds.bin", std::ios::binary), b(dir_ / "ds2.bin", std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b)));
  }

  r = run(std::string("imitate --data ds.bin --out im.ckpt -c imitation.max_steps=20 ") + kSmallNet);
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(fs::exists(dir_ / "im.ckpt"));

  const std::string train_args = std::string("train --init im.ckpt --out run ") + kSmallNet +
                                 " -c curriculum.phases=SimpleAgent:2:frozen,StaticAgent:4"
                                 " -c ppo.games_per_update=2";
  r = run(train_args);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"policy.ckpt", "value.ckpt", "policy_phase0.ckpt", "train_log.jsonl",
                        "config.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  // Resuming a finished run with the same config is a no-op; another config
  // is refused.
  EXPECT_EQ(run(train_args + " --resume").code, 0);
  EXPECT_EQ(run(train_args + " --resume -c ppo.clip=0.2").code, 5);

  r = run("rolling-reward --log run/train_log.jsonl --window 2");
  ASSERT_EQ(r.code, 0) << r.out;

  r = run(std::string("eval --learner PPO_jitter_action --opponent StaticAgent --games 2 "
                      "--ppo run/policy.ckpt --replays ev --out table.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_json(r.out)["games"], 2);
  EXPECT_EQ(run("verify-replay ev/game_1.jsonl").code, 0);

  r = run("heatmap --replays ev --learner PPO_jitter_action --out heat.json");
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(dir_ / "heat.json");
  const auto h = nlohmann::json::parse(in);
  EXPECT_EQ(h["position"].size(), 11u);
  EXPECT_EQ(h["bombs"][0].size(), 11u);
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const fs::path out = dir_ / "envout";
  const CliRun r = pommer("collect --games 1 --out d.bin", dir_);
  ASSERT_EQ(r.code, 0);
  ::setenv("POMMER_OUT_DIR", out.c_str(), 1);
  const CliRun r2 = run("collect --games 1 --out d.bin");
  ::unsetenv("POMMER_OUT_DIR");
  ASSERT_EQ(r2.code, 0);
  EXPECT_TRUE(fs::exists(out / "d.bin"));
}

}  // namespace
