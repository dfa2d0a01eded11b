// pommer: command-line entry point for the whole pipeline.
//
// Exit codes: 0 ok, 2 bad arguments, 3 missing or corrupt file,
// 4 verification failure, 5 config mismatch on resume.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pommer/config.hpp"
#include "pommer/evaluation.hpp"
#include "pommer/nn/checkpoint.hpp"
#include "pommer/training/curriculum.hpp"
#include "pommer/training/imitation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pommer;

namespace {

enum ExitCode { kOk = 0, kBadArgs = 2, kBadFile = 3, kVerifyFailed = 4, kConfigMismatch = 5 };

class MissingFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerifyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path require_file(const std::string& p) {
  if (!fs::is_regular_file(p)) throw MissingFile("no such file: " + p);
  return p;
}

/// Relative output paths land under $POMMER_OUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* dir = std::getenv("POMMER_OUT_DIR"); dir && *dir) return fs::path(dir) / path;
  return path;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct Common {
  std::vector<std::string> configs;  // files or key=value overrides
  int workers = -1;

  RunConfig build() const {
    RunConfig rc;
    for (const std::string& c : configs) {
      if (fs::is_regular_file(c)) {
        rc.load_file(c);
      } else if (c.find('=') != std::string::npos) {
        rc.apply_overrides(c);
      } else {
        throw MissingFile("no such config file: " + c);
      }
    }
    if (workers >= 0) rc.set("workers", std::to_string(workers));
    return rc;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.configs,
                  "Config file or key=value override (repeatable, later wins)");
  cmd->add_option("--workers", c.workers, "Parallel games (0: one per core)");
}

std::shared_ptr<const PolicyNet> load_policy(const std::string& path) {
  nn::Checkpoint ck = nn::load_checkpoint(require_file(path));
  if (ck.net.spec().outputs != kNumActions) {
    throw FileFormatError(path + " is not a policy checkpoint");
  }
  return std::make_shared<const PolicyNet>(std::move(ck.net));
}

// collect

struct CollectArgs {
  Common common;
  int games = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_collect(const CollectArgs& a) {
  const RunConfig rc = a.common.build();
  const fs::path out = output_path(a.out);
  ensure_parent(out);
  const CollectStats st = collect_imitation_dataset(
      a.games, a.seed, out, rc.hash(), board_from(rc), static_cast<int>(rc.integer("workers")));
  std::cout << json{{"dataset", out.string()},
                    {"games", st.games},
                    {"records", st.records},
                    {"ticks", st.ticks},
                    {"config_hash", hex64(rc.hash())}}
                   .dump()
            << "\n";
  return kOk;
}

// imitate

struct ImitateArgs {
  Common common;
  std::string data;
  std::string out;
  std::string log;
};

int run_imitate(const ImitateArgs& a) {
  const RunConfig rc = a.common.build();
  const CompactDataset ds = CompactDataset::load(require_file(a.data));
  const ImitationConfig cfg = imitation_config(rc);
  std::unique_ptr<std::ofstream> log;
  if (!a.log.empty()) {
    const fs::path lp = output_path(a.log);
    ensure_parent(lp);
    log = std::make_unique<std::ofstream>(lp, std::ios::trunc);
  }
  auto emit = [&](const ImitationEval& e) {
    const json j = {{"step", e.step},
                    {"train_loss", e.train_loss},
                    {"holdout_loss", e.holdout_loss},
                    {"holdout_accuracy", e.holdout_accuracy}};
    std::cerr << j.dump() << "\n";
    if (log) *log << j.dump() << "\n";
  };
  const ImitationResult r =
      train_imitation(ds, cfg, static_cast<std::uint64_t>(rc.integer("seed")), emit);
  const fs::path out = output_path(a.out);
  ensure_parent(out);
  nn::save_checkpoint(out, r.best, nn::Mode::Eval, rc.hash());
  const ImitationEval& best = r.best_index >= 0 ? r.history[r.best_index] : r.initial;
  std::cout << json{{"checkpoint", out.string()},
                    {"train_records", r.train_records},
                    {"holdout_records", r.holdout_records},
                    {"majority_frequency", r.majority_frequency},
                    {"initial_holdout_loss", r.initial.holdout_loss},
                    {"best_step", best.step},
                    {"holdout_loss", best.holdout_loss},
                    {"holdout_accuracy", best.holdout_accuracy},
                    {"config_hash", hex64(rc.hash())}}
                   .dump()
            << "\n";
  return kOk;
}

// train

struct TrainArgs {
  Common common;
  std::string init;
  std::string out;
  bool cautious = false;
  bool resume = false;
  bool plan_only = false;
};

int run_train(const TrainArgs& a) {
  RunConfig rc = a.common.build();
  if (a.cautious) rc.set("curriculum.cautious", "1");
  const CurriculumConfig cfg = curriculum_config(rc);
  json plan = json::array();
  for (const Phase& p : cfg.phases) {
    plan.push_back({{"opponent", p.opponent}, {"games", p.games}, {"policy_frozen", p.policy_frozen}});
  }
  if (a.plan_only) {
    std::cout << json{{"phases", plan}, {"config_hash", hex64(cfg.config_hash)}}.dump() << "\n";
    return kOk;
  }
  if (a.init.empty() || a.out.empty()) {
    throw std::invalid_argument("train needs --init and --out");
  }
  nn::Checkpoint init = nn::load_checkpoint(require_file(a.init));
  if (init.net.spec().outputs != kNumActions) {
    throw FileFormatError(a.init + " is not a policy checkpoint");
  }
  const fs::path out = output_path(a.out);
  fs::create_directories(out);
  {
    std::ofstream(out / "config.txt", std::ios::trunc) << rc.serialize();
  }
  std::cerr << json{{"phases", plan}, {"config_hash", hex64(cfg.config_hash)}}.dump() << "\n";
  CurriculumHooks hooks;
  hooks.on_phase_end = [](int phase) { std::cerr << "phase " << phase << " done\n"; };
  const CurriculumResult r = run_curriculum(cfg, init.net, out, a.resume, hooks);
  std::cout << json{{"out", out.string()},
                    {"games", r.games},
                    {"updates", r.updates},
                    {"policy_samples", r.policy_samples},
                    {"excluded_samples", r.excluded_samples},
                    {"aborted_updates", r.aborted_updates},
                    {"config_hash", hex64(cfg.config_hash)}}
                   .dump()
            << "\n";
  return kOk;
}

// eval

struct EvalArgs {
  Common common;
  std::string learner;
  std::string opponent;
  int games = 0;
  std::uint64_t seed = 1;
  std::string imitation;
  std::string ppo;
  std::string cautious;
  std::string replays;
  std::string out;
};

AgentCatalog catalog_from(const RunConfig& rc, const std::string& imitation,
                          const std::string& ppo, const std::string& cautious) {
  AgentCatalog cat;
  if (!imitation.empty()) {
    cat.set_policy("Imitation", load_policy(imitation), rc.flag("eval.imitation_greedy"));
  }
  if (!ppo.empty()) cat.set_policy("PPO", load_policy(ppo), rc.flag("eval.ppo_greedy"));
  if (!cautious.empty()) {
    cat.set_policy("PPOAgent_Cautious", load_policy(cautious), rc.flag("eval.ppo_greedy"));
  }
  return cat;
}

int run_eval(const EvalArgs& a) {
  const RunConfig rc = a.common.build();
  const AgentCatalog cat = catalog_from(rc, a.imitation, a.ppo, a.cautious);
  TournamentOptions opt;
  opt.board = board_from(rc);
  opt.config_hash = rc.hash();
  opt.workers = static_cast<int>(rc.integer("workers"));
  if (!a.replays.empty()) opt.replay_dir = output_path(a.replays);
  const WLTRow row = tournament(cat, a.learner, a.opponent, a.games, a.seed, opt);
  const json j = row_json(row, rc.hash());
  std::cout << std::fixed << std::setprecision(3) << a.learner << " vs " << a.opponent
            << ": win " << row.win_rate() << " loss " << row.loss_rate() << " tie "
            << row.tie_rate() << " (" << row.games << " games)\n";
  std::cout << j.dump() << "\n";
  if (!a.out.empty()) {
    const fs::path out = output_path(a.out);
    ensure_parent(out);
    std::ofstream(out, std::ios::app) << j.dump() << "\n";
  }
  return kOk;
}

// sensitivity

struct SensitivityArgs {
  Common common;
  std::string learner = "Imitation";
  std::vector<std::string> opponents{"StaticAgent", "SimpleAgent_NoBomb", "SimpleAgent"};
  int games = 0;
  std::uint64_t seed = 1;
  std::string imitation;
  std::string ppo;
  std::string out;
};

int run_sensitivity(const SensitivityArgs& a) {
  const RunConfig rc = a.common.build();
  const AgentCatalog cat = catalog_from(rc, a.imitation, a.ppo, "");
  TournamentOptions opt;
  opt.board = board_from(rc);
  opt.config_hash = rc.hash();
  opt.workers = static_cast<int>(rc.integer("workers"));
  std::map<std::string, std::map<std::string, WLTRow>> tables;
  json rows = json::array();
  for (const std::string suffix : {"", "_jitter", "_action", "_jitter_action"}) {
    const std::string variant = a.learner + suffix;
    for (const std::string& opp : a.opponents) {
      const WLTRow row = tournament(cat, variant, opp, a.games, a.seed, opt);
      tables[variant][opp] = row;
      rows.push_back(row_json(row, rc.hash()));
      std::cerr << rows.back().dump() << "\n";
    }
  }
  const auto deltas = filter_sensitivity(tables, a.learner);
  json d = json::array();
  for (const auto& [variant, per_opp] : deltas) {
    for (const auto& [opp, delta] : per_opp) {
      d.push_back({{"variant", variant},
                   {"opponent", opp},
                   {"d_win", delta.win},
                   {"d_loss", delta.loss},
                   {"d_tie", delta.tie}});
    }
  }
  const json report = {{"rows", rows}, {"deltas", d}, {"config_hash", hex64(rc.hash())}};
  std::cout << report.dump(2) << "\n";
  if (!a.out.empty()) {
    const fs::path out = output_path(a.out);
    ensure_parent(out);
    std::ofstream(out, std::ios::trunc) << report.dump(2) << "\n";
  }
  return kOk;
}

// heatmap

struct HeatmapArgs {
  std::string replays;
  std::string learner;
  std::string out;
};

int run_heatmap(const HeatmapArgs& a) {
  if (!fs::is_directory(a.replays)) throw MissingFile("no such directory: " + a.replays);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.replays)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingFile("no replays in " + a.replays);
  Heatmaps h;
  for (const fs::path& f : files) {
    const Replay r = read_replay(f);
    const int seat = a.learner.empty() ? 0 : learner_seat(r, a.learner);
    if (seat < 0) continue;
    accumulate_heatmaps(h, r, seat);
  }
  const json j = {{"replays", h.replays},
                  {"learner", a.learner},
                  {"alive_ticks", h.alive_ticks},
                  {"bombs_placed", h.bombs_placed},
                  {"outside_home_fraction", mass_outside_home(h.position)},
                  {"position", grid_json(h.position)},
                  {"bombs", grid_json(h.bombs)}};
  const fs::path out = output_path(a.out);
  ensure_parent(out);
  std::ofstream(out, std::ios::trunc) << j.dump(1) << "\n";
  std::cout << json{{"out", out.string()}, {"replays", h.replays}}.dump() << "\n";
  return kOk;
}

// verify-replay

int run_verify(const std::string& file) {
  const Replay r = read_replay(require_file(file));
  const ReplayCheck c = verify_replay(r);
  if (!c.ok) throw VerifyFailure(file + ": " + c.message);
  std::cout << json{{"replay", file},
                    {"ok", true},
                    {"ticks", r.ticks.size()},
                    {"outcome", std::string(outcome_name(*c.outcome))}}
                   .dump()
            << "\n";
  return kOk;
}

// rolling-reward

struct RollingArgs {
  std::string log;
  int window = 1000;
  std::string out;
};

int run_rolling(const RollingArgs& a) {
  std::ifstream in(require_file(a.log));
  std::vector<double> rewards;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FileFormatError(a.log + ": " + e.what());
    }
    if (j.value("type", "") == "game") rewards.push_back(j.at("reward").get<double>());
  }
  const std::vector<double> series = rolling_reward(rewards, a.window);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    const fs::path out = output_path(a.out);
    ensure_parent(out);
    file.open(out, std::ios::trunc);
    os = &file;
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    *os << json{{"index", i}, {"mean_reward", series[i]}}.dump() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pommerman team agents: data collection, training and evaluation"};
  app.require_subcommand(1);

  CollectArgs collect;
  auto* c = app.add_subcommand("collect", "Record SimpleAgent self-play as an imitation dataset");
  add_common(c, collect.common);
  c->add_option("--games", collect.games, "Games to play")->required()->check(CLI::PositiveNumber);
  c->add_option("--seed", collect.seed, "Seed");
  c->add_option("--out", collect.out, "Dataset file")->required();

  ImitateArgs imitate;
  auto* im = app.add_subcommand("imitate", "Behavioural cloning from a dataset");
  add_common(im, imitate.common);
  im->add_option("--data", imitate.data, "Dataset file")->required();
  im->add_option("--out", imitate.out, "Policy checkpoint to write")->required();
  im->add_option("--log", imitate.log, "Holdout evaluation log (JSON lines)");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Curriculum PPO from an imitation checkpoint");
  add_common(tr, train.common);
  tr->add_option("--init", train.init, "Initial policy checkpoint");
  tr->add_option("--out", train.out, "Output directory");
  tr->add_flag("--plan-only", train.plan_only, "Print the phase plan and exit");
  tr->add_flag("--cautious", train.cautious, "Plain PPO against SimpleAgent, no shaping or filters");
  tr->add_flag("--resume", train.resume, "Continue from the state saved in --out");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Tournament row: learner pair against opponent pair");
  add_common(ev, eval.common);
  ev->add_option("--learner", eval.learner, "Learner agent name")->required();
  ev->add_option("--opponent", eval.opponent, "Opponent agent name")->required();
  ev->add_option("--games", eval.games, "Games")->required()->check(CLI::PositiveNumber);
  ev->add_option("--seed", eval.seed, "Base seed");
  ev->add_option("--imitation", eval.imitation, "Checkpoint for Imitation agents");
  ev->add_option("--ppo", eval.ppo, "Checkpoint for PPO agents");
  ev->add_option("--cautious-ckpt", eval.cautious, "Checkpoint for PPOAgent_Cautious");
  ev->add_option("--replays", eval.replays, "Directory for per-game replays");
  ev->add_option("--out", eval.out, "Append the row (JSON) to this file");

  SensitivityArgs sens;
  auto* se = app.add_subcommand("sensitivity", "All four filter variants against each opponent");
  add_common(se, sens.common);
  se->add_option("--learner", sens.learner, "Base learner name");
  se->add_option("--opponents", sens.opponents, "Opponent names")->delimiter(',');
  se->add_option("--games", sens.games, "Games per cell")->required()->check(CLI::PositiveNumber);
  se->add_option("--seed", sens.seed, "Base seed");
  se->add_option("--imitation", sens.imitation, "Checkpoint for Imitation agents");
  se->add_option("--ppo", sens.ppo, "Checkpoint for PPO agents");
  se->add_option("--out", sens.out, "Report file");

  HeatmapArgs heat;
  auto* hm = app.add_subcommand("heatmap", "Position and bomb heatmaps from replays");
  hm->add_option("--replays", heat.replays, "Replay directory")->required();
  hm->add_option("--learner", heat.learner, "Agent name to follow (default: seat 0)");
  hm->add_option("--out", heat.out, "Output file")->required();

  std::string replay_file;
  auto* vr = app.add_subcommand("verify-replay", "Re-simulate a replay and compare");
  vr->add_option("file", replay_file, "Replay file")->required();

  RollingArgs rolling;
  auto* ro = app.add_subcommand("rolling-reward", "Rolling mean of per-game training rewards");
  ro->add_option("--log", rolling.log, "Training log")->required();
  ro->add_option("--window", rolling.window, "Window")->check(CLI::PositiveNumber);
  ro->add_option("--out", rolling.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgs;
  }

  try {
    if (*c) return run_collect(collect);
    if (*im) return run_imitate(imitate);
    if (*tr) return run_train(train);
    if (*ev) return run_eval(eval);
    if (*se) return run_sensitivity(sens);
    if (*hm) return run_heatmap(heat);
    if (*vr) return run_verify(replay_file);
    if (*ro) return run_rolling(rolling);
  } catch (const ConfigMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigMismatch;
  } catch (const VerifyFailure& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kVerifyFailed;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const UnknownAgent& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const MissingFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadFile;
  } catch (const FileFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadFile;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kBadArgs;
}
