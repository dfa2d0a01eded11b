#ifndef POMMER_TRAINING_CURRICULUM_HPP_
#define POMMER_TRAINING_CURRICULUM_HPP_

// Curriculum PPO. Output directory layout:
//   train_log.jsonl        one record per game, update and finished phase
//   policy_phase<k>.ckpt   value_phase<k>.ckpt   at the end of phase k
//   policy.ckpt value.ckpt final networks
//   state.bin              resumable trainer state (written between updates)

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pommer/agents.hpp"
#include "pommer/config.hpp"
#include "pommer/filters.hpp"
#include "pommer/match.hpp"
#include "pommer/nn/checkpoint.hpp"
#include "pommer/parallel.hpp"
#include "pommer/registry.hpp"
#include "pommer/replay.hpp"
#include "pommer/training/imitation.hpp"
#include "pommer/training/ppo.hpp"

namespace pommer {

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Phase {
  std::string opponent;
  int games = 0;
  bool policy_frozen = false;

  bool operator==(const Phase&) const = default;
};

/// "Opponent:games[:frozen],..."
inline std::vector<Phase> parse_phases(const std::string& text) {
  std::vector<Phase> out;
  for (const std::string& item : detail::split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = detail::split(item, ':');
    if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "frozen")) {
      throw ConfigError("bad phase '" + item + "', expected Opponent:games[:frozen]");
    }
    Phase p;
    p.opponent = parts[0];
    try {
      std::size_t used = 0;
      p.games = std::stoi(parts[1], &used);
      if (used != parts[1].size() || p.games < 0) throw std::invalid_argument(parts[1]);
    } catch (const std::exception&) {
      throw ConfigError("bad game count in phase '" + item + "'");
    }
    p.policy_frozen = parts.size() == 3;
    if (!AgentCatalog::is_scripted_base(p.opponent)) {
      throw ConfigError("phase opponent must be a scripted agent: " + p.opponent);
    }
    out.push_back(p);
  }
  if (out.empty()) throw ConfigError("no curriculum phases");
  return out;
}

inline std::vector<Phase> scale_phases(std::vector<Phase> phases, double scale) {
  if (!(scale > 0)) throw ConfigError("scale must be positive");
  for (Phase& p : phases) p.games = static_cast<int>(std::llround(p.games * scale));
  return phases;
}

struct CurriculumConfig {
  std::vector<Phase> phases;  // already scaled
  PpoConfig ppo;
  int games_per_update = 4;
  double arm_jitter = 0.10;
  double arm_action = 0.30;
  bool cautious = false;
  bool teammate_suicide = true;
  bool shaped_reward = true;
  int save_every = 50;  // updates between resumable state saves
  std::uint64_t seed = 1;
  int workers = 1;
  BoardConfig board;
  std::uint64_t config_hash = 0;
};

inline nn::NetSpec policy_spec_from(const RunConfig& rc, int outputs) {
  nn::NetSpec s;
  s.conv_filters = rc.int_list("net.conv");
  std::vector<int> pool = rc.int_list("net.pool");
  s.pool_after.assign(pool.begin(), pool.end());
  s.dense_units = rc.int_list("net.dense");
  s.dropout = rc.real("net.dropout");
  s.outputs = outputs;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline BoardConfig board_from(const RunConfig& rc) {
  BoardConfig b;
  b.rigid_walls = static_cast<int>(rc.integer("board.rigid_walls"));
  b.wooden_walls = static_cast<int>(rc.integer("board.wooden_walls"));
  b.powerup_probability = rc.real("board.powerup_probability");
  return b;
}

inline ImitationConfig imitation_config(const RunConfig& rc) {
  ImitationConfig cfg;
  cfg.spec = policy_spec_from(rc, kNumActions);
  cfg.epochs = static_cast<int>(rc.integer("imitation.epochs"));
  cfg.batch = static_cast<int>(rc.integer("imitation.batch"));
  cfg.learning_rate = rc.real("imitation.learning_rate");
  cfg.eval_every = static_cast<int>(rc.integer("imitation.eval_every"));
  cfg.holdout_fraction = rc.real("imitation.holdout_fraction");
  cfg.max_steps = rc.integer("imitation.max_steps");
  return cfg;
}

/// The cautious regime replaces the phase list with one unfrozen phase
/// against SimpleAgent covering the same total number of games, keeps the
/// teammate alive, uses the game's own reward and arms no filters.
inline CurriculumConfig curriculum_config(const RunConfig& rc) {
  CurriculumConfig c;
  c.phases = scale_phases(parse_phases(rc.str("curriculum.phases")), rc.real("scale"));
  c.ppo.clip = rc.real("ppo.clip");
  c.ppo.batch = static_cast<int>(rc.integer("ppo.batch"));
  c.ppo.entropy_coef = rc.real("ppo.entropy_coef");
  c.ppo.gamma = rc.real("ppo.gamma");
  c.ppo.lambda = rc.real("ppo.lambda");
  c.ppo.kl_stop = rc.real("ppo.kl_stop");
  c.ppo.epochs = static_cast<int>(rc.integer("ppo.epochs"));
  c.ppo.policy_learning_rate = rc.real("ppo.policy_learning_rate");
  c.ppo.value_learning_rate = rc.real("ppo.value_learning_rate");
  c.ppo.normalize_advantages = rc.flag("ppo.normalize_advantages");
  c.games_per_update = static_cast<int>(rc.integer("ppo.games_per_update"));
  c.arm_jitter = rc.real("arming.jitter");
  c.arm_action = rc.real("arming.action");
  c.cautious = rc.flag("curriculum.cautious");
  c.teammate_suicide = rc.flag("curriculum.teammate_suicide");
  c.shaped_reward = rc.flag("curriculum.shaped_reward");
  c.save_every = static_cast<int>(rc.integer("curriculum.save_every"));
  c.seed = static_cast<std::uint64_t>(rc.integer("seed"));
  c.workers = static_cast<int>(rc.integer("workers"));
  c.board = board_from(rc);
  c.config_hash = rc.hash();
  if (c.ppo.batch < 1 || c.ppo.epochs < 1 || c.games_per_update < 1 || c.save_every < 1) {
    throw ConfigError("ppo.batch, ppo.epochs, ppo.games_per_update and "
                      "curriculum.save_every must be positive");
  }
  if (c.cautious) {
    int total = 0;
    for (const Phase& p : c.phases) total += p.games;
    c.phases = {{"SimpleAgent", total, false}};
    c.teammate_suicide = false;
    c.shaped_reward = false;
    c.arm_jitter = 0;
    c.arm_action = 0;
  }
  return c;
}

/// Learner seat during training: acts from the policy, runs whichever
/// filters are armed for this game and records one transition per tick.
class RolloutAgent : public Agent {
 public:
  RolloutAgent(std::shared_ptr<const PolicyNet> policy, ArmingFlags flags, Trajectory& out)
      : policy_(std::move(policy)),
        expert_(std::make_unique<SimpleAgent>()),
        pipeline_(flags, expert_.get()),
        out_(&out) {}

  std::string name() const override { return "PPO"; }
  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    pipeline_.reset(derive_seed(seed, "filters"));
  }

  Action act(const RawObservation& obs) override {
    Transition t;
    t.obs = encode(obs);
    Action proposed;
    if (std::optional<Action> takeover = pipeline_.observe_tick(obs)) {
      proposed = *takeover;
      t.intervened = true;
    } else {
      const PolicyNet::Matrix x =
          Eigen::Map<const PolicyNet::Matrix>(t.obs.data.data(), kTensorSize, 1);
      const nn::ActionDistribution d = nn::distribution_of<float>(policy_->forward(x));
      proposed = d.sample(rng_);
      t.probs = d.probs;
      t.log_prob = d.log_prob(proposed);
    }
    const FilterResult f = pipeline_.filter(obs, proposed);
    t.action = f.action;
    t.intervened = t.intervened || f.intervened;
    out_->steps.push_back(t);
    return f.action;
  }

 private:
  std::shared_ptr<const PolicyNet> policy_;
  std::unique_ptr<SimpleAgent> expert_;
  FilterPipeline pipeline_;
  Rng rng_{0};
  Trajectory* out_;
};

struct TrainingGame {
  int index = 0;
  int phase = 0;
  std::string opponent;
  std::uint64_t seed = 0;
  ArmingFlags arming;
  int learner_seat = 0;
  double reward = 0;
  int length = 0;
  Outcome outcome = Outcome::Tie;
  Trajectory trajectory;
};

inline std::uint64_t training_game_seed(std::uint64_t seed, int game) {
  return derive_seed(derive_seed(seed, "curriculum"), static_cast<std::uint64_t>(game));
}

/// Filter arming for training game `index`, drawn from that game's stream.
inline ArmingFlags training_game_arming(const CurriculumConfig& cfg, int index) {
  Rng rng(derive_seed(training_game_seed(cfg.seed, index), "arming"));
  return probabilistic_arming(rng, cfg.arm_jitter, cfg.arm_action);
}

/// Plays one training game. The learner rotates through all four seats by
/// game index; arming is drawn from the game's own stream.
inline TrainingGame play_training_game(const CurriculumConfig& cfg, int index, int phase,
                                       std::shared_ptr<const PolicyNet> policy,
                                       const ValueNet& value) {
  TrainingGame g;
  g.index = index;
  g.phase = phase;
  g.opponent = cfg.phases[phase].opponent;
  g.seed = training_game_seed(cfg.seed, index);
  g.arming = training_game_arming(cfg, index);
  g.learner_seat = index % kNumAgents;
  const int team = team_of(g.learner_seat);

  AgentCatalog catalog;
  std::array<AgentPtr, kNumAgents> agents;
  agents[g.learner_seat] = std::make_unique<RolloutAgent>(policy, g.arming, g.trajectory);
  const int mate = teammate_of(g.learner_seat);
  if (cfg.teammate_suicide) {
    agents[mate] = std::make_unique<SuicideTeammate>();
  } else {
    agents[mate] = std::make_unique<NetworkAgent>("PPO", policy, false);
  }
  for (int i = 0; i < kNumAgents; ++i) {
    if (!agents[i]) agents[i] = catalog.make(g.opponent);
  }
  std::array<Agent*, kNumAgents> seats{};
  for (int i = 0; i < kNumAgents; ++i) seats[i] = agents[i].get();
  const GameResult r = play_game(seats, g.seed, cfg.board);
  g.length = r.length;
  g.outcome = r.outcome;
  g.reward = cfg.shaped_reward ? shaped_reward(r.final_state, team)
                               : game_reward(r.final_state, team);
  g.trajectory.terminal_reward = g.reward;

  // Values for the whole game in one pass; the value net is fixed meanwhile.
  auto& steps = g.trajectory.steps;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < steps.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, steps.size() - start);
    ValueNet::Matrix x(kTensorSize, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(steps[start + i].obs.data.begin(), steps[start + i].obs.data.end(),
                x.col(static_cast<Eigen::Index>(i)).data());
    }
    const ValueNet::Matrix v = value.forward(x);
    for (std::size_t i = 0; i < n; ++i) steps[start + i].value = v(0, static_cast<Eigen::Index>(i));
  }
  return g;
}

// Resumable state.

inline constexpr std::array<char, 4> kStateMagic = {'P', 'M', 'T', 'S'};
inline constexpr std::uint32_t kStateVersion = 1;

struct TrainerState {
  PolicyNet policy{nn::NetSpec::policy()};
  ValueNet value{nn::NetSpec::value()};
  nn::Adam policy_opt{0, {}};
  nn::Adam value_opt{0, {}};
  std::uint64_t next_game = 0;
  std::uint64_t updates = 0;
  std::uint64_t log_lines = 0;
  std::uint64_t phases_done = 0;
};

namespace detail {

inline void put_net(std::ostream& out, const nn::Network<float>& net) {
  nn::write_spec(out, net.spec());
  io::put<std::uint64_t>(out, net.num_params());
  io::put_span(out, net.params());
}

inline nn::Network<float> get_net(std::istream& in) {
  nn::Network<float> net(nn::read_spec(in));
  if (io::get<std::uint64_t>(in) != net.num_params()) {
    throw FileFormatError("trainer state: parameter count mismatch");
  }
  io::get_span(in, net.params());
  return net;
}

inline void put_adam(std::ostream& out, const nn::Adam& opt) {
  io::put<std::int64_t>(out, opt.steps());
  io::put<std::uint64_t>(out, opt.size());
  io::put_span(out, std::span<const double>(opt.first_moment()));
  io::put_span(out, std::span<const double>(opt.second_moment()));
}

inline void get_adam(std::istream& in, nn::Adam& opt) {
  opt.set_steps(io::get<std::int64_t>(in));
  if (io::get<std::uint64_t>(in) != opt.size()) {
    throw FileFormatError("trainer state: optimizer size mismatch");
  }
  io::get_span(in, std::span<double>(opt.first_moment()));
  io::get_span(in, std::span<double>(opt.second_moment()));
}

}  // namespace detail

inline void save_trainer_state(const std::filesystem::path& path, const TrainerState& s,
                               std::uint64_t config_hash) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(kStateMagic.data(), 4);
    io::put(out, kStateVersion);
    io::put(out, config_hash);
    io::put(out, s.next_game);
    io::put(out, s.updates);
    io::put(out, s.log_lines);
    io::put(out, s.phases_done);
    detail::put_net(out, s.policy);
    detail::put_net(out, s.value);
    detail::put_adam(out, s.policy_opt);
    detail::put_adam(out, s.value_opt);
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TrainerState load_trainer_state(const std::filesystem::path& path,
                                       std::uint64_t expected_hash, const PpoConfig& ppo) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kStateMagic) throw FileFormatError("not a trainer state file");
  if (io::get<std::uint32_t>(in) != kStateVersion) {
    throw FileFormatError("unsupported trainer state version");
  }
  const auto hash = io::get<std::uint64_t>(in);
  if (hash != expected_hash) {
    throw ConfigMismatch("trainer state was written with config " + hex64(hash) +
                         ", this run has " + hex64(expected_hash));
  }
  TrainerState s;
  s.next_game = io::get<std::uint64_t>(in);
  s.updates = io::get<std::uint64_t>(in);
  s.log_lines = io::get<std::uint64_t>(in);
  s.phases_done = io::get<std::uint64_t>(in);
  s.policy = detail::get_net(in);
  s.value = detail::get_net(in);
  s.policy_opt = nn::Adam(s.policy.num_params(), {.learning_rate = ppo.policy_learning_rate});
  s.value_opt = nn::Adam(s.value.num_params(), {.learning_rate = ppo.value_learning_rate});
  detail::get_adam(in, s.policy_opt);
  detail::get_adam(in, s.value_opt);
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw FileFormatError("trainer state: trailing bytes");
  }
  return s;
}

/// Keeps the first `lines` lines of a text file.
inline void truncate_lines(const std::filesystem::path& path, std::uint64_t lines) {
  std::ifstream in(path);
  std::string kept, line;
  for (std::uint64_t i = 0; i < lines && std::getline(in, line); ++i) kept += line + "\n";
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept;
}

struct CurriculumResult {
  PolicyNet policy{nn::NetSpec::policy()};
  ValueNet value{nn::NetSpec::value()};
  std::vector<std::uint64_t> phase_policy_hash;  // after each phase
  std::vector<double> rewards;                   // per game played in this run
  std::vector<ArmingFlags> arming;               // per game played in this run
  std::uint64_t games = 0;
  std::uint64_t updates = 0;
  std::uint64_t policy_samples = 0;
  std::uint64_t excluded_samples = 0;
  double max_first_ratio_dev = 0;
  int aborted_updates = 0;
};

struct CurriculumHooks {
  std::function<void(const TrainingGame&)> on_game;
  std::function<void(const PpoStats&, std::uint64_t update)> on_update;
  std::function<void(int phase)> on_phase_end;
};

/// Runs every phase in order from `init_policy`. With `resume` and a state
/// file in `out_dir`, continues from the saved point; otherwise starts over.
inline CurriculumResult run_curriculum(const CurriculumConfig& cfg, const PolicyNet& init_policy,
                                       const std::filesystem::path& out_dir, bool resume = false,
                                       const CurriculumHooks& hooks = {}) {
  using nlohmann::json;
  if (init_policy.spec().outputs != kNumActions) {
    throw std::invalid_argument("curriculum: initial network is not a policy");
  }
  std::filesystem::create_directories(out_dir);
  const auto log_path = out_dir / "train_log.jsonl";
  const auto state_path = out_dir / "state.bin";

  TrainerState st;
  if (resume && std::filesystem::exists(state_path)) {
    st = load_trainer_state(state_path, cfg.config_hash, cfg.ppo);
    if (!(st.policy.spec() == init_policy.spec())) {
      throw ConfigMismatch("saved policy layers differ from the initial checkpoint");
    }
    truncate_lines(log_path, st.log_lines);
  } else {
    st.policy = init_policy;
    nn::NetSpec vspec = init_policy.spec();
    vspec.outputs = 1;
    st.value = ValueNet(vspec);
    st.value.init(derive_seed(cfg.seed, "value-init"));
    st.policy_opt = nn::Adam(st.policy.num_params(), {.learning_rate = cfg.ppo.policy_learning_rate});
    st.value_opt = nn::Adam(st.value.num_params(), {.learning_rate = cfg.ppo.value_learning_rate});
    std::ofstream(log_path, std::ios::trunc);
  }
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot open " + log_path.string());
  auto write_log = [&](const json& j) {
    log << j.dump() << "\n";
    log.flush();
    ++st.log_lines;
  };

  CurriculumResult result;
  std::vector<Trajectory> pending;
  std::uint64_t phase_start = 0;
  for (std::size_t phase = 0; phase < cfg.phases.size(); ++phase) {
    const Phase& ph = cfg.phases[phase];
    const std::uint64_t phase_end = phase_start + static_cast<std::uint64_t>(ph.games);
    const bool train_policy = !ph.policy_frozen;
    auto update = [&] {
      const PpoBatch batch = build_batch(pending, cfg.ppo);
      Rng rng(derive_seed(derive_seed(cfg.seed, "update"), st.updates));
      const PpoStats ps = ppo_update(st.policy, st.value, st.policy_opt, st.value_opt, batch,
                                     cfg.ppo, rng, train_policy);
      pending.clear();
      ++st.updates;
      ++result.updates;
      result.policy_samples += train_policy ? ps.policy_samples : 0;
      result.excluded_samples += ps.excluded;
      result.max_first_ratio_dev = std::max(result.max_first_ratio_dev, ps.first_ratio_max_dev);
      result.aborted_updates += ps.aborted;
      json j = {{"type", "update"},
                {"update", st.updates - 1},
                {"phase", phase},
                {"policy_trained", train_policy},
                {"kl", ps.kl},
                {"clip_fraction", ps.clip_fraction},
                {"policy_loss", ps.policy_loss},
                {"value_loss", ps.value_loss},
                {"epochs", ps.epochs_run},
                {"policy_steps", ps.policy_steps},
                {"samples", ps.samples},
                {"policy_samples", ps.policy_samples},
                {"excluded", ps.excluded},
                {"first_ratio_max_dev", ps.first_ratio_max_dev},
                {"early_stopped", ps.early_stopped},
                {"aborted", ps.aborted}};
      if (ps.aborted) j["abort_reason"] = ps.abort_reason;
      write_log(j);
      if (hooks.on_update) hooks.on_update(ps, st.updates - 1);
      if (st.updates % static_cast<std::uint64_t>(cfg.save_every) == 0) {
        save_trainer_state(state_path, st, cfg.config_hash);
      }
    };

    while (st.next_game < phase_end) {
      const int wave = static_cast<int>(
          std::min<std::uint64_t>(cfg.games_per_update, phase_end - st.next_game));
      auto snapshot = std::make_shared<const PolicyNet>(st.policy);
      std::vector<TrainingGame> games(wave);
      parallel_for(static_cast<std::size_t>(wave), cfg.workers, [&](std::size_t k) {
        games[k] = play_training_game(cfg, static_cast<int>(st.next_game + k),
                                      static_cast<int>(phase), snapshot, st.value);
      });
      for (TrainingGame& g : games) {
        write_log({{"type", "game"},
                   {"game", g.index},
                   {"phase", phase},
                   {"opponent", g.opponent},
                   {"seed", g.seed},
                   {"learner_seat", g.learner_seat},
                   {"jitter", g.arming.jitter},
                   {"action", g.arming.action},
                   {"reward", g.reward},
                   {"length", g.length},
                   {"outcome", std::string(outcome_name(g.outcome))}});
        result.rewards.push_back(g.reward);
        result.arming.push_back(g.arming);
        ++result.games;
        if (hooks.on_game) hooks.on_game(g);
        pending.push_back(std::move(g.trajectory));
      }
      st.next_game += static_cast<std::uint64_t>(wave);
      std::size_t buffered = 0;
      for (const Trajectory& t : pending) buffered += t.steps.size();
      const bool last_wave = st.next_game == phase_end;
      if (buffered >= static_cast<std::size_t>(cfg.ppo.batch) || (last_wave && buffered > 0)) {
        update();
      }
    }
    phase_start = phase_end;
    if (phase < st.phases_done) continue;  // finished before a resume
    const std::string k = std::to_string(phase);
    nn::save_checkpoint(out_dir / ("policy_phase" + k + ".ckpt"), st.policy, nn::Mode::Eval,
                        cfg.config_hash);
    nn::save_checkpoint(out_dir / ("value_phase" + k + ".ckpt"), st.value, nn::Mode::Eval,
                        cfg.config_hash);
    const std::uint64_t h = nn::params_hash(st.policy);
    result.phase_policy_hash.push_back(h);
    write_log({{"type", "phase"},
               {"phase", phase},
               {"opponent", ph.opponent},
               {"games", ph.games},
               {"policy_frozen", ph.policy_frozen},
               {"policy_hash", hex64(h)}});
    st.phases_done = phase + 1;
    save_trainer_state(state_path, st, cfg.config_hash);
    if (hooks.on_phase_end) hooks.on_phase_end(static_cast<int>(phase));
  }
  nn::save_checkpoint(out_dir / "policy.ckpt", st.policy, nn::Mode::Eval, cfg.config_hash);
  nn::save_checkpoint(out_dir / "value.ckpt", st.value, nn::Mode::Eval, cfg.config_hash);
  result.policy = st.policy;
  result.value = st.value;
  return result;
}

}  // namespace pommer

#endif  // POMMER_TRAINING_CURRICULUM_HPP_
