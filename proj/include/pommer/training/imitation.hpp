#ifndef POMMER_TRAINING_IMITATION_HPP_
#define POMMER_TRAINING_IMITATION_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "pommer/agents.hpp"
#include "pommer/dataset.hpp"
#include "pommer/match.hpp"
#include "pommer/network_agent.hpp"
#include "pommer/nn/losses.hpp"
#include "pommer/nn/optimizer.hpp"
#include "pommer/parallel.hpp"

namespace pommer {

/// Records every observation a wrapped agent sees with the action it picks.
class RecordingAgent : public Agent {
 public:
  struct Sample {
    ObservationTensor tensor;
    Action action;
  };

  RecordingAgent(Agent& inner, std::vector<std::pair<int, Sample>>& sink, int seat)
      : inner_(&inner), sink_(&sink), seat_(seat) {}

  std::string name() const override { return inner_->name(); }
  void reset(std::uint64_t seed) override { inner_->reset(seed); }
  Action act(const RawObservation& obs) override {
    const Action a = inner_->act(obs);
    sink_->push_back({seat_, {encode(obs), a}});
    return a;
  }

 private:
  Agent* inner_;
  std::vector<std::pair<int, Sample>>* sink_;
  int seat_;
};

struct CollectStats {
  std::uint64_t games = 0;
  std::uint64_t records = 0;
  std::uint64_t ticks = 0;
};

/// Plays `n_games` four-SimpleAgent games and writes one record per alive
/// agent per tick, in tick then seat order. Game i uses derive_seed(seed, i).
inline CollectStats collect_imitation_dataset(int n_games, std::uint64_t seed,
                                              const std::filesystem::path& out,
                                              std::uint64_t config_hash,
                                              const BoardConfig& board = {}, int workers = 1) {
  if (n_games < 1) throw std::invalid_argument("collect needs at least one game");
  DatasetWriter writer(out, config_hash);
  CollectStats stats;
  const int chunk = std::max(1, resolve_workers(workers)) * 2;
  for (int start = 0; start < n_games; start += chunk) {
    const int count = std::min(chunk, n_games - start);
    std::vector<std::vector<std::pair<int, RecordingAgent::Sample>>> samples(count);
    std::vector<int> lengths(count);
    parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t k) {
      std::array<SimpleAgent, kNumAgents> experts;
      std::vector<std::unique_ptr<RecordingAgent>> recorders;
      std::array<Agent*, kNumAgents> seats{};
      for (int i = 0; i < kNumAgents; ++i) {
        recorders.push_back(std::make_unique<RecordingAgent>(experts[i], samples[k], i));
        seats[i] = recorders.back().get();
      }
      const auto game_seed = derive_seed(seed, static_cast<std::uint64_t>(start) + k);
      lengths[k] = play_game(seats, game_seed, board).length;
    });
    for (int k = 0; k < count; ++k) {
      writer.begin_game();
      for (const auto& [seat, s] : samples[k]) writer.append(s.tensor, s.action);
      stats.records += samples[k].size();
      stats.ticks += static_cast<std::uint64_t>(lengths[k]);
      ++stats.games;
    }
  }
  writer.finish();
  return stats;
}

struct ImitationConfig {
  nn::NetSpec spec = nn::NetSpec::policy();
  int epochs = 1;
  int batch = 64;
  double learning_rate = 1e-3;
  int eval_every = 1000;  // optimizer steps between holdout evaluations
  double holdout_fraction = 0.1;
  std::int64_t max_steps = 0;  // 0: no cap
};

struct ImitationEval {
  std::int64_t step = 0;
  double train_loss = 0;  // mean minibatch loss since the previous evaluation
  double holdout_loss = 0;
  double holdout_accuracy = 0;
};

struct ImitationResult {
  PolicyNet best{nn::NetSpec::policy()};
  ImitationEval initial;
  std::vector<ImitationEval> history;
  int best_index = -1;  // into history; -1 means the initial network
  double majority_frequency = 0;  // of the most common action over the dataset
  std::size_t train_records = 0;
  std::size_t holdout_records = 0;
};

/// Fraction of records carrying the most common action.
inline double majority_action_frequency(const CompactDataset& ds) {
  std::array<std::size_t, kNumActions> counts{};
  for (std::size_t r = 0; r < ds.size(); ++r) ++counts[static_cast<int>(ds.action(r))];
  return ds.size() ? static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                         static_cast<double>(ds.size())
                   : 0.0;
}

/// Splits games, not records, so no game contributes to both sides.
/// Returns {train record indices, holdout record indices}.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_game(
    const CompactDataset& ds, double holdout_fraction, std::uint64_t seed) {
  std::vector<std::size_t> games(ds.games());
  std::iota(games.begin(), games.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span<std::size_t>(games));
  std::size_t n_hold = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(games.size())));
  if (holdout_fraction <= 0 || games.size() < 2) n_hold = 0;
  else n_hold = std::clamp<std::size_t>(n_hold, 1, games.size() - 1);
  std::vector<std::size_t> train, hold;
  for (std::size_t i = 0; i < games.size(); ++i) {
    auto& dst = i < n_hold ? hold : train;
    const std::size_t g = games[i];
    for (std::uint64_t r = 0; r < ds.game_size(g); ++r) dst.push_back(ds.game_offset(g) + r);
  }
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {std::move(train), std::move(hold)};
}

inline PolicyNet::Matrix gather(const CompactDataset& ds, std::span<const std::size_t> rows) {
  PolicyNet::Matrix x(kTensorSize, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.copy_tensor<float>(rows[i], std::span<float>(x.col(static_cast<Eigen::Index>(i)).data(),
                                                    kTensorSize));
  }
  return x;
}

/// Mean cross-entropy and top-1 agreement of `net` on `rows`.
inline std::pair<double, double> evaluate_imitation(const PolicyNet& net, const CompactDataset& ds,
                                                    const std::vector<std::size_t>& rows) {
  if (rows.empty()) return {0.0, 0.0};
  constexpr std::size_t kChunk = 256;
  double loss = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, rows.size() - start);
    const std::span<const std::size_t> part(rows.data() + start, n);
    const PolicyNet::Matrix logits = net.forward(gather(ds, part));
    const nn::Mat<float> logp = nn::log_softmax<float>(logits);
    for (std::size_t i = 0; i < n; ++i) {
      const int a = static_cast<int>(ds.action(part[i]));
      loss -= logp(a, static_cast<Eigen::Index>(i));
      Eigen::Index best = 0;
      logits.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      correct += best == a;
    }
  }
  return {loss / static_cast<double>(rows.size()),
          static_cast<double>(correct) / static_cast<double>(rows.size())};
}

/// Behavioural cloning with dropout active. Keeps the parameters with the
/// lowest holdout loss seen at any evaluation (the final step is always
/// evaluated). With a single game there is no holdout and the training
/// records stand in for it.
inline ImitationResult train_imitation(
    const CompactDataset& ds, const ImitationConfig& cfg, std::uint64_t seed,
    const std::function<void(const ImitationEval&)>& on_eval = {}) {
  if (ds.size() == 0) throw std::invalid_argument("imitation: empty dataset");
  if (cfg.batch < 1 || cfg.epochs < 1 || cfg.eval_every < 1) {
    throw std::invalid_argument("imitation: batch, epochs and eval_every must be positive");
  }
  if (cfg.spec.outputs != kNumActions) {
    throw std::invalid_argument("imitation: policy must have one output per action");
  }
  auto [train, hold] = split_by_game(ds, cfg.holdout_fraction, seed);
  const std::vector<std::size_t>& eval_rows = hold.empty() ? train : hold;

  ImitationResult result;
  result.majority_frequency = majority_action_frequency(ds);
  result.train_records = train.size();
  result.holdout_records = hold.size();

  PolicyNet net(cfg.spec);
  net.init(derive_seed(seed, "init"));
  nn::Adam opt(net.num_params(), {.learning_rate = cfg.learning_rate});
  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  Rng dropout_rng(derive_seed(seed, "dropout"));

  {
    const auto [l, acc] = evaluate_imitation(net, ds, eval_rows);
    result.initial = {0, 0.0, l, acc};
  }
  result.best = net;
  double best_loss = result.initial.holdout_loss;

  std::int64_t step = 0;
  double running = 0;
  int running_n = 0;
  auto evaluate = [&] {
    const auto [l, acc] = evaluate_imitation(net, ds, eval_rows);
    ImitationEval e{step, running_n ? running / running_n : 0.0, l, acc};
    result.history.push_back(e);
    if (l < best_loss) {
      best_loss = l;
      result.best = net;
      result.best_index = static_cast<int>(result.history.size()) - 1;
    }
    running = 0;
    running_n = 0;
    if (on_eval) on_eval(e);
  };

  std::vector<float> grad(net.num_params());
  std::vector<int> labels;
  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::vector<std::size_t> order = train;
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min<std::size_t>(cfg.batch, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, n);
      labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(ds.action(rows[i]));
      PolicyNet::Cache cache;
      const PolicyNet::Matrix logits =
          net.forward(gather(ds, rows), nn::Mode::Train, &dropout_rng, &cache);
      nn::Mat<float> d;
      running += nn::cross_entropy<float>(logits, labels, &d);
      ++running_n;
      std::fill(grad.begin(), grad.end(), 0.0f);
      net.backward(cache, d, grad);
      opt.step<float>(net.params(), grad);
      ++step;
      if (step % cfg.eval_every == 0) evaluate();
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }
  }
  if (running_n > 0) evaluate();
  return result;
}

}  // namespace pommer

#endif  // POMMER_TRAINING_IMITATION_HPP_
