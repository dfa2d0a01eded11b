#ifndef POMMER_TRAINING_PPO_HPP_
#define POMMER_TRAINING_PPO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pommer/encoder.hpp"
#include "pommer/engine.hpp"
#include "pommer/network_agent.hpp"
#include "pommer/nn/losses.hpp"
#include "pommer/nn/optimizer.hpp"

namespace pommer {

using ValueNet = nn::Network<float>;

/// Terminal reward from enemy survivors only: -1 with both enemies alive,
/// 0.5 with one, 1 with none. Who killed them does not matter.
inline double shaped_reward(const GameState& final_state, int learner_team) {
  if (!terminal_status(final_state)) {
    throw std::invalid_argument("shaped_reward needs a terminal state");
  }
  int enemies_alive = 0;
  for (const AgentState& a : final_state.agents) {
    if (a.team() != learner_team && a.alive) ++enemies_alive;
  }
  return enemies_alive == 2 ? -1.0 : enemies_alive == 1 ? 0.5 : 1.0;
}

/// The game's own reward: 1 for a team win, -1 for a loss or a tie.
inline double game_reward(const GameState& final_state, int learner_team) {
  const auto o = terminal_status(final_state);
  if (!o) throw std::invalid_argument("game_reward needs a terminal state");
  if (*o == Outcome::Tie) return -1.0;
  return (*o == Outcome::Team0Wins) == (learner_team == 0) ? 1.0 : -1.0;
}

struct Transition {
  ObservationTensor obs;
  Action action = Action::Stop;  // executed
  double log_prob = 0;           // of `action` under the policy that acted
  std::array<double, kNumActions> probs{};
  double value = 0;
  bool intervened = false;  // chosen by a filter or the expert, not the policy
};

struct Trajectory {
  std::vector<Transition> steps;
  double terminal_reward = 0;
};

/// delta_t = r_t + gamma V_{t+1} - V_t with V past the end taken as 0;
/// A_t = sum_k (gamma lambda)^k delta_{t+k}, by the backward recursion.
inline std::vector<double> compute_gae(std::span<const double> rewards,
                                       std::span<const double> values, double gamma,
                                       double lambda) {
  if (rewards.empty()) throw std::invalid_argument("compute_gae: empty trajectory");
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("compute_gae: rewards and values differ in length");
  }
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  double next = 0;
  for (std::size_t t = n; t-- > 0;) {
    const double v_next = t + 1 < n ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * v_next - values[t];
    next = delta + gamma * lambda * next;
    adv[t] = next;
  }
  return adv;
}

/// In place: subtract the mean, divide by the standard deviation plus 1e-8.
inline void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0;
  for (const double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

inline std::vector<double> compute_gae(std::span<const double> rewards,
                                       std::span<const double> values, double gamma,
                                       double lambda, bool normalize) {
  std::vector<double> adv = compute_gae(rewards, values, gamma, lambda);
  if (normalize) normalize_advantages(adv);
  return adv;
}

inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double g = 0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    g = rewards[t] + gamma * g;
    out[t] = g;
  }
  return out;
}

struct PpoConfig {
  double clip = 0.01;
  int batch = 128;
  double entropy_coef = 0.0;
  double gamma = 0.99;
  double lambda = 0.95;
  double kl_stop = 0.01;
  int epochs = 4;
  double policy_learning_rate = 2.5e-4;
  double value_learning_rate = 1e-3;
  bool normalize_advantages = true;
};

/// Flattened update batch.
struct PpoBatch {
  std::vector<const ObservationTensor*> obs;
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<std::array<double, kNumActions>> old_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<std::uint8_t> include;  // 0 where a filter or the expert acted

  std::size_t size() const { return actions.size(); }
  std::size_t policy_samples() const {
    return static_cast<std::size_t>(std::count(include.begin(), include.end(), 1));
  }
};

/// Advantages and returns per trajectory, then normalization over the batch.
/// The batch points into `trajectories`, which must outlive it.
inline PpoBatch build_batch(const std::vector<Trajectory>& trajectories, const PpoConfig& cfg) {
  PpoBatch b;
  for (const Trajectory& tr : trajectories) {
    if (tr.steps.empty()) continue;
    std::vector<double> rewards(tr.steps.size(), 0.0), values(tr.steps.size());
    rewards.back() = tr.terminal_reward;
    for (std::size_t t = 0; t < tr.steps.size(); ++t) values[t] = tr.steps[t].value;
    const auto adv = compute_gae(rewards, values, cfg.gamma, cfg.lambda);
    const auto ret = discounted_returns(rewards, cfg.gamma);
    for (std::size_t t = 0; t < tr.steps.size(); ++t) {
      const Transition& s = tr.steps[t];
      b.obs.push_back(&s.obs);
      b.actions.push_back(static_cast<int>(s.action));
      b.old_log_probs.push_back(s.log_prob);
      b.old_probs.push_back(s.probs);
      b.advantages.push_back(adv[t]);
      b.returns.push_back(ret[t]);
      b.include.push_back(s.intervened ? 0 : 1);
    }
  }
  if (cfg.normalize_advantages) normalize_advantages(b.advantages);
  return b;
}

struct PpoStats {
  double kl = 0;  // mean KL(old || new) over policy samples after the update
  double clip_fraction = 0;
  double policy_loss = 0;  // mean over minibatches actually stepped
  double value_loss = 0;
  double first_ratio_max_dev = 0;  // max |ratio - 1| before any step
  int epochs_run = 0;
  int policy_steps = 0;
  int value_steps = 0;
  std::size_t samples = 0;
  std::size_t policy_samples = 0;
  std::size_t excluded = 0;
  bool early_stopped = false;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {

inline PolicyNet::Matrix batch_inputs(const PpoBatch& b, std::span<const std::size_t> rows) {
  PolicyNet::Matrix x(kTensorSize, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(b.obs[rows[i]]->data.begin(), b.obs[rows[i]]->data.end(),
              x.col(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

/// Mean KL(old || new) over included rows, and max |ratio - 1|.
inline std::pair<double, double> kl_and_ratio(const PolicyNet& policy, const PpoBatch& b,
                                              std::span<const std::size_t> rows) {
  const nn::Mat<float> logp = nn::log_softmax<float>(policy.forward(batch_inputs(b, rows)));
  double kl = 0, dev = 0;
  int counted = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (!b.include[r]) continue;
    const auto col = static_cast<Eigen::Index>(i);
    double k = 0;
    for (int a = 0; a < kNumActions; ++a) {
      const double p = b.old_probs[r][a];
      if (p > 0) k += p * (std::log(p) - static_cast<double>(logp(a, col)));
    }
    kl += k;
    dev = std::max(dev, std::abs(std::exp(logp(b.actions[r], col) - b.old_log_probs[r]) - 1.0));
    ++counted;
  }
  return {counted ? kl / counted : 0.0, dev};
}

}  // namespace detail

/// Clipped-surrogate update of the policy and squared-error update of the
/// value net over `epochs` passes in shuffled minibatches. Policy steps stop
/// for the rest of the update once a minibatch's KL(old || new) exceeds
/// kl_stop; value steps continue. With `update_policy` false only the value
/// net moves. A non-finite loss or gradient restores both nets and both
/// optimizers to their state on entry.
inline PpoStats ppo_update(PolicyNet& policy, ValueNet& value, nn::Adam& policy_opt,
                           nn::Adam& value_opt, const PpoBatch& batch, const PpoConfig& cfg,
                           Rng& rng, bool update_policy = true) {
  PpoStats st;
  st.samples = batch.size();
  st.policy_samples = batch.policy_samples();
  st.excluded = st.samples - st.policy_samples;
  if (batch.size() == 0) return st;

  const PolicyNet policy_saved = policy;
  const ValueNet value_saved = value;
  const nn::Adam popt_saved = policy_opt, vopt_saved = value_opt;

  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), 0);
  try {
    if (update_policy && st.policy_samples > 0) {
      st.first_ratio_max_dev = detail::kl_and_ratio(policy, batch, all).second;
    }
    std::vector<float> pgrad(policy.num_params()), vgrad(value.num_params());
    double clipped = 0, counted = 0;
    bool policy_live = update_policy && st.policy_samples > 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<std::size_t> order = all;
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        const std::size_t n = std::min<std::size_t>(cfg.batch, order.size() - start);
        const std::span<const std::size_t> rows(order.data() + start, n);
        const PolicyNet::Matrix x = detail::batch_inputs(batch, rows);

        if (policy_live) {
          std::vector<int> actions(n);
          std::vector<double> old_lp(n), adv(n);
          std::vector<std::uint8_t> inc(n);
          for (std::size_t i = 0; i < n; ++i) {
            actions[i] = batch.actions[rows[i]];
            old_lp[i] = batch.old_log_probs[rows[i]];
            adv[i] = batch.advantages[rows[i]];
            inc[i] = batch.include[rows[i]];
          }
          if (std::count(inc.begin(), inc.end(), 1) > 0) {
            PolicyNet::Cache cache;
            const PolicyNet::Matrix logits = policy.forward(x, nn::Mode::Eval, nullptr, &cache);
            // KL of this minibatch before stepping on it.
            const nn::Mat<float> logp = nn::log_softmax<float>(logits);
            double kl = 0;
            int kn = 0;
            for (std::size_t i = 0; i < n; ++i) {
              if (!inc[i]) continue;
              for (int a = 0; a < kNumActions; ++a) {
                const double p = batch.old_probs[rows[i]][a];
                if (p > 0) {
                  kl += p * (std::log(p) - static_cast<double>(logp(a, static_cast<Eigen::Index>(i))));
                }
              }
              ++kn;
            }
            kl /= kn;
            if (kl > cfg.kl_stop) {
              policy_live = false;
              st.early_stopped = true;
            } else {
              nn::Mat<float> d;
              const nn::PpoLossStats ls =
                  nn::ppo_clip_loss<float>(logits, {actions, old_lp, adv, inc}, cfg.clip, &d);
              if (cfg.entropy_coef != 0.0) {
                // Loss gains -c * H / counted; dH/dz_j = -p_j (log p_j + H).
                const nn::Mat<float> p = nn::softmax<float>(logits);
                for (std::size_t i = 0; i < n; ++i) {
                  if (!inc[i]) continue;
                  const auto c = static_cast<Eigen::Index>(i);
                  double h = 0;
                  for (int a = 0; a < kNumActions; ++a) h -= p(a, c) * logp(a, c);
                  for (int a = 0; a < kNumActions; ++a) {
                    d(a, c) += static_cast<float>(cfg.entropy_coef * p(a, c) *
                                                  (logp(a, c) + h) / ls.counted);
                  }
                }
              }
              std::fill(pgrad.begin(), pgrad.end(), 0.0f);
              policy.backward(cache, d, pgrad);
              policy_opt.step<float>(policy.params(), pgrad);
              st.policy_loss += ls.loss;
              clipped += ls.clip_fraction * ls.counted;
              counted += ls.counted;
              ++st.policy_steps;
            }
          }
        }

        std::vector<double> targets(n);
        for (std::size_t i = 0; i < n; ++i) targets[i] = batch.returns[rows[i]];
        ValueNet::Cache vcache;
        const ValueNet::Matrix v = value.forward(x, nn::Mode::Eval, nullptr, &vcache);
        nn::Mat<float> dv;
        st.value_loss += nn::squared_error<float>(v, targets, &dv);
        std::fill(vgrad.begin(), vgrad.end(), 0.0f);
        value.backward(vcache, dv, vgrad);
        value_opt.step<float>(value.params(), vgrad);
        ++st.value_steps;
      }
      ++st.epochs_run;
    }
    if (st.policy_steps > 0) st.policy_loss /= st.policy_steps;
    if (st.value_steps > 0) st.value_loss /= st.value_steps;
    st.clip_fraction = counted > 0 ? clipped / counted : 0.0;
    if (update_policy && st.policy_samples > 0) {
      st.kl = detail::kl_and_ratio(policy, batch, all).first;
    }
    for (const float w : policy.params()) {
      if (!std::isfinite(w)) throw std::runtime_error("non-finite policy parameter");
    }
    for (const float w : value.params()) {
      if (!std::isfinite(w)) throw std::runtime_error("non-finite value parameter");
    }
  } catch (const std::runtime_error& e) {
    policy = policy_saved;
    value = value_saved;
    policy_opt = popt_saved;
    value_opt = vopt_saved;
    st.aborted = true;
    st.abort_reason = e.what();
  }
  return st;
}

}  // namespace pommer

#endif  // POMMER_TRAINING_PPO_HPP_
