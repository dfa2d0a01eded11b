#ifndef POMMER_NN_LOSSES_HPP_
#define POMMER_NN_LOSSES_HPP_

// Batch losses over network outputs (one column per sample). Each returns
// the mean loss and writes d(loss)/d(outputs).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pommer/engine.hpp"
#include "pommer/random.hpp"

namespace pommer::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Column-wise softmax, shifted by the column max.
template <typename T>
Mat<T> softmax(const Mat<T>& logits) {
  Mat<T> p(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const T m = logits.col(s).maxCoeff();
    p.col(s) = (logits.col(s).array() - m).exp();
    p.col(s) /= p.col(s).sum();
  }
  return p;
}

template <typename T>
Mat<T> log_softmax(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const T m = logits.col(s).maxCoeff();
    const T lse = m + std::log((logits.col(s).array() - m).exp().sum());
    out.col(s) = logits.col(s).array() - lse;
  }
  return out;
}

struct ActionDistribution {
  std::array<double, kNumActions> probs{};

  double log_prob(Action a) const {
    return std::log(std::max(probs[static_cast<int>(a)], 1e-300));
  }
  Action sample(Rng& rng) const {
    return static_cast<Action>(rng.categorical(std::span<const double>(probs)));
  }
  Action argmax() const {
    return static_cast<Action>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
};

template <typename T>
ActionDistribution distribution_of(const Mat<T>& logits, Eigen::Index col = 0) {
  const Mat<T> p = softmax<T>(logits.col(col));
  ActionDistribution d;
  for (int a = 0; a < kNumActions; ++a) d.probs[a] = static_cast<double>(p(a, 0));
  return d;
}

template <typename T>
void check_finite(T loss, const char* what) {
  if (!std::isfinite(static_cast<double>(loss))) {
    throw std::runtime_error(std::string(what) + " loss is not finite");
  }
}

/// Mean negative log-likelihood of `actions` under softmax(logits).
template <typename T>
T cross_entropy(const Mat<T>& logits, std::span<const int> actions, Mat<T>* grad) {
  const Eigen::Index n = logits.cols();
  if (static_cast<Eigen::Index>(actions.size()) != n || n == 0) {
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  }
  const Mat<T> logp = log_softmax<T>(logits);
  T loss = 0;
  for (Eigen::Index s = 0; s < n; ++s) loss -= logp(actions[s], s);
  loss /= static_cast<T>(n);
  check_finite(loss, "cross-entropy");
  if (grad) {
    *grad = logp.array().exp();
    for (Eigen::Index s = 0; s < n; ++s) (*grad)(actions[s], s) -= T(1);
    *grad /= static_cast<T>(n);
  }
  return loss;
}

struct PpoBatchView {
  std::span<const int> actions;
  std::span<const double> old_log_probs;
  std::span<const double> advantages;
  std::span<const std::uint8_t> include;  // 0: sample left out of the policy loss
};

struct PpoLossStats {
  double loss = 0;
  double clip_fraction = 0;
  int counted = 0;
};

/// Negative clipped surrogate, averaged over included samples:
///   -mean(min(r*A, clip(r, 1-eps, 1+eps)*A)),  r = exp(logp - logp_old).
template <typename T>
PpoLossStats ppo_clip_loss(const Mat<T>& logits, const PpoBatchView& b, double clip,
                           Mat<T>* grad) {
  const Eigen::Index n = logits.cols();
  if (static_cast<Eigen::Index>(b.actions.size()) != n ||
      b.old_log_probs.size() != b.actions.size() ||
      b.advantages.size() != b.actions.size() || b.include.size() != b.actions.size()) {
    throw std::invalid_argument("ppo_clip_loss: batch size mismatch");
  }
  const Mat<T> logp = log_softmax<T>(logits);
  PpoLossStats st;
  for (Eigen::Index s = 0; s < n; ++s) st.counted += b.include[s] != 0;
  if (grad) *grad = Mat<T>::Zero(logits.rows(), n);
  if (st.counted == 0) return st;
  const T inv = T(1) / static_cast<T>(st.counted);
  T loss = 0;
  int clipped = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!b.include[s]) continue;
    const int a = b.actions[s];
    const T ratio = std::exp(logp(a, s) - static_cast<T>(b.old_log_probs[s]));
    const T adv = static_cast<T>(b.advantages[s]);
    const T lo = static_cast<T>(1.0 - clip), hi = static_cast<T>(1.0 + clip);
    const T clipped_ratio = std::clamp(ratio, lo, hi);
    const T unclipped = ratio * adv;
    const T bounded = clipped_ratio * adv;
    const bool use_unclipped = unclipped <= bounded;
    loss -= std::min(unclipped, bounded);
    if (ratio < lo || ratio > hi) ++clipped;
    if (grad && use_unclipped) {
      // d(-r*A)/dlogits = -r*A*(onehot(a) - p)
      const T scale = -unclipped * inv;
      for (Eigen::Index k = 0; k < logits.rows(); ++k) {
        const T p = std::exp(logp(k, s));
        (*grad)(k, s) = scale * ((k == a ? T(1) : T(0)) - p);
      }
    }
  }
  st.loss = static_cast<double>(loss * inv);
  st.clip_fraction = static_cast<double>(clipped) / st.counted;
  check_finite(st.loss, "policy");
  return st;
}

/// Mean of (value - target)^2 over a 1 x batch output.
template <typename T>
T squared_error(const Mat<T>& values, std::span<const double> targets, Mat<T>* grad) {
  const Eigen::Index n = values.cols();
  if (values.rows() != 1 || static_cast<Eigen::Index>(targets.size()) != n || n == 0) {
    throw std::invalid_argument("squared_error: shape mismatch");
  }
  T loss = 0;
  if (grad) grad->resize(1, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const T diff = values(0, s) - static_cast<T>(targets[s]);
    loss += diff * diff;
    if (grad) (*grad)(0, s) = T(2) * diff / static_cast<T>(n);
  }
  loss /= static_cast<T>(n);
  check_finite(loss, "value");
  return loss;
}

}  // namespace pommer::nn

#endif  // POMMER_NN_LOSSES_HPP_
