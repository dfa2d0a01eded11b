#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "pommer/nn/checkpoint.hpp"
#include "pommer/nn/gradcheck.hpp"
#include "pommer/nn/losses.hpp"
#include "pommer/nn/optimizer.hpp"

namespace pommer::nn {
namespace {

NetSpec tiny_spec(int outputs) {
  NetSpec s;
  s.conv_filters = {2, 2, 2};
  s.pool_after = {1, 1, 0};
  s.dense_units = {8};
  s.outputs = outputs;
  return s;
}

Eigen::MatrixXd random_input(int rows, int batch, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = static_cast<double>(rng.uniform_int(4)) + rng.uniform01() - 0.5;
  }
  return x;
}

TEST(Network, PolicyParameterCount) {
  const Network<float> net(NetSpec::policy());
  // conv 19->32, 32->64, 64->64, dense 256->128, 128->6
  const std::size_t expected = (32 * 19 * 9 + 32) + (64 * 32 * 9 + 64) + (64 * 64 * 9 + 64) +
                               (128 * 256 + 128) + (6 * 128 + 6);
  EXPECT_EQ(net.num_params(), expected);
  const Network<float> value(NetSpec::value());
  EXPECT_EQ(value.num_params(), expected - 5 * 128 - 5);
}

TEST(Network, ZeroParamsGiveUniformAndZeroValue) {
  const Network<float> policy(NetSpec::policy());
  const Network<float> value(NetSpec::value());
  const auto x = random_input(kTensorSize, 3, 1).cast<float>().eval();
  const auto p = softmax<float>(policy.forward(x));
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p.data()[i], 1.0 / 6.0, 1e-7);
  const auto v = value.forward(x);
  for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_EQ(v.data()[i], 0.0f);
}

TEST(Network, SoftmaxNormalisedFuzz) {
  Network<float> net(NetSpec::policy());
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    net.init(rng());
    // Scale weights up to push logits far apart.
    for (float& w : net.params()) w *= 1.0f + 10.0f * static_cast<float>(trial % 3);
    const auto x = random_input(kTensorSize, 4, rng()).cast<float>().eval();
    const auto p = softmax<float>(net.forward(x));
    for (Eigen::Index s = 0; s < p.cols(); ++s) {
      EXPECT_NEAR(p.col(s).sum(), 1.0f, 1e-6);
      EXPECT_GE(p.col(s).minCoeff(), 0.0f);
    }
  }
}

TEST(Network, ValueIsFiniteScalar) {
  Network<float> value(NetSpec::value());
  value.init(3);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_input(kTensorSize, 1, rng()).cast<float>().eval();
    const auto v = value.forward(x);
    ASSERT_EQ(v.rows(), 1);
    ASSERT_EQ(v.cols(), 1);
    ASSERT_TRUE(std::isfinite(v(0, 0)));
  }
}

TEST(Network, EvalDeterministicTrainUsesDropout) {
  Network<float> net(NetSpec::policy());
  net.init(5);
  const auto x = random_input(kTensorSize, 2, 6).cast<float>().eval();
  EXPECT_EQ(net.forward(x), net.forward(x));
  Rng a(1), b(1), c(2);
  EXPECT_EQ(net.forward(x, Mode::Train, &a), net.forward(x, Mode::Train, &b));
  EXPECT_NE(net.forward(x, Mode::Train, &c), net.forward(x));
  EXPECT_THROW(net.forward(x, Mode::Train), std::invalid_argument);
}

TEST(Network, ShapeMismatchRejected) {
  const Network<float> net(NetSpec::policy());
  EXPECT_THROW(net.forward(Eigen::MatrixXf::Zero(100, 1)), std::invalid_argument);
  NetSpec bad;
  bad.pool_after = {1};
  EXPECT_THROW(Network<float>{bad}, std::invalid_argument);
}

TEST(Network, PolicyAndValueDisjoint) {
  Network<float> policy(NetSpec::policy());
  Network<float> value(NetSpec::value());
  policy.init(7);
  value.init(8);
  const auto x = random_input(kTensorSize, 2, 9).cast<float>().eval();
  const auto before = value.forward(x);
  Rng rng(10);
  for (int i = 0; i < 50; ++i) {
    policy.params()[rng.uniform_int(policy.num_params())] += 1.0f;
    ASSERT_EQ(value.forward(x), before);
  }
}

// Gradient checks: central differences in double precision.

struct GradCase {
  Network<double> net;
  Eigen::MatrixXd x;
};

GradCase make_case(int outputs, std::uint64_t seed, int batch = 4) {
  GradCase c{Network<double>(tiny_spec(outputs)), random_input(kTensorSize, batch, seed)};
  c.net.init(seed + 1);
  return c;
}

TEST(GradCheck, CrossEntropy) {
  GradCase c = make_case(kNumActions, 11);
  const std::vector<int> actions = {0, 5, 2, 3};
  const auto r = gradient_check(c.net, c.x, [&](const Eigen::MatrixXd& out, Eigen::MatrixXd* g) {
    return cross_entropy<double>(out, actions, g);
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << "abs " << r.max_absolute_error;
  EXPECT_GT(r.checked, static_cast<int>(c.net.num_params()) * 9 / 10);
}

TEST(GradCheck, CrossEntropyWithDropout) {
  GradCase c = make_case(kNumActions, 12);
  const std::vector<int> actions = {1, 1, 4, 0};
  const auto r = gradient_check(
      c.net, c.x,
      [&](const Eigen::MatrixXd& out, Eigen::MatrixXd* g) {
        return cross_entropy<double>(out, actions, g);
      },
      1e-4, 1e-6, Mode::Train, 99);
  EXPECT_LT(r.max_relative_error, 1e-4) << "abs " << r.max_absolute_error;
}

TEST(GradCheck, PpoClip) {
  GradCase c = make_case(kNumActions, 13, 6);
  const Eigen::MatrixXd logits = c.net.forward(c.x);
  const Eigen::MatrixXd logp = log_softmax<double>(logits);
  const std::vector<int> actions = {0, 1, 2, 3, 4, 5};
  // Old log-probs offset so ratios land inside and outside the clip range.
  const std::vector<double> offsets = {0.0, 0.003, -0.004, 0.05, -0.06, 0.2};
  std::vector<double> old(6);
  for (int s = 0; s < 6; ++s) old[s] = logp(actions[s], s) + offsets[s];
  const std::vector<double> adv = {1.0, -0.5, 2.0, -1.5, 0.7, 1.2};
  const std::vector<std::uint8_t> include = {1, 1, 1, 1, 1, 0};
  const PpoBatchView view{actions, old, adv, include};
  const auto r = gradient_check(c.net, c.x, [&](const Eigen::MatrixXd& out, Eigen::MatrixXd* g) {
    return ppo_clip_loss<double>(out, view, 0.01, g).loss;
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << "abs " << r.max_absolute_error;
  EXPECT_GT(r.checked, 0);
}

TEST(GradCheck, SquaredError) {
  GradCase c = make_case(1, 14);
  const std::vector<double> targets = {0.5, -1.0, 1.0, 0.0};
  const auto r = gradient_check(c.net, c.x, [&](const Eigen::MatrixXd& out, Eigen::MatrixXd* g) {
    return squared_error<double>(out, targets, g);
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << "abs " << r.max_absolute_error;
}

std::vector<double> gradient_of(Network<double>& net, const Eigen::MatrixXd& x,
                                const std::vector<int>& actions) {
  Network<double>::Cache cache;
  const Eigen::MatrixXd out = net.forward(x, Mode::Eval, nullptr, &cache);
  Eigen::MatrixXd d;
  cross_entropy<double>(out, actions, &d);
  std::vector<double> g(net.num_params(), 0.0);
  net.backward(cache, d, g);
  return g;
}

TEST(Backward, DuplicatedBatchSameGradient) {
  GradCase c = make_case(kNumActions, 15, 3);
  const std::vector<int> actions = {2, 0, 5};
  const auto g1 = gradient_of(c.net, c.x, actions);
  Eigen::MatrixXd doubled(c.x.rows(), 6);
  doubled << c.x, c.x;
  const auto g2 = gradient_of(c.net, doubled, {2, 0, 5, 2, 0, 5});
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(Ppo, IdentityUpdateRatioOne) {
  GradCase c = make_case(kNumActions, 16, 5);
  const Eigen::MatrixXd logits = c.net.forward(c.x);
  const Eigen::MatrixXd logp = log_softmax<double>(logits);
  const std::vector<int> actions = {0, 1, 2, 3, 4};
  std::vector<double> old(5);
  for (int s = 0; s < 5; ++s) old[s] = logp(actions[s], s);
  const std::vector<double> adv = {1, 2, 3, -1, 0.5};
  const std::vector<std::uint8_t> include(5, 1);
  const auto st = ppo_clip_loss<double>(logits, {actions, old, adv, include}, 0.01, nullptr);
  EXPECT_NEAR(st.loss, -(1 + 2 + 3 - 1 + 0.5) / 5.0, 1e-12);
  EXPECT_EQ(st.clip_fraction, 0.0);
}

TEST(Ppo, ZeroAdvantageZeroGradient) {
  GradCase c = make_case(kNumActions, 17, 4);
  const Eigen::MatrixXd logits = c.net.forward(c.x);
  const std::vector<int> actions = {0, 1, 2, 3};
  const std::vector<double> old = {-1.0, -2.0, -1.5, -0.3};
  const std::vector<double> adv(4, 0.0);
  const std::vector<std::uint8_t> include(4, 1);
  Eigen::MatrixXd g;
  ppo_clip_loss<double>(logits, {actions, old, adv, include}, 0.01, &g);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ppo, ClipArithmetic) {
  // One sample, ratio 1.05, advantage 2: the objective is capped at 1.01 * A.
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(kNumActions, 1);
  const double logp = std::log(1.0 / 6.0);
  const std::vector<int> actions = {3};
  const std::vector<double> old = {logp - std::log(1.05)};
  const std::vector<double> adv = {2.0};
  const std::vector<std::uint8_t> include = {1};
  Eigen::MatrixXd g;
  const auto st = ppo_clip_loss<double>(logits, {actions, old, adv, include}, 0.01, &g);
  EXPECT_NEAR(st.loss, -1.01 * 2.0, 1e-12);
  EXPECT_EQ(st.clip_fraction, 1.0);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ppo, ExcludedSamplesContributeNothing) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Random(kNumActions, 3);
  const std::vector<int> actions = {1, 2, 3};
  const std::vector<double> old = {-1.0, -1.0, -1.0};
  const std::vector<double> adv = {1.0, 5.0, -2.0};
  const std::vector<std::uint8_t> include = {1, 0, 1};
  Eigen::MatrixXd g;
  const auto st = ppo_clip_loss<double>(logits, {actions, old, adv, include}, 0.01, &g);
  EXPECT_EQ(st.counted, 2);
  EXPECT_EQ(g.col(1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Losses, NonFiniteRejected) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(kNumActions, 1);
  logits(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> actions = {0};
  EXPECT_THROW(cross_entropy<double>(logits, actions, nullptr), std::runtime_error);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<float> p = {1.0f, -2.0f, 3.0f};
  const std::vector<float> g(3, 0.0f);
  Adam opt(3, {});
  opt.step<float>(p, g);
  EXPECT_EQ(p, (std::vector<float>{1.0f, -2.0f, 3.0f}));
}

TEST(Adam, DescendsQuadratic) {
  std::vector<double> w = {1.0};
  Adam opt(1, {.learning_rate = 0.01});
  double last = std::abs(w[0]);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> g = {2.0 * w[0]};
    opt.step<double>(w, g);
    EXPECT_LT(std::abs(w[0]), last);
    last = std::abs(w[0]);
  }
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
  std::vector<float> a = {0.5f, 0.25f}, b = a;
  Adam oa(2, {}), ob(2, {});
  for (int i = 0; i < 10; ++i) {
    const std::vector<float> g = {0.1f * i, -0.2f};
    oa.step<float>(a, g);
    ob.step<float>(b, g);
  }
  EXPECT_EQ(a, b);
  const std::vector<float> bad = {std::numeric_limits<float>::infinity(), 0.0f};
  const auto before = a;
  EXPECT_THROW(oa.step<float>(a, bad), NonFiniteGradient);
  EXPECT_EQ(a, before);
  EXPECT_EQ(oa.steps(), 10);
}

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() /
                               ("pommer_ck_" + std::to_string(::getpid()));
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(CheckpointTest, RoundTripBitIdentical) {
  Network<float> net(NetSpec::policy());
  net.init(21);
  const auto path = dir_ / "p.ckpt";
  save_checkpoint(path, net, Mode::Eval, 77);
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.net.spec(), net.spec());
  EXPECT_EQ(ck.config_hash, 77u);
  EXPECT_EQ(params_hash(ck.net), params_hash(net));
  const auto x = random_input(kTensorSize, 3, 22).cast<float>().eval();
  EXPECT_EQ(ck.net.forward(x), net.forward(x));

  const auto again = dir_ / "q.ckpt";
  save_checkpoint(again, ck.net, ck.mode, ck.config_hash);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST_F(CheckpointTest, CorruptRejected) {
  Network<float> net(tiny_spec(6));
  const auto path = dir_ / "c.ckpt";
  save_checkpoint(path, net, Mode::Eval, 1);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
  EXPECT_THROW(load_checkpoint(path), FileFormatError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage";
  }
  EXPECT_THROW(load_checkpoint(path), FileFormatError);
}

}  // namespace
}  // namespace pommer::nn
