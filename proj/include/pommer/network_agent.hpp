#ifndef POMMER_NETWORK_AGENT_HPP_
#define POMMER_NETWORK_AGENT_HPP_

#include <memory>
#include <string>

#include "pommer/agent.hpp"
#include "pommer/encoder.hpp"
#include "pommer/nn/losses.hpp"
#include "pommer/nn/network.hpp"

namespace pommer {

using PolicyNet = nn::Network<float>;

/// Acts from a policy network: argmax when greedy, otherwise a draw from the
/// softmax with the agent's own stream.
class NetworkAgent : public Agent {
 public:
  NetworkAgent(std::string name, std::shared_ptr<const PolicyNet> net, bool greedy)
      : name_(std::move(name)), net_(std::move(net)), greedy_(greedy) {
    if (!net_ || net_->spec().outputs != kNumActions) {
      throw std::invalid_argument("NetworkAgent needs a policy network");
    }
  }

  std::string name() const override { return name_; }
  void reset(std::uint64_t seed) override { rng_ = Rng(seed); }

  Action act(const RawObservation& obs) override {
    last_ = distribution(obs);
    return greedy_ ? last_.argmax() : last_.sample(rng_);
  }

  nn::ActionDistribution distribution(const RawObservation& obs) const {
    const ObservationTensor t = encode(obs);
    const PolicyNet::Matrix x =
        Eigen::Map<const PolicyNet::Matrix>(t.data.data(), kTensorSize, 1);
    return nn::distribution_of<float>(net_->forward(x));
  }

  const nn::ActionDistribution& last_distribution() const { return last_; }
  bool greedy() const { return greedy_; }

 private:
  std::string name_;
  std::shared_ptr<const PolicyNet> net_;
  bool greedy_;
  Rng rng_{0};
  nn::ActionDistribution last_;
};

}  // namespace pommer

#endif  // POMMER_NETWORK_AGENT_HPP_
