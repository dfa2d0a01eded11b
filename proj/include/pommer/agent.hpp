#ifndef POMMER_AGENT_HPP_
#define POMMER_AGENT_HPP_

#include <cstdint>
#include <memory>
#include <string>

#include "pommer/observation.hpp"

namespace pommer {

/// Anything that plays one seat. Instances carry per-game state, so use one
/// per agent per game and call reset() before each game.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t seed) { (void)seed; }
  virtual Action act(const RawObservation& obs) = 0;
};

using AgentPtr = std::unique_ptr<Agent>;

}  // namespace pommer

#endif  // POMMER_AGENT_HPP_
