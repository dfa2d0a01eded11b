#ifndef POMMER_REGISTRY_HPP_
#define POMMER_REGISTRY_HPP_

// Agent names: a base name plus optional "_jitter" and "_action" suffixes
// (in that order), or "_Vanilla" for neither. Base names:
//   StaticAgent, SimpleAgent, SimpleAgent_NoBomb, RandomAgent   scripted
//   Imitation, PPO (alias PPOAgent), PPOAgent_Cautious   need a network

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pommer/agents.hpp"
#include "pommer/network_agent.hpp"

namespace pommer {

class UnknownAgent : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AgentName {
  std::string base;
  bool jitter = false;
  bool action = false;
};

inline AgentName parse_agent_name(std::string_view name) {
  AgentName out;
  auto strip = [&](std::string_view suffix) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      name.remove_suffix(suffix.size());
      return true;
    }
    return false;
  };
  if (!strip("_Vanilla")) {
    out.action = strip("_action");
    out.jitter = strip("_jitter");
  }
  out.base = std::string(name);
  if (out.base == "PPOAgent") out.base = "PPO";
  return out;
}

/// Builds fresh agents by name. Network-backed bases are registered with the
/// network they share and whether they act greedily.
class AgentCatalog {
 public:
  void set_policy(const std::string& base, std::shared_ptr<const PolicyNet> net,
                  bool greedy) {
    if (!is_network_base(base)) throw UnknownAgent("not a network agent: " + base);
    policies_[base] = {std::move(net), greedy};
  }
  bool has_policy(const std::string& base) const { return policies_.count(base) > 0; }

  static bool is_network_base(std::string_view base) {
    return base == "Imitation" || base == "PPO" || base == "PPOAgent_Cautious";
  }
  static bool is_scripted_base(std::string_view base) {
    return base == "StaticAgent" || base == "SimpleAgent" || base == "SimpleAgent_NoBomb" ||
           base == "RandomAgent";
  }

  /// Throws UnknownAgent for names that cannot be resolved.
  AgentPtr make(std::string_view name) const {
    const AgentName parsed = parse_agent_name(name);
    AgentPtr base = make_base(parsed.base);
    AgentPtr expert = parsed.jitter ? std::make_unique<SimpleAgent>() : nullptr;
    return wrap_with_filters(std::move(base), parsed.jitter, parsed.action, std::move(expert));
  }

  void validate(std::string_view name) const { (void)make(name); }

 private:
  AgentPtr make_base(const std::string& base) const {
    if (base == "StaticAgent") return std::make_unique<StaticAgent>();
    if (base == "RandomAgent") return std::make_unique<RandomAgent>();
    if (base == "SimpleAgent") return std::make_unique<SimpleAgent>();
    if (base == "SimpleAgent_NoBomb") {
      return std::make_unique<SimpleAgent>(SimpleAgentOptions{.bombs = false});
    }
    if (is_network_base(base)) {
      auto it = policies_.find(base);
      if (it == policies_.end()) throw UnknownAgent("no checkpoint loaded for " + base);
      return std::make_unique<NetworkAgent>(base, it->second.net, it->second.greedy);
    }
    throw UnknownAgent("unknown agent '" + base + "'");
  }

  struct Entry {
    std::shared_ptr<const PolicyNet> net;
    bool greedy = false;
  };
  std::map<std::string, Entry> policies_;
};

}  // namespace pommer

#endif  // POMMER_REGISTRY_HPP_
