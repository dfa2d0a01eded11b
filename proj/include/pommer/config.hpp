#ifndef POMMER_CONFIG_HPP_
#define POMMER_CONFIG_HPP_

// Flat run configuration: dotted keys, one `key = value` per line, '#'
// comments. Every key has a default; unknown keys are rejected so a typo
// cannot silently fall back to a default.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pommer/random.hpp"

namespace pommer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

class RunConfig {
 public:
  RunConfig() {
    values_ = {
        {"seed", "1"},
        {"scale", "1"},
        {"workers", "0"},
        {"board.rigid_walls", "36"},
        {"board.wooden_walls", "36"},
        {"board.powerup_probability", "0.5"},
        {"net.conv", "32,64,64"},
        {"net.pool", "1,1,0"},
        {"net.dense", "128"},
        {"net.dropout", "0.2"},
        {"imitation.epochs", "1"},
        {"imitation.batch", "64"},
        {"imitation.learning_rate", "0.001"},
        {"imitation.eval_every", "1000"},
        {"imitation.holdout_fraction", "0.1"},
        {"imitation.max_steps", "0"},
        {"ppo.clip", "0.01"},
        {"ppo.batch", "128"},
        {"ppo.entropy_coef", "0"},
        {"ppo.gamma", "0.99"},
        {"ppo.lambda", "0.95"},
        {"ppo.kl_stop", "0.01"},
        {"ppo.epochs", "4"},
        {"ppo.policy_learning_rate", "0.00025"},
        {"ppo.value_learning_rate", "0.001"},
        {"ppo.normalize_advantages", "1"},
        {"ppo.games_per_update", "4"},
        {"curriculum.phases",
         "SimpleAgent:10000:frozen,StaticAgent:10000,SimpleAgent_NoBomb:20000,"
         "SimpleAgent:60000"},
        {"curriculum.cautious", "0"},
        {"curriculum.teammate_suicide", "1"},
        {"curriculum.shaped_reward", "1"},
        {"curriculum.save_every", "50"},
        {"arming.jitter", "0.10"},
        {"arming.action", "0.30"},
        {"eval.imitation_greedy", "1"},
        {"eval.ppo_greedy", "0"},
    };
  }

  /// Applies `key=value`. Throws ConfigError on unknown keys.
  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  /// Accepts "key=value" or several separated by ';'.
  void apply_overrides(std::string_view text) {
    for (const std::string& item : detail::split(text, ';')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + item + "'");
      set(detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
      }
      set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: '" + s + "'");
    }
  }

  std::int64_t integer(const std::string& key) const {
    const std::string& s = str(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("config key '" + key + "' is not an integer: '" + s + "'");
    }
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + s + "'");
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    const std::string& s = str(key);
    if (detail::trim(s).empty()) return out;
    for (const std::string& item : detail::split(s, ',')) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        throw ConfigError("config key '" + key + "' has a bad list entry '" + item + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  /// Canonical text: every key in sorted order.
  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
  }

  /// Hash over the canonical text, excluding keys that cannot change results.
  std::uint64_t hash() const {
    std::string text;
    for (const auto& [k, v] : values_) {
      if (k == "workers") continue;
      text += k;
      text += '=';
      text += v;
      text += '\n';
    }
    return fnv1a(text);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pommer

#endif  // POMMER_CONFIG_HPP_
