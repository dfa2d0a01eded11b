#ifndef POMMER_TESTS_JITTER_TRACES_HPP_
#define POMMER_TESTS_JITTER_TRACES_HPP_

// Synthetic position traces for jitter detection and an oracle that evaluates
// each window condition separately with slice semantics.

#include <set>
#include <string>
#include <vector>

#include "pommer/filters.hpp"
#include "pommer/random.hpp"

namespace pommer::testing {

struct JitterTrace {
  std::string kind;
  PositionHistory history;
};

/// v[start::step] for a negative start, or nullopt if |start| > size.
inline std::optional<std::set<int>> py_slice_set(const std::vector<int>& v, int start,
                                                 int step) {
  const int n = static_cast<int>(v.size());
  if (-start > n) return std::nullopt;
  std::set<int> out;
  for (int i = n + start; i < n; i += step) out.insert(v[i]);
  return out;
}

inline bool set_size_is(const std::optional<std::set<int>>& s, std::size_t k) {
  return s && s->size() == k;
}

inline JitterVerdict jitter_oracle(const PositionHistory& h) {
  const bool static_cond1 = set_size_is(py_slice_set(h.xs, -15, 1), 1);
  const bool static_cond2 = set_size_is(py_slice_set(h.ys, -15, 1), 1);

  auto axis_conds = [](const std::vector<int>& a, const std::vector<int>& b) {
    const auto odd = py_slice_set(a, -10, 2);
    const auto even = py_slice_set(a, -11, 2);
    const bool cond_odd = set_size_is(odd, 1);
    const bool cond_even = set_size_is(even, 1);
    bool cond_uneq = false;
    if (odd && even) {
      for (int v : *even) cond_uneq = cond_uneq || odd->count(v) == 0;
    }
    const bool cond_long = set_size_is(py_slice_set(a, -35, 1), 2);
    const bool other_long = set_size_is(py_slice_set(b, -35, 1), 1);
    return (cond_odd && cond_even && cond_uneq) || (cond_long && other_long);
  };

  if (static_cond1 && static_cond2) return JitterVerdict::Static;
  if (axis_conds(h.xs, h.ys)) return JitterVerdict::OscillateX;
  if (axis_conds(h.ys, h.xs)) return JitterVerdict::OscillateY;
  return JitterVerdict::None;
}

inline PositionHistory make_history(const std::vector<Position>& ps) {
  PositionHistory h;
  for (const Position p : ps) h.append(p);
  return h;
}

inline Position random_cell(Rng& rng) {
  return {static_cast<int>(rng.uniform_int(kBoardSize)),
          static_cast<int>(rng.uniform_int(kBoardSize))};
}

// Lattice walk that keeps moving; prefix of random length.
inline std::vector<Position> wander(Rng& rng, int n, Position start) {
  std::vector<Position> out;
  Position p = start;
  for (int i = 0; i < n; ++i) {
    for (;;) {
      const Position q = moved(p, kMoveActions[rng.uniform_int(4)]);
      if (q.in_bounds()) {
        p = q;
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

/// 200 traces: 40 each of static, x-oscillating, y-oscillating, long
/// two-value, and negative controls.
inline std::vector<JitterTrace> jitter_trace_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<JitterTrace> out;
  for (int i = 0; i < 40; ++i) {
    const Position p = random_cell(rng);
    std::vector<Position> ps = wander(rng, static_cast<int>(rng.uniform_int(20)), p);
    const int hold = 15 + static_cast<int>(rng.uniform_int(10));
    for (int k = 0; k < hold; ++k) ps.push_back(p);
    out.push_back({"static", make_history(ps)});
  }
  for (int axis = 0; axis < 2; ++axis) {
    for (int i = 0; i < 40; ++i) {
      const int a = 1 + static_cast<int>(rng.uniform_int(kBoardSize - 2));
      const int b = static_cast<int>(rng.uniform_int(kBoardSize - 2)) + 1;
      std::vector<Position> ps =
          wander(rng, static_cast<int>(rng.uniform_int(20)), {a, b});
      const int len = 11 + static_cast<int>(rng.uniform_int(12));
      for (int k = 0; k < len; ++k) {
        const int off = (k % 2) ? 1 : 0;
        ps.push_back(axis == 0 ? Position{a + off, b} : Position{a, b + off});
      }
      out.push_back({axis == 0 ? "oscillate_x" : "oscillate_y", make_history(ps)});
    }
  }
  for (int i = 0; i < 40; ++i) {
    // Two values in an irregular pattern over 35 ticks on one axis, the other
    // axis fixed.
    const int a = static_cast<int>(rng.uniform_int(kBoardSize - 1));
    const int b = static_cast<int>(rng.uniform_int(kBoardSize));
    std::vector<Position> ps;
    for (int k = 0; k < 35 + static_cast<int>(rng.uniform_int(10)); ++k) {
      const int v = a + static_cast<int>(rng.uniform_int(2));
      ps.push_back((i % 2) ? Position{b, v} : Position{v, b});
    }
    out.push_back({"two_value_long", make_history(ps)});
  }
  for (int i = 0; i < 40; ++i) {
    std::vector<Position> ps;
    switch (i % 4) {
      case 0:  // short static history
        ps.assign(1 + rng.uniform_int(14), random_cell(rng));
        break;
      case 1:  // short oscillation
        for (int k = 0; k < 9; ++k) ps.push_back({4 + k % 2, 4});
        break;
      case 2:  // long walk
        ps = wander(rng, 35 + static_cast<int>(rng.uniform_int(20)), random_cell(rng));
        break;
      default:  // oscillation broken by a final move sideways
        for (int k = 0; k < 14; ++k) ps.push_back({4 + k % 2, 4});
        ps.push_back({5, 5});
        break;
    }
    out.push_back({"control", make_history(ps)});
  }
  return out;
}

}  // namespace pommer::testing

#endif  // POMMER_TESTS_JITTER_TRACES_HPP_
