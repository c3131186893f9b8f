#pragma once

#include <functional>
#include <vector>

#include "crdl/grounding.hpp"

namespace crdl {

namespace detail {

// Bayes-ball reachability.  Returns the "requisite probability" marks: nodes
// whose CPTs the query P(target | observed) actually depends on.  Nodes the
// ball only ever passes downward through are barren and summed out.
inline std::vector<char> bayes_ball(
    size_t n, const std::function<const std::vector<int>&(int)>& parents,
    const std::vector<std::vector<int>>& children,
    const std::vector<char>& observed, int target) {
  std::vector<char> visited_up(n, 0), visited_down(n, 0), top(n, 0);
  std::vector<std::pair<int, bool>> stack;  // (node, from_child)
  stack.push_back({target, true});
  while (!stack.empty()) {
    auto [v, from_child] = stack.back();
    stack.pop_back();
    size_t vi = static_cast<size_t>(v);
    if (from_child) {
      if (observed[vi]) continue;  // blocked
      if (visited_up[vi]) continue;
      visited_up[vi] = 1;
      top[vi] = 1;
      for (int p : parents(v)) stack.push_back({p, true});
      for (int c : children[vi]) stack.push_back({c, false});
    } else {
      if (observed[vi]) {
        // v-structure activation: bounce back to the parents.
        if (top[vi]) continue;
        top[vi] = 1;
        for (int p : parents(v)) stack.push_back({p, true});
      } else {
        if (visited_down[vi]) continue;
        visited_down[vi] = 1;
        for (int c : children[vi]) stack.push_back({c, false});
      }
    }
  }
  top[static_cast<size_t>(target)] = 1;
  return top;
}

}  // namespace detail

// d-separation pruning: returns the same network restricted to variables that
// the query depends on.  Query results on pruned and unpruned networks are
// identical.
inline GroundedNetwork prune(const GroundedNetwork& g) {
  if (g.target_var < 0) throw Error("network has no query target");
  size_t n = g.vars.size();
  std::vector<std::vector<int>> children(n);
  for (size_t v = 0; v < n; ++v) {
    if (!g.is_live(static_cast<int>(v))) continue;
    for (int p : g.cpts[v].parents)
      children[static_cast<size_t>(p)].push_back(static_cast<int>(v));
  }
  std::vector<char> observed(n, 0);
  for (const auto& [v, val] : g.evidence) observed[static_cast<size_t>(v)] = 1;

  auto parents = [&](int v) -> const std::vector<int>& {
    return g.cpts[static_cast<size_t>(v)].parents;
  };
  std::vector<char> keep =
      detail::bayes_ball(n, parents, children, observed, g.target_var);

  GroundedNetwork out = g;
  out.live = keep;
  if (!g.live.empty())
    for (size_t v = 0; v < n; ++v) out.live[v] = out.live[v] && g.live[v];
  // Evidence on pruned-away variables factors out of numerator and
  // denominator alike.
  for (auto it = out.evidence.begin(); it != out.evidence.end();) {
    if (!out.live[static_cast<size_t>(it->first)])
      it = out.evidence.erase(it);
    else
      ++it;
  }
  return out;
}

}  // namespace crdl
