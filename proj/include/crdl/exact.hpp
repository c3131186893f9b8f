#pragma once

#include <vector>

#include "crdl/factor.hpp"

namespace crdl {

// ── Exact inference ──────────────────────────────────────────────────────────
// Two independent routes: enumerate_query sums the factorized joint directly
// (the ground-truth oracle, guarded to small networks), ve_query runs
// variable elimination over the compiled factors.  They must agree to 1e-12
// wherever both run.

using EliminationOrder = std::vector<int>;

struct EnumerateOptions {
  size_t max_variables = 25;
};

namespace detail {

// Topological order of grounded variables (parents first).
inline std::vector<int> grounded_topo_order(const GroundedNetwork& g) {
  size_t n = g.vars.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> children(n);
  for (size_t v = 0; v < n; ++v)
    for (int p : g.cpts[v].parents) {
      ++indeg[v];
      children[static_cast<size_t>(p)].push_back(static_cast<int>(v));
    }
  std::vector<int> order, stack;
  for (size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) stack.push_back(static_cast<int>(v));
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int c : children[static_cast<size_t>(v)])
      if (--indeg[static_cast<size_t>(c)] == 0) stack.push_back(c);
  }
  if (order.size() != n) throw Error("grounded network is cyclic");
  return order;
}

}  // namespace detail

// Direct summation of Expression-(4) products over all assignments consistent
// with the evidence.  Walks variables in topological order and abandons
// zero-weight branches, which deterministic CPTs make very common.
inline double enumerate_query(const GroundedNetwork& g,
                              const EnumerateOptions& opt = {}) {
  size_t n = g.vars.size();
  if (g.live_count() > opt.max_variables)
    throw ResourceError("enumeration guard: " + std::to_string(g.live_count()) +
                        " variables exceed the limit of " +
                        std::to_string(opt.max_variables));
  if (g.target_var < 0) throw Error("network has no query target");

  std::vector<int> order;
  for (int v : detail::grounded_topo_order(g))
    if (g.is_live(v)) order.push_back(v);
  std::vector<int> vals(n, -1);
  double num = 0.0, den = 0.0;
  std::vector<int> parent_vals;

  auto rec = [&](size_t depth, double weight, auto&& self) -> void {
    if (depth == order.size()) {
      den += weight;
      if (vals[static_cast<size_t>(g.target_var)] == 1) num += weight;
      return;
    }
    int v = order[depth];
    const Cpt& c = g.cpts[static_cast<size_t>(v)];
    parent_vals.clear();
    for (int p : c.parents) parent_vals.push_back(vals[static_cast<size_t>(p)]);
    double pt = c.prob_true(parent_vals);
    auto it = g.evidence.find(v);
    for (int val = 0; val <= 1; ++val) {
      if (it != g.evidence.end() && it->second != val) continue;
      double w = weight * (val ? pt : 1.0 - pt);
      if (w == 0.0) continue;
      vals[static_cast<size_t>(v)] = val;
      // parent_vals is shared scratch; recompute on the way down.
      self(depth + 1, w, self);
      vals[static_cast<size_t>(v)] = -1;
    }
  };
  rec(0, 1.0, rec);

  if (den <= 0.0)
    throw UndefinedConditionalError("evidence has probability zero");
  return num / den;
}

// Variable elimination; equals enumerate_query to within 1e-12 wherever both
// run.  `options.order` pins an explicit elimination order, otherwise
// min-fill with lexicographic tie-break is used for reproducibility.
inline double ve_query(const GroundedNetwork& g, const VeOptions& options = {}) {
  if (g.target_var < 0) throw Error("network has no query target");
  auto it = g.evidence.find(g.target_var);
  if (it != g.evidence.end()) {
    // Conditioning on the target itself.
    return it->second == 1 ? 1.0 : 0.0;
  }
  FactorSet fs = compile_factors(g);
  fs.restrict_evidence(g.evidence);
  Factor out = fs.eliminate_all_but({g.target_var}, options);
  return out.values[1];
}

}  // namespace crdl
