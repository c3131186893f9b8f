#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crdl/aggregate.hpp"
#include "crdl/exact.hpp"
#include "crdl/lbp.hpp"
#include "crdl/shatter.hpp"

namespace crdl {

// ── Clustered propagation ────────────────────────────────────────────────────
// The shattered network is regrouped into one factor per concrete slice (each
// named individual plus the reserved generic individual b).  A slice factor
// multiplies every distribution of its slice except the pool parts of
// restrictions:
//
//   * pairs over named individuals and b stay inside the slice; fillers that
//     live in other slices become extraneous input variables whose priors are
//     set from incoming messages;
//   * the pool of N-M-1 interchangeable individuals collapses into a clamped
//     Binomial count variable per restriction (the closed-form power
//     messages), driven by the generic filler's current message.
//
// Outgoing messages are exact inferences inside the slice network.  Slices
// whose networks exceed the exact budget fall back to finer regions: the
// slice is processed with per-distribution sum-product instead, which
// degenerates toward the parameterized loopy scheme.

struct ClusterOptions {
  size_t slice_var_budget = 48;      // members + inputs per slice
  bool allow_finer_split = true;
  size_t max_factor_entries = size_t{1} << 22;
};

struct SliceFactor {
  int owner_class = -1;
  std::vector<int> member_vars;     // templates owned by the slice
  std::vector<int> input_vars;      // extraneous fillers, message-driven
  std::vector<int> restrictions;    // restriction templates at the owner
  std::map<int, int> evidence;      // template -> observed value
  bool fine_mode = false;
};

struct CompactFactorGraph {
  ShatteredNetwork sn;              // pruned shattered structure
  std::vector<SliceFactor> slices;  // named slices, then b's (when present)
  int b_slice = -1;
  std::vector<int> boundary_vars;   // filler templates consumed across slices
  std::map<int, int> home_slice;    // boundary var -> owning slice
  std::map<int, std::vector<int>> consumers;  // boundary var -> slice indices
};

// ── build_slice_factors ──────────────────────────────────────────────────────

inline CompactFactorGraph build_slice_factors(const ShatteredNetwork& sn,
                                              const ClusterOptions& opt = {}) {
  if (sn.has_inverse_roles)
    throw UnsupportedConstructError(
        "clustered propagation does not support inverse roles; use the "
        "grounded engines");
  CompactFactorGraph g;
  g.sn = sn;
  const ShatteredNetwork& s = g.sn;

  int slice_count = s.M() + (s.has_generic ? 1 : 0);
  for (int idx = 0; idx < slice_count; ++idx) {
    SliceFactor f;
    f.owner_class = idx < s.M() ? idx : s.b_class();
    g.slices.push_back(std::move(f));
  }
  if (s.has_generic) g.b_slice = slice_count - 1;

  auto slice_of_class = [&](int cls) {
    return cls < s.M() ? cls : (cls == s.b_class() ? g.b_slice : -1);
  };

  std::set<int> boundary;
  for (size_t v = 0; v < s.vars.size(); ++v) {
    if (!s.is_live(static_cast<int>(v))) continue;
    const ShatVar& sv = s.vars[v];
    int home = slice_of_class(sv.owner);
    if (home < 0) continue;  // pool templates are handled in closed form
    SliceFactor& f = g.slices[static_cast<size_t>(home)];
    if (sv.second == -1 || sv.second < s.M() || sv.second == s.b_class())
      f.member_vars.push_back(static_cast<int>(v));
    const TNode& node = s.tnet->node(sv.tnode);
    if (node.kind == TNodeKind::Restriction && sv.second == -1) {
      f.restrictions.push_back(static_cast<int>(v));
      // Named-part fillers in other slices are inputs of this slice.
      for (const auto& pr : s.cpts[v].pairs) {
        if (pr.pool || pr.filler_var < 0) continue;
        const ShatVar& fv = s.vars[static_cast<size_t>(pr.filler_var)];
        if (fv.owner == sv.owner) continue;
        if (fv.owner == s.x_class()) continue;  // pool part, closed form
        if (!s.is_live(pr.filler_var)) continue;
        f.input_vars.push_back(pr.filler_var);
        boundary.insert(pr.filler_var);
      }
    }
  }
  for (auto& f : g.slices) {
    std::sort(f.input_vars.begin(), f.input_vars.end());
    f.input_vars.erase(std::unique(f.input_vars.begin(), f.input_vars.end()),
                       f.input_vars.end());
    std::sort(f.member_vars.begin(), f.member_vars.end());
  }
  for (const auto& [tv, val] : s.evidence) {
    int home = slice_of_class(s.vars[static_cast<size_t>(tv)].owner);
    if (home >= 0) g.slices[static_cast<size_t>(home)].evidence[tv] = val;
  }
  for (int b : boundary) {
    g.boundary_vars.push_back(b);
    g.home_slice[b] = slice_of_class(s.vars[static_cast<size_t>(b)].owner);
    for (size_t i = 0; i < g.slices.size(); ++i) {
      const auto& iv = g.slices[i].input_vars;
      if (std::binary_search(iv.begin(), iv.end(), b))
        g.consumers[b].push_back(static_cast<int>(i));
    }
  }
  for (auto& f : g.slices) {
    size_t size = f.member_vars.size() + f.input_vars.size();
    if (size > opt.slice_var_budget) {
      if (!opt.allow_finer_split)
        throw ResourceError(
            "slice network too large for exact inference (" +
            std::to_string(size) + " variables); finer region split required");
      f.fine_mode = true;
    }
  }
  return g;
}

// ── Engine ───────────────────────────────────────────────────────────────────

namespace detail {

// Point-valued marginal probability of a role template chain (through any
// hierarchy), used for the pool pairs where no evidence can attach.
inline double role_chain_marginal(const TNetwork& tn, int role_node) {
  const TNode& n = tn.node(role_node);
  if (!n.role_has_hierarchy) return n.prior.lo;
  double super = role_chain_marginal(tn, n.parents[0]);
  return super * n.cond_if_true.lo + (1.0 - super) * n.cond_if_false.lo;
}

}  // namespace detail

class ClusterEngine {
 public:
  ClusterEngine(const CompactFactorGraph& graph, std::uint64_t N,
                Schedule sched = default_schedule(), ClusterOptions opt = {})
      : g_(graph), N_(N), sched_(sched), opt_(opt) {
    if (N_ < g_.sn.named.size())
      throw DomainTooSmallError("domain size below the named individuals");
    assert_point_valued();
    init_messages();
  }

  static Schedule default_schedule() {
    Schedule s;
    s.max_iterations = 100;
    s.tolerance = 1e-8;
    return s;
  }

  InferenceResult run() {
    double residual = 0.0;
    int iter = 0;
    for (iter = 1; iter <= sched_.max_iterations; ++iter) {
      residual = sweep();
      if (residual <= sched_.tolerance) break;
    }
    bool converged = residual <= sched_.tolerance;
    if (iter > sched_.max_iterations) iter = sched_.max_iterations;
    InferenceResult r =
        InferenceResult::point(belief(g_.sn.target_var), iter, converged);
    if (!converged)
      r.warnings.push_back("clustered propagation did not converge; residual " +
                           std::to_string(residual));
    for (const auto& w : warnings_) r.warnings.push_back(w);
    return r;
  }

  // Posterior belief of a concept template: home marginal times consumer
  // likelihoods.
  double belief(int var) const {
    auto hit = home_.find(var);
    double p = hit != home_.end() ? hit->second : home_marginal_fallback(var);
    double lam = consumer_likelihood(var, -1);
    double l1 = p * lam, l0 = (1.0 - p) * (1.0 - lam);
    double z = l0 + l1;
    return z > 0 ? l1 / z : p;
  }

  // Combined likelihood from every consumer slice except `exclude`.  The
  // pool's influence on named variables is handled inside the slices (the
  // count variables condition on the named fillers), so consumers fold in
  // once each.
  double consumer_likelihood(int var, int exclude) const {
    auto cons = g_.consumers.find(var);
    if (cons == g_.consumers.end()) return 0.5;
    double l1 = 1.0, l0 = 1.0;
    for (int s2 : cons->second) {
      if (s2 == exclude) continue;
      auto it = like_.find({s2, var});
      if (it == like_.end()) continue;
      l1 *= it->second;
      l0 *= 1.0 - it->second;
    }
    double z = l0 + l1;
    return z > 0 ? l1 / z : 0.5;
  }

  // Message a named variable sends toward a slice that does not consume it
  // directly (used when marginalizing a conditional count table).
  double var_message_to_slice(int var, int sidx) const {
    double p;
    auto hit = home_.find(var);
    if (hit != home_.end())
      p = hit->second;
    else
      p = home_marginal_fallback(var);
    double lam = consumer_likelihood(var, sidx);
    double l1 = p * lam, l0 = (1.0 - p) * (1.0 - lam);
    double z = l0 + l1;
    return z > 0 ? l1 / z : p;
  }

  // Belief of the generic (pool) grounding of a concept: the b-class template
  // with every named slice's likelihood folded in.
  double generic_belief(int concept_tnode) const {
    int var = g_.sn.var_of(concept_tnode, g_.sn.b_class());
    if (var < 0 || g_.b_slice < 0) return home_marginal_fallback(var);
    return belief(var);
  }

  // Largest per-aggregate saturation residual: how far the pool terms moved
  // between this engine's N and twice that N.  Used by limit queries.
  std::vector<double> aggregate_terms() const { return aggregate_terms_; }

  // For consistency tests: the compiled factors of a slice with the current
  // input priors, plus the local variable map.
  struct SliceSnapshot {
    std::vector<Factor> factors;
    std::map<int, int> local;  // template id -> local variable id
    std::map<int, double> home;
    // Factor index of each owned boundary variable's downstream likelihood;
    // home messages are computed with that factor swapped to uniform.
    std::map<int, size_t> boundary_like_factor;
  };
  SliceSnapshot slice_snapshot(int slice) {
    SliceSnapshot out;
    CompiledSlice cs = compile_slice(slice);
    out.factors = cs.fs.factors;
    out.local = cs.local;
    out.boundary_like_factor = cs.boundary_like_factor;
    for (int v : g_.slices[static_cast<size_t>(slice)].member_vars) {
      if (g_.sn.vars[static_cast<size_t>(v)].second != -1) continue;
      auto it = home_.find(v);
      if (it != home_.end()) out.home[v] = it->second;
    }
    return out;
  }

  int iterations_run() const { return iters_; }

 private:
  struct AggregateSlot {
    int restriction = -1;   // template id
    int state_local = -1;   // local id of the clamped count variable
    size_t prior_factor = 0;
    unsigned cap = 0;
    double rho = 0.0;
    int filler_tnode = -1;
    bool negated = false;
  };

  struct CompiledSlice {
    FactorSet fs;
    std::map<int, int> local;
    std::map<int, size_t> input_prior_factor;
    // Owned boundary variables carry the other slices' likelihoods as local
    // factors; the factor is swapped to uniform when that same variable is
    // the queried output.
    std::map<int, size_t> boundary_like_factor;
    std::vector<AggregateSlot> aggregates;
  };

  void assert_point_valued() {
    for (size_t v = 0; v < g_.sn.vars.size(); ++v) {
      if (!g_.sn.is_live(static_cast<int>(v))) continue;
      const ShatCpt& c = g_.sn.cpts[v];
      bool pt = true;
      if (c.kind == CptKind::Bernoulli) pt = c.p.is_point();
      if (c.kind == CptKind::TwoRow)
        pt = c.if_true.is_point() && c.if_false.is_point();
      if (!pt)
        throw UnsupportedConstructError(
            "interval-valued assessments require the credal engine");
    }
  }

  // Initialization: exact single-individual marginals, per the convergence
  // recipe of the propagation scheme.
  void init_messages() {
    std::map<int, double> n1;  // tnode -> single-individual marginal
    {
      // Single-individual grounding straight from the t-network.
      GroundedNetwork g1;
      const TNetwork& tn = *g_.sn.tnet;
      g1.tnet = g_.sn.tnet;
      g1.N = 1;
      g1.named = {"_0"};
      g1.node_slot.resize(tn.nodes.size());
      g1.node_is_role.resize(tn.nodes.size());
      for (size_t id = 0; id < tn.nodes.size(); ++id) {
        bool role = tn.nodes[id].kind == TNodeKind::Role;
        g1.node_is_role[id] = role;
        g1.node_slot[id] =
            static_cast<int>(role ? g1.role_like++ : g1.concept_like++);
      }
      g1.vars.resize(g1.concept_like + g1.role_like);
      g1.cpts.resize(g1.vars.size());
      for (size_t id = 0; id < tn.nodes.size(); ++id) {
        const TNode& nd = tn.nodes[id];
        int v = g1.var_of(static_cast<int>(id), 0, 0);
        g1.vars[static_cast<size_t>(v)] = {static_cast<int>(id), 0,
                                           nd.kind == TNodeKind::Role ? 0 : -1};
        if (nd.kind == TNodeKind::Role) {
          Cpt c;
          if (nd.role_has_hierarchy) {
            c.kind = CptKind::TwoRow;
            c.parents = {g1.var_of(nd.parents[0], 0, 0)};
            c.if_true = nd.cond_if_true;
            c.if_false = nd.cond_if_false;
          } else {
            c.kind = CptKind::Bernoulli;
            c.p = nd.prior;
          }
          g1.cpts[static_cast<size_t>(v)] = std::move(c);
        } else if (nd.kind == TNodeKind::Restriction) {
          g1.cpts[static_cast<size_t>(v)] =
              detail::make_restriction_cpt(tn, g1, static_cast<int>(id), 0);
        } else {
          g1.cpts[static_cast<size_t>(v)] =
              detail::make_concept_cpt(tn, g1, static_cast<int>(id), 0);
        }
      }
      FactorSet fs = compile_factors(g1);
      VeOptions vo;
      vo.max_factor_entries = opt_.max_factor_entries;
      for (size_t id = 0; id < tn.nodes.size(); ++id) {
        if (tn.nodes[id].kind == TNodeKind::Role) continue;
        FactorSet copy = fs;
        Factor out = copy.eliminate_all_but(
            {g1.var_of(static_cast<int>(id), 0, 0)}, vo);
        n1[static_cast<int>(id)] = out.values[1];
      }
    }

    for (int b : g_.boundary_vars) {
      int tnode = g_.sn.vars[static_cast<size_t>(b)].tnode;
      home_[b] = n1.count(tnode) ? n1[tnode] : 0.5;
      for (int sidx : g_.consumers.at(b)) {
        n_[{b, sidx}] = home_[b];
        like_[{sidx, b}] = 0.5;
      }
    }
    n1_marginals_ = std::move(n1);
  }

  // Generic-filler message feeding slice `sidx` aggregates: the b-class
  // template's product excluding the receiving slice (pool peers contribute
  // nothing: their slices carry no evidence).
  double generic_message(int filler_tnode, int sidx) const {
    int var = g_.sn.var_of(filler_tnode, g_.sn.b_class());
    double p;
    auto hit = home_.find(var);
    if (hit != home_.end())
      p = hit->second;
    else {
      auto it = n1_marginals_.find(filler_tnode);
      p = it != n1_marginals_.end() ? it->second : 0.5;
    }
    double lam = consumer_likelihood(var, sidx);
    double l1 = p * lam, l0 = (1.0 - p) * (1.0 - lam);
    double z = l0 + l1;
    return z > 0 ? l1 / z : p;
  }

  double home_marginal_fallback(int var) const {
    if (var < 0) return 0.5;
    auto it = n1_marginals_.find(g_.sn.vars[static_cast<size_t>(var)].tnode);
    return it != n1_marginals_.end() ? it->second : 0.5;
  }

  // Count distribution of a restriction's pool pairs.  When the generic
  // slice's conditional table is available, the count variable becomes a
  // child of the named filler variables present in this slice: rows are
  // clamped Binomials at the conditional success probability, mixing over any
  // dependency the slice does not carry.
  Factor pool_count_factor(CompiledSlice& cs, int sidx, int state, unsigned cap,
                           double rho, int filler_tnode, bool negated,
                           double fallback_gen, std::uint64_t pool) {
    std::vector<int> dep_templates, dep_local;
    std::vector<int> absent;  // indices into the table's dep list
    const CondTable* table = nullptr;
    if (filler_tnode >= 0) {
      auto it = generic_cond_.find(filler_tnode);
      if (it != generic_cond_.end()) table = &it->second;
    }
    if (table) {
      for (size_t i = 0; i < table->deps.size(); ++i) {
        auto lit = cs.local.find(table->deps[i]);
        if (lit != cs.local.end()) {
          dep_templates.push_back(table->deps[i]);
          dep_local.push_back(lit->second);
        } else {
          absent.push_back(static_cast<int>(i));
        }
      }
    }
    if (!table || dep_local.empty()) {
      double term = negated ? rho * (1.0 - fallback_gen) : rho * fallback_gen;
      std::vector<double> dist = binomial_clamped(pool, term, cap);
      for (double x : dist) aggregate_terms_scratch_.push_back(x);
      Factor pf = cs.fs.make({state});
      pf.values = dist;
      return pf;
    }
    // Weights of the dependencies this slice does not contain.
    std::vector<double> absent_w;
    for (int i : absent)
      absent_w.push_back(var_message_to_slice(table->deps[static_cast<size_t>(i)], sidx));

    std::vector<int> vars = dep_local;
    vars.push_back(state);
    Factor pf = cs.fs.make(vars);
    std::vector<int> vals(pf.vars.size(), 0);
    auto value_of = [&](int var) {
      for (size_t k = 0; k < pf.vars.size(); ++k)
        if (pf.vars[k] == var) return vals[k];
      return 0;
    };
    for (;;) {
      if (value_of(state) == 0) {
        // Compute the whole row once per parent configuration.
        std::vector<double> row(cap + 1, 0.0);
        size_t acount = absent.size();
        for (size_t am = 0; am < (size_t{1} << acount); ++am) {
          double w = 1.0;
          size_t mask = 0;
          for (size_t k = 0; k < dep_templates.size(); ++k) {
            size_t pos = 0;
            for (size_t i = 0; i < table->deps.size(); ++i)
              if (table->deps[i] == dep_templates[k]) pos = i;
            if (value_of(dep_local[k])) mask |= size_t{1} << pos;
          }
          for (size_t a = 0; a < acount; ++a) {
            bool bit = (am >> a) & 1;
            size_t pos = static_cast<size_t>(absent[a]);
            if (bit) mask |= size_t{1} << pos;
            w *= bit ? absent_w[a] : 1.0 - absent_w[a];
          }
          double d = table->values[mask];
          double term = negated ? rho * (1.0 - d) : rho * d;
          std::vector<double> dist = binomial_clamped(pool, term, cap);
          for (unsigned c = 0; c <= cap; ++c) row[c] += w * dist[c];
        }
        for (unsigned c = 0; c <= cap; ++c) {
          std::vector<int> rv = vals;
          for (size_t k = 0; k < pf.vars.size(); ++k)
            if (pf.vars[k] == state) rv[k] = static_cast<int>(c);
          pf.values[FactorSet::index_of(pf, rv)] = row[c];
          aggregate_terms_scratch_.push_back(row[c]);
        }
      }
      size_t d = pf.vars.size();
      bool done = true;
      while (d-- > 0) {
        if (++vals[d] < pf.cards[d]) { done = false; break; }
        vals[d] = 0;
      }
      if (done) break;
    }
    return pf;
  }

  CompiledSlice compile_slice(int sidx) {
    const SliceFactor& f = g_.slices[static_cast<size_t>(sidx)];
    const ShatteredNetwork& sn = g_.sn;
    CompiledSlice cs;
    for (int v : f.member_vars) cs.local[v] = cs.fs.add_variable(2);
    for (int u : f.input_vars)
      if (!cs.local.count(u)) cs.local[u] = cs.fs.add_variable(2);

    // Input priors first, so their factor indices are known for the swap.
    for (int u : f.input_vars) {
      Factor pf = cs.fs.make({cs.local[u]});
      double p = n_.at({u, sidx});
      pf.values = {1.0 - p, p};
      cs.input_prior_factor[u] = cs.fs.factors.size();
      cs.fs.add(std::move(pf));
    }
    // Downstream likelihoods on this slice's own boundary variables.
    for (int w : f.member_vars) {
      auto cons = g_.consumers.find(w);
      if (cons == g_.consumers.end()) continue;
      double lam = consumer_likelihood(w, -1);
      Factor pf = cs.fs.make({cs.local[w]});
      pf.values = {1.0 - lam, lam};
      cs.boundary_like_factor[w] = cs.fs.factors.size();
      cs.fs.add(std::move(pf));
    }

    std::uint64_t pool = N_ > sn.named.size() + 1
                             ? N_ - sn.named.size() - 1
                             : 0;
    aggregate_terms_scratch_.clear();

    for (int v : f.member_vars) {
      const ShatCpt& c = sn.cpts[static_cast<size_t>(v)];
      const ShatVar& sv = sn.vars[static_cast<size_t>(v)];
      const TNode& node = sn.tnet->node(sv.tnode);
      int child = cs.local[v];
      switch (c.kind) {
        case CptKind::Bernoulli: {
          Factor pf = cs.fs.make({child});
          pf.values = {1.0 - c.p.lo, c.p.lo};
          cs.fs.add(std::move(pf));
          break;
        }
        case CptKind::Const: {
          Factor pf = cs.fs.make({child});
          pf.values[static_cast<size_t>(c.const_value ? 1 : 0)] = 1.0;
          cs.fs.add(std::move(pf));
          break;
        }
        case CptKind::TwoRow: {
          int parent = cs.local.at(c.parents[0]);
          Factor pf = cs.fs.make({child, parent});
          std::vector<int> vals(2);
          auto set = [&](int pv, int cv, double x) {
            for (size_t k = 0; k < pf.vars.size(); ++k)
              vals[k] = pf.vars[k] == parent ? pv : cv;
            pf.values[FactorSet::index_of(pf, vals)] = x;
          };
          set(1, 1, c.if_true.lo);
          set(1, 0, 1.0 - c.if_true.lo);
          set(0, 1, c.if_false.lo);
          set(0, 0, 1.0 - c.if_false.lo);
          cs.fs.add(std::move(pf));
          break;
        }
        case CptKind::BoolFunc: {
          std::vector<int> vars;
          for (int p : c.parents) vars.push_back(cs.local.at(p));
          vars.push_back(child);
          Factor pf = cs.fs.make(vars);
          std::vector<int> vals(pf.vars.size(), 0);
          std::vector<int> parent_vals(c.parents.size());
          for (;;) {
            for (size_t k = 0; k < c.parents.size(); ++k)
              for (size_t q = 0; q < pf.vars.size(); ++q)
                if (pf.vars[q] == cs.local.at(c.parents[k]))
                  parent_vals[k] = vals[q];
            int child_val = 0;
            for (size_t q = 0; q < pf.vars.size(); ++q)
              if (pf.vars[q] == child) child_val = vals[q];
            pf.values[FactorSet::index_of(pf, vals)] =
                (child_val == (c.def->eval(parent_vals) ? 1 : 0)) ? 1.0 : 0.0;
            size_t d = pf.vars.size();
            bool done = true;
            while (d-- > 0) {
              if (++vals[d] < pf.cards[d]) { done = false; break; }
              vals[d] = 0;
            }
            if (done) break;
          }
          cs.fs.add(std::move(pf));
          break;
        }
        case CptKind::Count: {
          unsigned cap = c.count_hi == kCountInf ? c.count_lo : c.count_hi + 1;
          auto in_range = [&](unsigned s) {
            return s >= c.count_lo &&
                   (c.count_hi == kCountInf || s <= c.count_hi);
          };
          // Pool part: clamped Binomial input with the generic filler message.
          double rho = detail::role_chain_marginal(*sn.tnet, node.role_node);
          double gen = 0.0;
          if (node.filler_node >= 0)
            gen = generic_message(node.filler_node, sidx);
          else
            gen = node.filler_const == FillerConst::Top ? 1.0 : 0.0;
          int state = cs.fs.add_variable(static_cast<int>(cap) + 1);
          {
            AggregateSlot slot;
            slot.restriction = v;
            slot.state_local = state;
            slot.prior_factor = cs.fs.factors.size();
            slot.cap = cap;
            slot.rho = rho;
            slot.filler_tnode = node.filler_node;
            slot.negated = c.count_negated_filler;
            cs.aggregates.push_back(slot);
            cs.fs.add(pool_count_factor(cs, sidx, state, cap, rho,
                                        node.filler_node,
                                        c.count_negated_filler, gen, pool));
          }
          // Chain the named-plus-b pairs onto the pool count.
          for (const auto& pr : c.pairs) {
            if (pr.pool) continue;
            if (!sn.is_live(pr.role_var)) continue;
            int role_local = cs.local.at(pr.role_var);
            int filler_local = -1;
            if (pr.filler_var >= 0) {
              auto it = cs.local.find(pr.filler_var);
              if (it == cs.local.end())
                throw Error("slice is missing filler " +
                            sn.var_name(pr.filler_var));
              filler_local = it->second;
            }
            int next = cs.fs.add_variable(static_cast<int>(cap) + 1);
            std::vector<int> vars = {state, role_local};
            if (filler_local >= 0) vars.push_back(filler_local);
            vars.push_back(next);
            Factor pf = cs.fs.make(vars);
            std::vector<int> vals(pf.vars.size(), 0);
            auto value_of = [&](int var) {
              for (size_t k = 0; k < pf.vars.size(); ++k)
                if (pf.vars[k] == var) return vals[k];
              return 0;
            };
            for (;;) {
              unsigned s = static_cast<unsigned>(value_of(state));
              int role = value_of(role_local);
              int fil = filler_local >= 0 ? value_of(filler_local)
                                          : pr.filler_const;
              if (c.count_negated_filler) fil = 1 - fil;
              unsigned ns = std::min(cap, s + ((role && fil) ? 1u : 0u));
              pf.values[FactorSet::index_of(pf, vals)] =
                  static_cast<unsigned>(value_of(next)) == ns ? 1.0 : 0.0;
              size_t d = pf.vars.size();
              bool done = true;
              while (d-- > 0) {
                if (++vals[d] < pf.cards[d]) { done = false; break; }
                vals[d] = 0;
              }
              if (done) break;
            }
            cs.fs.add(std::move(pf));
            state = next;
          }
          // Child indicator over the final count state.
          {
            Factor pf = cs.fs.make({state, child});
            std::vector<int> vals(2);
            for (unsigned s = 0; s <= cap; ++s)
              for (int cv = 0; cv <= 1; ++cv) {
                for (size_t k = 0; k < pf.vars.size(); ++k)
                  vals[k] = pf.vars[k] == child ? cv : static_cast<int>(s);
                pf.values[FactorSet::index_of(pf, vals)] =
                    (cv == (in_range(s) ? 1 : 0)) ? 1.0 : 0.0;
              }
            cs.fs.add(std::move(pf));
          }
          break;
        }
      }
    }
    // Slice evidence.
    std::map<int, int> local_evidence;
    for (const auto& [tv, val] : f.evidence) {
      auto it = cs.local.find(tv);
      if (it != cs.local.end()) local_evidence[it->second] = val;
    }
    cs.fs.restrict_evidence(local_evidence);
    return cs;
  }

  // One synchronous sweep; returns the max message change.
  double sweep() {
    const ShatteredNetwork& sn = g_.sn;
    std::map<int, double> new_home = home_;
    std::map<std::pair<int, int>, double> new_like = like_;
    std::map<int, CondTable> new_generic_cond;
    aggregate_terms_.clear();

    for (size_t sidx = 0; sidx < g_.slices.size(); ++sidx) {
      const SliceFactor& f = g_.slices[sidx];
      if (f.fine_mode) {
        sweep_fine_slice(static_cast<int>(sidx), new_home, new_like);
        continue;
      }
      CompiledSlice cs = compile_slice(static_cast<int>(sidx));
      for (double x : aggregate_terms_scratch_) aggregate_terms_.push_back(x);
      VeOptions vo;
      vo.max_factor_entries = opt_.max_factor_entries;

      // The generic slice publishes its fillers as functions of the named
      // inputs they depend on; the other slices' count variables condition on
      // those same variables.
      if (static_cast<int>(sidx) == g_.b_slice) {
        std::set<int> fillers;
        for (const auto& s2 : g_.slices)
          for (int r : s2.restrictions) {
            int fn = sn.tnet->node(sn.vars[static_cast<size_t>(r)].tnode)
                         .filler_node;
            if (fn >= 0) fillers.insert(fn);
          }
        std::set<int> inputs(f.input_vars.begin(), f.input_vars.end());
        for (int fn : fillers) {
          int fv = sn.var_of(fn, sn.b_class());
          auto lit = cs.local.find(fv);
          if (lit == cs.local.end()) continue;
          // Named inputs among the filler's ancestors within this slice.
          std::set<int> deps;
          std::vector<int> stack{fv};
          std::set<int> seen;
          while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            if (!seen.insert(cur).second) continue;
            if (inputs.count(cur) &&
                sn.vars[static_cast<size_t>(cur)].owner < sn.M()) {
              deps.insert(cur);
              continue;
            }
            if (cs.local.count(cur))
              for (int p : sn.cpts[static_cast<size_t>(cur)].parents)
                if (cs.local.count(p)) stack.push_back(p);
          }
          if (deps.empty() || deps.size() > 6) continue;
          CondTable table;
          table.deps.assign(deps.begin(), deps.end());
          table.values.assign(size_t{1} << table.deps.size(), 0.5);
          for (size_t mask = 0; mask < table.values.size(); ++mask) {
            // The table is a conditional of the deps: their own priors are
            // swapped out before clamping, they belong to the senders.
            FactorSet copy = cs.fs;
            auto bit = cs.boundary_like_factor.find(fv);
            if (bit != cs.boundary_like_factor.end())
              copy.factors[bit->second].values = {0.5, 0.5};
            std::map<int, int> clamp;
            for (size_t k = 0; k < table.deps.size(); ++k) {
              copy.factors[cs.input_prior_factor.at(table.deps[k])].values = {
                  0.5, 0.5};
              clamp[cs.local.at(table.deps[k])] =
                  static_cast<int>((mask >> k) & 1);
            }
            copy.restrict_evidence(clamp);
            try {
              Factor out = copy.eliminate_all_but({lit->second}, vo);
              table.values[mask] = out.values[1];
            } catch (const UndefinedConditionalError&) {
              // Structurally impossible configuration: its parents give it
              // zero weight anyway.
            }
          }
          new_generic_cond[fn] = std::move(table);
        }
      }

      // Home marginals for concept templates this slice owns.  A boundary
      // variable's own downstream likelihood is swapped out: it belongs to
      // the variable's belief, not to the home-side message.
      for (int v : f.member_vars) {
        if (sn.vars[static_cast<size_t>(v)].second != -1) continue;
        const TNode& node = sn.tnet->node(sn.vars[static_cast<size_t>(v)].tnode);
        bool wanted = g_.home_slice.count(v) || v == sn.target_var ||
                      node.kind == TNodeKind::Concept;
        if (!wanted) continue;
        FactorSet copy = cs.fs;
        auto bit = cs.boundary_like_factor.find(v);
        if (bit != cs.boundary_like_factor.end())
          copy.factors[bit->second].values = {0.5, 0.5};
        Factor out = copy.eliminate_all_but({cs.local.at(v)}, vo);
        new_home[v] = out.values[1];
      }
      // Likelihood messages back to the inputs: swap the input's prior to
      // uniform and read its marginal.
      for (int u : f.input_vars) {
        FactorSet copy = cs.fs;
        Factor& pf = copy.factors[cs.input_prior_factor.at(u)];
        pf.values = {0.5, 0.5};
        Factor out = copy.eliminate_all_but({cs.local.at(u)}, vo);
        new_like[{static_cast<int>(sidx), u}] = out.values[1];
      }
    }

    double residual = 0.0;
    for (const auto& [k, v] : new_home) {
      auto it = home_.find(k);
      if (it != home_.end()) residual = std::max(residual, std::abs(v - it->second));
      else residual = std::max(residual, 1.0);
    }
    for (const auto& [k, v] : new_like)
      residual = std::max(residual, std::abs(v - like_[k]));
    for (const auto& [k, v] : new_generic_cond) {
      auto it = generic_cond_.find(k);
      if (it == generic_cond_.end() || it->second.values.size() != v.values.size()) {
        residual = std::max(residual, 1.0);
        continue;
      }
      for (size_t i = 0; i < v.values.size(); ++i)
        residual = std::max(residual,
                            std::abs(v.values[i] - it->second.values[i]));
    }
    home_ = std::move(new_home);
    like_ = std::move(new_like);
    generic_cond_ = std::move(new_generic_cond);

    // Refresh variable-to-slice messages.
    for (int b : g_.boundary_vars) {
      double p = home_.count(b) ? home_[b] : home_marginal_fallback(b);
      for (int sidx : g_.consumers.at(b)) {
        double lam = consumer_likelihood(b, sidx);
        double l1 = p * lam, l0 = (1.0 - p) * (1.0 - lam);
        double z = l0 + l1;
        double nv = z > 0 ? l1 / z : p;
        residual = std::max(residual, std::abs(nv - n_[{b, sidx}]));
        n_[{b, sidx}] = nv;
      }
    }
    ++iters_;
    return residual;
  }

  // Finer-split fallback: the slice runs per-distribution sum-product (the
  // parameterized-LBP regions) instead of one exact region.
  void sweep_fine_slice(int sidx, std::map<int, double>& new_home,
                        std::map<std::pair<int, int>, double>& new_like) {
    const SliceFactor& f = g_.slices[static_cast<size_t>(sidx)];
    const ShatteredNetwork& sn = g_.sn;
    lbp::LGraph lg;
    std::map<int, int> vm;
    auto add_named_var = [&](int tv, const std::string& name) {
      auto it = vm.find(tv);
      if (it != vm.end()) return it->second;
      int id = static_cast<int>(lg.var_mult.size());
      lg.var_mult.push_back(1);
      lg.var_clamped.push_back(0);
      lg.var_clamp_val.push_back(0);
      lg.var_edges.emplace_back();
      lg.var_names.push_back(name);
      vm[tv] = id;
      return id;
    };
    auto add_var = [&](int tv) { return add_named_var(tv, sn.var_name(tv)); };
    for (int v : f.member_vars) add_var(v);
    for (int u : f.input_vars) add_var(u);
    for (const auto& [tv, val] : f.evidence) {
      if (!vm.count(tv)) continue;
      lg.var_clamped[static_cast<size_t>(vm[tv])] = 1;
      lg.var_clamp_val[static_cast<size_t>(vm[tv])] = val;
    }
    std::uint64_t pool =
        N_ > sn.named.size() + 1 ? N_ - sn.named.size() - 1 : 0;
    std::map<int, int> input_prior_factor;

    for (int u : f.input_vars) {
      lbp::LFactor pf;
      pf.kind = CptKind::Bernoulli;
      pf.p = Interval::point(n_.at({u, sidx}));
      pf.name = "prior:" + sn.var_name(u);
      int fid = static_cast<int>(lg.factors.size());
      lg.factors.push_back(std::move(pf));
      lg.factors.back().child_edge = lg.add_edge(vm[u], fid);
      input_prior_factor[u] = fid;
    }
    std::map<int, int> boundary_like_factor;
    for (int w : f.member_vars) {
      if (!g_.consumers.count(w)) continue;
      lbp::LFactor pf;
      pf.kind = CptKind::Bernoulli;
      pf.p = Interval::point(consumer_likelihood(w, -1));
      pf.name = "like:" + sn.var_name(w);
      int fid = static_cast<int>(lg.factors.size());
      lg.factors.push_back(std::move(pf));
      lg.factors.back().child_edge = lg.add_edge(vm[w], fid);
      boundary_like_factor[w] = fid;
    }
    for (int v : f.member_vars) {
      const ShatCpt& c = sn.cpts[static_cast<size_t>(v)];
      const ShatVar& sv = sn.vars[static_cast<size_t>(v)];
      lbp::LFactor lf;
      lf.kind = c.kind;
      lf.p = c.p;
      lf.if_true = c.if_true;
      lf.if_false = c.if_false;
      lf.def = c.def;
      lf.const_value = c.const_value;
      lf.count_negated_filler = c.count_negated_filler;
      lf.count_lo = c.count_lo;
      lf.count_hi = c.count_hi;
      lf.name = sn.var_name(v);
      int fid = static_cast<int>(lg.factors.size());
      lg.factors.push_back(std::move(lf));
      lbp::LFactor& out = lg.factors.back();
      out.child_edge = lg.add_edge(vm.at(v), fid);
      if (c.kind == CptKind::TwoRow || c.kind == CptKind::BoolFunc) {
        for (int p : c.parents) out.parent_edges.push_back(lg.add_edge(vm.at(p), fid));
      } else if (c.kind == CptKind::Count) {
        const TNode& node = sn.tnet->node(sv.tnode);
        for (const auto& pr : c.pairs) {
          if (pr.pool) continue;
          if (!sn.is_live(pr.role_var)) continue;
          lbp::PairRef ref;
          ref.count = 1;
          ref.role_edge = lg.add_edge(vm.at(pr.role_var), fid);
          if (pr.filler_var >= 0)
            ref.filler_edge = lg.add_edge(vm.at(pr.filler_var), fid);
          else
            ref.filler_const = pr.filler_const;
          out.pairs.push_back(ref);
        }
        // Pool part: a pseudo-pair with the closed-form generic inputs.
        if (pool > 0) {
          double rho = detail::role_chain_marginal(*sn.tnet, node.role_node);
          double gen = node.filler_node >= 0
                           ? generic_message(node.filler_node, sidx)
                           : (node.filler_const == FillerConst::Top ? 1.0 : 0.0);
          int rv = add_named_var(-1000 - v, "pool-role:" + sn.var_name(v));
          int gvv = add_named_var(-2000 - v, "pool-filler:" + sn.var_name(v));
          // Fixed priors for the pool inputs.
          {
            lbp::LFactor rpf;
            rpf.kind = CptKind::Bernoulli;
            rpf.p = Interval::point(rho);
            rpf.name = "pool-role-prior:" + sn.var_name(v);
            int rfid = static_cast<int>(lg.factors.size());
            lg.factors.push_back(std::move(rpf));
            lg.factors.back().child_edge = lg.add_edge(rv, rfid);
          }
          {
            lbp::LFactor gpf;
            gpf.kind = CptKind::Bernoulli;
            gpf.p = Interval::point(gen);
            gpf.name = "pool-filler-prior:" + sn.var_name(v);
            int gfid = static_cast<int>(lg.factors.size());
            lg.factors.push_back(std::move(gpf));
            lg.factors.back().child_edge = lg.add_edge(gvv, gfid);
          }
          lbp::PairRef ref;
          ref.count = pool;
          ref.role_edge = lg.add_edge(rv, fid);
          ref.filler_edge = lg.add_edge(gvv, fid);
          out.pairs.push_back(ref);
        }
      }
    }
    lbp::Engine engine(std::move(lg), sched_);
    InferenceResult res = engine.run();
    if (!res.converged)
      warnings_.push_back("fine-split slice did not converge");
    auto message_toward = [&](int tv, int fid) {
      const lbp::LGraph& gr = engine.graph();
      for (int e : gr.var_edges[static_cast<size_t>(vm.at(tv))])
        if (gr.edges[static_cast<size_t>(e)].factor == fid)
          return gr.edges[static_cast<size_t>(e)].n;
      return 0.5;
    };
    for (int v : f.member_vars) {
      if (sn.vars[static_cast<size_t>(v)].second != -1) continue;
      auto bit = boundary_like_factor.find(v);
      // A boundary variable's home message excludes its own downstream
      // likelihood: that is exactly its message toward the likelihood factor.
      new_home[v] = bit != boundary_like_factor.end()
                        ? message_toward(v, bit->second)
                        : engine.belief(vm.at(v));
    }
    for (int u : f.input_vars) {
      // The likelihood toward the input is its message back to the prior.
      new_like[{sidx, u}] = message_toward(u, input_prior_factor.at(u));
    }
  }

  // The generic slice's filler marginal as a function of the named filler
  // variables it depends on: values[mask] = P(F(b)=1 | deps = mask bits).
  struct CondTable {
    std::vector<int> deps;  // template ids, ascending
    std::vector<double> values;
  };

  CompactFactorGraph g_;
  std::uint64_t N_;
  Schedule sched_;
  ClusterOptions opt_;

  std::map<int, double> home_;
  std::map<std::pair<int, int>, double> like_;
  std::map<std::pair<int, int>, double> n_;
  std::map<int, double> n1_marginals_;
  std::map<int, CondTable> generic_cond_;  // filler tnode -> table
  std::vector<double> aggregate_terms_;
  std::vector<double> aggregate_terms_scratch_;
  std::vector<std::string> warnings_;
  int iters_ = 0;
};

// ── Public operations ────────────────────────────────────────────────────────

inline InferenceResult cluster_query(const CompactFactorGraph& g,
                                     Schedule sched = ClusterEngine::default_schedule(),
                                     const ClusterOptions& opt = {}) {
  if (g.sn.domain.kind != DomainSpec::Kind::Exact)
    throw Error("cluster_query requires an exact domain size");
  ClusterEngine engine(g, g.sn.N, sched, opt);
  return engine.run();
}

inline InferenceResult cluster_query_at(const CompactFactorGraph& g,
                                        std::uint64_t n,
                                        Schedule sched = ClusterEngine::default_schedule(),
                                        const ClusterOptions& opt = {}) {
  ClusterEngine engine(g, n, sched, opt);
  return engine.run();
}

// Runs the propagation at doubling N until the pool power terms and the
// target marginal both saturate; the stabilized value approximates the
// countably-infinite domain.
inline InferenceResult limit_query(const CompactFactorGraph& g,
                                   Schedule sched = ClusterEngine::default_schedule(),
                                   const ClusterOptions& opt = {}) {
  const std::uint64_t overflow_guard = std::uint64_t{1} << 62;
  std::uint64_t n = g.sn.named.size() + 1;
  ClusterEngine first(g, n, sched, opt);
  InferenceResult prev = first.run();
  std::vector<double> prev_terms = first.aggregate_terms();
  for (;;) {
    std::uint64_t next = n * 2;
    if (next > overflow_guard) {
      InferenceResult r = prev;
      r.converged = false;
      r.warnings.push_back("no saturation before the domain-size guard");
      return r;
    }
    ClusterEngine engine(g, next, sched, opt);
    InferenceResult cur = engine.run();
    std::vector<double> terms = engine.aggregate_terms();
    double term_delta = prev_terms.size() == terms.size() ? 0.0 : 1.0;
    if (prev_terms.size() == terms.size())
      for (size_t i = 0; i < terms.size(); ++i)
        term_delta = std::max(term_delta, std::abs(terms[i] - prev_terms[i]));
    double marg_delta = std::abs(cur.probability - prev.probability);
    if (term_delta < 1e-15 && marg_delta <= 1e-9) {
      cur.saturation_n = n;
      cur.iterations = std::max(cur.iterations, prev.iterations);
      return cur;
    }
    prev = cur;
    prev_terms = std::move(terms);
    n = next;
  }
}

// Tightest interval covering P(concept(z) | evidence) across the named
// individuals and the generic individual, from one converged run.  When the
// whole grounded network fits the exact budget the per-individual marginals
// are refined with a single maximal region (exact inference); the slice-level
// beliefs serve as the fallback for domains beyond that budget.
inline Interval domain_profile(const CompactFactorGraph& g,
                               const std::string& concept_name,
                               Schedule sched = ClusterEngine::default_schedule(),
                               const ClusterOptions& opt = {}) {
  if (g.sn.domain.kind != DomainSpec::Kind::Exact)
    throw Error("domain_profile requires an exact domain size");
  int tnode = g.sn.tnet->concept_node(concept_name);
  if (tnode < 0) throw ValidationError("unknown concept " + concept_name);
  ClusterEngine engine(g, g.sn.N, sched, opt);
  InferenceResult res = engine.run();
  if (!res.converged)
    throw Error("clustered propagation did not converge for the profile");

  std::vector<std::uint64_t> individuals;
  for (int m = 0; m < g.sn.M(); ++m)
    individuals.push_back(static_cast<std::uint64_t>(m));
  bool generic = g.b_slice >= 0;
  if (generic) individuals.push_back(g.sn.named.size());  // a pool member

  std::vector<double> values;
  bool exact_ok = true;
  try {
    GroundedNetwork base = expand(g.sn);
    for (std::uint64_t z : individuals) {
      GroundedNetwork gz = base;
      gz.target_var = gz.var_of(tnode, z);
      gz.live.clear();
      VeOptions vo;
      vo.max_factor_entries = opt.max_factor_entries;
      values.push_back(ve_query(prune(gz), vo));
    }
  } catch (const ResourceError&) {
    exact_ok = false;
  }
  if (!exact_ok) {
    values.clear();
    for (int m = 0; m < g.sn.M(); ++m)
      values.push_back(engine.belief(g.sn.var_of(tnode, m)));
    if (generic) values.push_back(engine.generic_belief(tnode));
  }
  double lo = 1.0, hi = 0.0;
  for (double p : values) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return {lo, hi};
}

}  // namespace crdl
