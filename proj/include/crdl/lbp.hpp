#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crdl/aggregate.hpp"
#include "crdl/shatter.hpp"

namespace crdl {

// ── Loopy belief propagation ─────────────────────────────────────────────────
// One sum-product core serves both engines.  The grounded engine instantiates
// every variable and factor; the lifted engine instantiates one class per
// slice template and annotates edges with instance counts, so identical
// grounded messages collapse into powers.  Under a synchronous schedule and
// uniform initialization the two fixed-point trajectories coincide iteration
// by iteration.
//
// Messages are binary and normalized; we store P(state = 1).  Every computed
// message is clamped into [eps, 1-eps] so deterministic zeros cannot wedge a
// product at exactly zero.

namespace lbp {

struct PairRef {
  int role_edge = -1;
  int filler_edge = -1;
  int filler_const = -1;
  std::uint64_t count = 1;
};

struct LFactor {
  CptKind kind = CptKind::Const;
  std::uint64_t mult = 1;
  int child_edge = -1;
  std::vector<int> parent_edges;  // TwoRow / BoolFunc, in CPT parent order

  Interval p, if_true, if_false;
  const DefExpr* def = nullptr;
  bool const_value = false;

  std::vector<PairRef> pairs;
  bool count_negated_filler = false;
  unsigned count_lo = 0;
  unsigned count_hi = kCountInf;

  std::string name;  // child variable name, for diagnostics
};

struct LEdge {
  int var = -1;
  int factor = -1;
  std::uint64_t var_side_count = 1;  // factor instances seen by one var instance
  double m = 0.5;                    // factor -> var
  double n = 0.5;                    // var -> factor
  double m_new = 0.5, n_new = 0.5;
};

struct LGraph {
  std::vector<std::uint64_t> var_mult;
  std::vector<char> var_clamped;
  std::vector<int> var_clamp_val;
  std::vector<std::vector<int>> var_edges;
  std::vector<std::string> var_names;
  std::vector<LFactor> factors;
  std::vector<LEdge> edges;
  int target_var = -1;

  int add_edge(int var, int factor) {
    for (int e : var_edges[static_cast<size_t>(var)])
      if (edges[static_cast<size_t>(e)].factor == factor) return e;
    LEdge e;
    e.var = var;
    e.factor = factor;
    edges.push_back(e);
    int id = static_cast<int>(edges.size()) - 1;
    var_edges[static_cast<size_t>(var)].push_back(id);
    return id;
  }
};

inline double clamp_message(double p1) {
  if (!(p1 > kMessageEpsilon)) return kMessageEpsilon;
  if (p1 > 1.0 - kMessageEpsilon) return 1.0 - kMessageEpsilon;
  return p1;
}

inline double normalize_pair(double u0, double u1) {
  double z = u0 + u1;
  if (!(z > 0.0) || !std::isfinite(z)) return 0.5;
  return clamp_message(u1 / z);
}

class Engine {
 public:
  Engine(LGraph graph, Schedule schedule)
      : g_(std::move(graph)), sched_(schedule) {
    // Clamped variables broadcast their indicator from the start.
    for (size_t v = 0; v < g_.var_mult.size(); ++v)
      if (g_.var_clamped[v])
        for (int e : g_.var_edges[v])
          g_.edges[static_cast<size_t>(e)].n =
              clamp_message(g_.var_clamp_val[v] == 1 ? 1.0 : 0.0);
  }

  using Observer = std::function<void(int iteration, const Engine&)>;

  InferenceResult run(const Observer& observer = {}) {
    int iter = 0;
    double residual = 0.0;
    for (iter = 1; iter <= sched_.max_iterations; ++iter) {
      residual = sched_.mode == Schedule::Mode::Synchronous
                     ? sweep_synchronous()
                     : sweep_sequential();
      if (observer) observer(iter, *this);
      if (residual <= sched_.tolerance) break;
    }
    bool converged = residual <= sched_.tolerance;
    if (iter > sched_.max_iterations) iter = sched_.max_iterations;
    // Subgraph runs (slice regions) have no query target of their own.
    double marginal = g_.target_var >= 0
                          ? belief(g_.target_var)
                          : std::numeric_limits<double>::quiet_NaN();
    InferenceResult r = InferenceResult::point(marginal, iter, converged);
    if (!converged)
      r.warnings.push_back("loopy propagation did not converge; residual " +
                           std::to_string(residual));
    return r;
  }

  double belief(int var) const {
    size_t v = static_cast<size_t>(var);
    if (g_.var_clamped[v]) return g_.var_clamp_val[v] == 1 ? 1.0 : 0.0;
    double l1 = 0.0, l0 = 0.0;
    for (int e : g_.var_edges[v]) {
      const LEdge& ed = g_.edges[static_cast<size_t>(e)];
      l1 += static_cast<double>(ed.var_side_count) * std::log(ed.m);
      l0 += static_cast<double>(ed.var_side_count) * std::log1p(-ed.m);
    }
    double mx = std::max(l0, l1);
    double u1 = std::exp(l1 - mx), u0 = std::exp(l0 - mx);
    return u1 / (u0 + u1);
  }

  // Message snapshot keyed by "<factor-name>|<var-name>"; values are the
  // factor->var and var->factor messages.
  std::map<std::string, std::pair<double, double>> snapshot() const {
    std::map<std::string, std::pair<double, double>> out;
    for (const LEdge& e : g_.edges) {
      const std::string key = g_.factors[static_cast<size_t>(e.factor)].name +
                              "|" + g_.var_names[static_cast<size_t>(e.var)];
      out[key] = {e.m, e.n};
    }
    return out;
  }

  const LGraph& graph() const { return g_; }

 private:
  double sweep_synchronous() {
    for (size_t f = 0; f < g_.factors.size(); ++f) update_factor(static_cast<int>(f));
    double residual = 0.0;
    for (LEdge& e : g_.edges) {
      double next = damp(e.m, e.m_new);
      residual = std::max(residual, std::abs(next - e.m));
      e.m = next;
    }
    for (size_t v = 0; v < g_.var_mult.size(); ++v) update_var(static_cast<int>(v));
    for (LEdge& e : g_.edges) {
      double next = damp(e.n, e.n_new);
      residual = std::max(residual, std::abs(next - e.n));
      e.n = next;
    }
    return residual;
  }

  double sweep_sequential() {
    double residual = 0.0;
    for (size_t f = 0; f < g_.factors.size(); ++f) {
      update_factor(static_cast<int>(f));
      for (int e : factor_edges(static_cast<int>(f))) {
        LEdge& ed = g_.edges[static_cast<size_t>(e)];
        double next = damp(ed.m, ed.m_new);
        residual = std::max(residual, std::abs(next - ed.m));
        ed.m = next;
      }
      for (int e : factor_edges(static_cast<int>(f))) {
        int v = g_.edges[static_cast<size_t>(e)].var;
        update_var(v);
        for (int e2 : g_.var_edges[static_cast<size_t>(v)]) {
          LEdge& ed = g_.edges[static_cast<size_t>(e2)];
          double next = damp(ed.n, ed.n_new);
          residual = std::max(residual, std::abs(next - ed.n));
          ed.n = next;
        }
      }
    }
    return residual;
  }

  double damp(double old_val, double new_val) const {
    return sched_.damping * old_val + (1.0 - sched_.damping) * new_val;
  }

  std::vector<int> factor_edges(int f) const {
    std::vector<int> out;
    const LFactor& lf = g_.factors[static_cast<size_t>(f)];
    if (lf.child_edge >= 0) out.push_back(lf.child_edge);
    for (int e : lf.parent_edges) out.push_back(e);
    for (const auto& pr : lf.pairs) {
      out.push_back(pr.role_edge);
      if (pr.filler_edge >= 0) out.push_back(pr.filler_edge);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // var -> factor messages.
  void update_var(int var) {
    size_t v = static_cast<size_t>(var);
    if (g_.var_clamped[v]) {
      for (int e : g_.var_edges[v])
        g_.edges[static_cast<size_t>(e)].n_new =
            clamp_message(g_.var_clamp_val[v] == 1 ? 1.0 : 0.0);
      return;
    }
    double l1 = 0.0, l0 = 0.0;
    for (int e : g_.var_edges[v]) {
      const LEdge& ed = g_.edges[static_cast<size_t>(e)];
      l1 += static_cast<double>(ed.var_side_count) * std::log(ed.m);
      l0 += static_cast<double>(ed.var_side_count) * std::log1p(-ed.m);
    }
    for (int e : g_.var_edges[v]) {
      LEdge& ed = g_.edges[static_cast<size_t>(e)];
      // Exclude one instance of this edge's factor.
      double e1 = l1 - std::log(ed.m);
      double e0 = l0 - std::log1p(-ed.m);
      double mx = std::max(e0, e1);
      ed.n_new = normalize_pair(std::exp(e0 - mx), std::exp(e1 - mx));
    }
  }

  void update_factor(int fi) {
    LFactor& f = g_.factors[static_cast<size_t>(fi)];
    switch (f.kind) {
      case CptKind::Bernoulli: {
        edge(f.child_edge).m_new = clamp_message(f.p.lo);
        break;
      }
      case CptKind::Const: {
        edge(f.child_edge).m_new = clamp_message(f.const_value ? 1.0 : 0.0);
        break;
      }
      case CptKind::TwoRow: {
        double np = edge(f.parent_edges[0]).n;
        double nc = edge(f.child_edge).n;
        edge(f.child_edge).m_new =
            normalize_pair(np * (1.0 - f.if_true.lo) +
                               (1.0 - np) * (1.0 - f.if_false.lo),
                           np * f.if_true.lo + (1.0 - np) * f.if_false.lo);
        edge(f.parent_edges[0]).m_new = normalize_pair(
            nc * f.if_false.lo + (1.0 - nc) * (1.0 - f.if_false.lo),
            nc * f.if_true.lo + (1.0 - nc) * (1.0 - f.if_true.lo));
        break;
      }
      case CptKind::BoolFunc:
        update_boolfunc(f);
        break;
      case CptKind::Count:
        update_count(f);
        break;
    }
  }

  void update_boolfunc(LFactor& f) {
    size_t p = f.parent_edges.size();
    double nc = edge(f.child_edge).n;
    std::vector<double> to_child = {0.0, 0.0};
    std::vector<double> to_parent(2 * p, 0.0);
    std::vector<int> assign(p, 0);
    for (;;) {
      double w = 1.0;
      for (size_t i = 0; i < p; ++i) {
        double ni = edge(f.parent_edges[i]).n;
        w *= assign[i] ? ni : 1.0 - ni;
      }
      bool truth = f.def->eval(assign);
      to_child[truth ? 1 : 0] += w;
      double wc = truth ? nc : 1.0 - nc;
      for (size_t i = 0; i < p; ++i) {
        double ni = edge(f.parent_edges[i]).n;
        double wo = w / (assign[i] ? ni : 1.0 - ni) * wc;
        to_parent[2 * i + static_cast<size_t>(assign[i])] += wo;
      }
      size_t d = p;
      bool done = true;
      while (d-- > 0) {
        if (++assign[d] < 2) { done = false; break; }
        assign[d] = 0;
      }
      if (done) break;
    }
    edge(f.child_edge).m_new = normalize_pair(to_child[0], to_child[1]);
    for (size_t i = 0; i < p; ++i)
      edge(f.parent_edges[i]).m_new =
          normalize_pair(to_parent[2 * i], to_parent[2 * i + 1]);
  }

  // Counted restriction: pair terms are independent Bernoullis given incoming
  // messages, so the count distribution is a clamped convolution with pool
  // pairs entering as Binomial blocks.
  void update_count(LFactor& f) {
    unsigned cap = f.count_hi == kCountInf ? f.count_lo : f.count_hi + 1;
    auto in_range = [&](unsigned s) {
      return s >= f.count_lo && (f.count_hi == kCountInf || s <= f.count_hi);
    };
    auto term_prob = [&](const PairRef& pr) {
      double role = edge(pr.role_edge).n;
      double fill = pr.filler_edge >= 0 ? edge(pr.filler_edge).n
                                        : (pr.filler_const ? 1.0 : 0.0);
      if (f.count_negated_filler) fill = 1.0 - fill;
      return role * fill;
    };
    auto convolve = [&](std::vector<double> dist, double q, std::uint64_t c) {
      if (c == 0) return dist;
      if (c == 1) {
        std::vector<double> next(cap + 1, 0.0);
        for (unsigned s = 0; s <= cap; ++s) {
          if (dist[s] == 0.0) continue;
          next[s] += dist[s] * (1.0 - q);
          next[std::min(cap, s + 1)] += dist[s] * q;
        }
        return next;
      }
      std::vector<double> block = binomial_clamped(c, q, cap);
      std::vector<double> next(cap + 1, 0.0);
      for (unsigned s = 0; s <= cap; ++s) {
        if (dist[s] == 0.0) continue;
        for (unsigned t = 0; t <= cap; ++t)
          next[std::min(cap, s + t)] += dist[s] * block[t];
      }
      return next;
    };

    if (cap == 0) {  // count range [0, inf): constant-true child
      edge(f.child_edge).m_new = clamp_message(1.0);
      for (const auto& pr : f.pairs) {
        edge(pr.role_edge).m_new = 0.5;
        if (pr.filler_edge >= 0) edge(pr.filler_edge).m_new = 0.5;
      }
      return;
    }

    // Full count distribution for the message to the child.
    std::vector<double> full(cap + 1, 0.0);
    full[0] = 1.0;
    for (const auto& pr : f.pairs) full = convolve(full, term_prob(pr), pr.count);
    double p_in = 0.0;
    for (unsigned s = 0; s <= cap; ++s)
      if (in_range(s)) p_in += full[s];
    edge(f.child_edge).m_new = normalize_pair(1.0 - p_in, p_in);

    // Messages to pair members: rebuild the distribution without one instance
    // of the member's pair, then condition on the member's value.
    double nc = edge(f.child_edge).n;
    auto member_message = [&](size_t skip_idx, bool role_side) {
      const PairRef& target = f.pairs[skip_idx];
      std::vector<double> rest(cap + 1, 0.0);
      rest[0] = 1.0;
      for (size_t i = 0; i < f.pairs.size(); ++i) {
        const PairRef& pr = f.pairs[i];
        std::uint64_t c = pr.count - (i == skip_idx ? 1 : 0);
        rest = convolve(rest, term_prob(pr), c);
      }
      // Partner message within the skipped pair: the filler when computing the
      // role member's message, the role when computing the filler's.
      double partner = role_side
                           ? (target.filler_edge >= 0
                                  ? edge(target.filler_edge).n
                                  : (target.filler_const ? 1.0 : 0.0))
                           : edge(target.role_edge).n;
      if (role_side && f.count_negated_filler) partner = 1.0 - partner;
      double out[2];
      for (int val = 0; val <= 1; ++val) {
        // term = role and (filler xor negation)
        double pterm;
        if (role_side) {
          pterm = val ? partner : 0.0;
        } else {
          int eff = f.count_negated_filler ? 1 - val : val;
          pterm = eff ? partner : 0.0;
        }
        double u = 0.0;
        for (unsigned s = 0; s <= cap; ++s) {
          if (rest[s] == 0.0) continue;
          double with1 = pterm, with0 = 1.0 - pterm;
          unsigned s1 = std::min(cap, s + 1);
          double pin = (in_range(s) ? with0 : 0.0) + (in_range(s1) ? with1 : 0.0);
          double pout = (in_range(s) ? 0.0 : with0) + (in_range(s1) ? 0.0 : with1);
          u += rest[s] * (nc * pin + (1.0 - nc) * pout);
        }
        out[val] = u;
      }
      return normalize_pair(out[0], out[1]);
    };

    // Each distinct edge receives one message; when several pair slots share
    // an edge (pool self/cross templates) their messages coincide, so the
    // first slot's value stands for all of them.
    std::map<int, double> edge_msg;
    for (size_t i = 0; i < f.pairs.size(); ++i) {
      const PairRef& pr = f.pairs[i];
      if (pr.count == 0) continue;
      if (!edge_msg.count(pr.role_edge))
        edge_msg[pr.role_edge] = member_message(i, true);
      if (pr.filler_edge >= 0 && !edge_msg.count(pr.filler_edge))
        edge_msg[pr.filler_edge] = member_message(i, false);
    }
    for (const auto& [e, msg] : edge_msg) edge(e).m_new = msg;
  }

  LEdge& edge(int e) { return g_.edges[static_cast<size_t>(e)]; }
  const LEdge& edge(int e) const { return g_.edges[static_cast<size_t>(e)]; }

  LGraph g_;
  Schedule sched_;
};

}  // namespace lbp

// ── Builders ─────────────────────────────────────────────────────────────────

namespace detail {

inline lbp::LGraph build_grounded_graph(const GroundedNetwork& g) {
  lbp::LGraph lg;
  size_t n = g.vars.size();
  std::vector<int> var_map(n, -1);
  for (size_t v = 0; v < n; ++v) {
    if (!g.is_live(static_cast<int>(v))) continue;
    var_map[v] = static_cast<int>(lg.var_mult.size());
    lg.var_mult.push_back(1);
    lg.var_clamped.push_back(0);
    lg.var_clamp_val.push_back(0);
    lg.var_edges.emplace_back();
    lg.var_names.push_back(g.var_name(static_cast<int>(v)));
  }
  for (const auto& [v, val] : g.evidence) {
    if (var_map[static_cast<size_t>(v)] < 0) continue;
    lg.var_clamped[static_cast<size_t>(var_map[static_cast<size_t>(v)])] = 1;
    lg.var_clamp_val[static_cast<size_t>(var_map[static_cast<size_t>(v)])] = val;
  }
  for (size_t v = 0; v < n; ++v) {
    if (var_map[v] < 0) continue;
    const Cpt& c = g.cpts[v];
    lbp::LFactor f;
    f.kind = c.kind;
    f.p = c.p;
    f.if_true = c.if_true;
    f.if_false = c.if_false;
    f.def = c.def;
    f.const_value = c.const_value;
    f.count_negated_filler = c.count_negated_filler;
    f.count_lo = c.count_lo;
    f.count_hi = c.count_hi;
    f.name = g.var_name(static_cast<int>(v));
    int fid = static_cast<int>(lg.factors.size());
    lg.factors.push_back(std::move(f));
    lbp::LFactor& lf = lg.factors.back();
    lf.child_edge = lg.add_edge(var_map[v], fid);
    if (c.kind == CptKind::TwoRow || c.kind == CptKind::BoolFunc) {
      for (int p : c.parents)
        lf.parent_edges.push_back(
            lg.add_edge(var_map[static_cast<size_t>(p)], fid));
    } else if (c.kind == CptKind::Count) {
      for (const auto& pr : c.pairs) {
        lbp::PairRef ref;
        ref.count = 1;
        ref.role_edge =
            lg.add_edge(var_map[static_cast<size_t>(pr.role_var)], fid);
        if (pr.filler_var >= 0)
          ref.filler_edge =
              lg.add_edge(var_map[static_cast<size_t>(pr.filler_var)], fid);
        else
          ref.filler_const = pr.filler_const;
        lf.pairs.push_back(ref);
      }
    }
  }
  lg.target_var = var_map[static_cast<size_t>(g.target_var)];
  if (lg.target_var < 0) throw Error("query target was pruned away");
  return lg;
}

// Lifted graph over slice templates.  Edge multiplicities follow from double
// counting: var_side = mult(factor) * pairs_per_factor / mult(var).
inline lbp::LGraph build_lifted_graph(const ShatteredNetwork& sn,
                                      std::uint64_t N) {
  lbp::LGraph lg;
  size_t n = sn.vars.size();
  std::vector<int> var_map(n, -1);
  for (size_t v = 0; v < n; ++v) {
    if (!sn.is_live(static_cast<int>(v))) continue;
    std::uint64_t mult = sn.multiplicity(static_cast<int>(v), N);
    if (mult == 0) continue;
    var_map[v] = static_cast<int>(lg.var_mult.size());
    lg.var_mult.push_back(mult);
    lg.var_clamped.push_back(0);
    lg.var_clamp_val.push_back(0);
    lg.var_edges.emplace_back();
    lg.var_names.push_back(sn.var_name(static_cast<int>(v)));
  }
  for (const auto& [v, val] : sn.evidence) {
    if (var_map[static_cast<size_t>(v)] < 0) continue;
    lg.var_clamped[static_cast<size_t>(var_map[static_cast<size_t>(v)])] = 1;
    lg.var_clamp_val[static_cast<size_t>(var_map[static_cast<size_t>(v)])] = val;
  }
  std::uint64_t pool = sn.pool(N);
  std::vector<std::vector<std::uint64_t>> edge_pair_count;  // per factor edge

  for (size_t v = 0; v < n; ++v) {
    if (var_map[v] < 0) continue;
    const ShatCpt& c = sn.cpts[v];
    lbp::LFactor f;
    f.kind = c.kind;
    f.mult = sn.multiplicity(static_cast<int>(v), N);
    f.p = c.p;
    f.if_true = c.if_true;
    f.if_false = c.if_false;
    f.def = c.def;
    f.const_value = c.const_value;
    f.count_negated_filler = c.count_negated_filler;
    f.count_lo = c.count_lo;
    f.count_hi = c.count_hi;
    f.name = sn.var_name(static_cast<int>(v));
    int fid = static_cast<int>(lg.factors.size());
    lg.factors.push_back(std::move(f));
    lbp::LFactor& lf = lg.factors.back();
    std::map<int, std::uint64_t> touch;  // edge -> adjacency count per instance
    lf.child_edge = lg.add_edge(var_map[v], fid);
    touch[lf.child_edge] += 1;
    if (c.kind == CptKind::TwoRow || c.kind == CptKind::BoolFunc) {
      for (int p : c.parents) {
        int e = lg.add_edge(var_map[static_cast<size_t>(p)], fid);
        lf.parent_edges.push_back(e);
        touch[e] += 1;
      }
    } else if (c.kind == CptKind::Count) {
      const ShatVar& owner_var = sn.vars[v];
      for (const auto& pr : c.pairs) {
        lbp::PairRef ref;
        // Evaluate the symbolic count at this N.
        std::uint64_t count = pr.count;
        if (pr.pool) {
          count = pool;
          if (owner_var.owner == sn.x_class() && count > 0) count -= 1;
        } else if (count > 1) {
          count = 1;
        }
        if (count == 0) continue;
        ref.count = count;
        ref.role_edge = lg.add_edge(var_map[static_cast<size_t>(pr.role_var)], fid);
        touch[ref.role_edge] += count;
        if (pr.filler_var >= 0) {
          ref.filler_edge =
              lg.add_edge(var_map[static_cast<size_t>(pr.filler_var)], fid);
          touch[ref.filler_edge] += count;
        } else {
          ref.filler_const = pr.filler_const;
        }
        lf.pairs.push_back(ref);
      }
    }
    // Var-side counts by double counting.
    for (const auto& [e, cnt] : touch) {
      lbp::LEdge& ed = lg.edges[static_cast<size_t>(e)];
      std::uint64_t vm = lg.var_mult[static_cast<size_t>(ed.var)];
      ed.var_side_count = lf.mult * cnt / vm;
    }
  }
  lg.target_var = var_map[static_cast<size_t>(sn.target_var)];
  if (lg.target_var < 0) throw Error("query target was pruned away");
  return lg;
}

}  // namespace detail

// ── Public engines ───────────────────────────────────────────────────────────

using LbpObserver = lbp::Engine::Observer;

inline InferenceResult grounded_lbp(const GroundedNetwork& g,
                                    const Schedule& sched = {},
                                    const LbpObserver& observer = {}) {
  lbp::Engine engine(detail::build_grounded_graph(g), sched);
  return engine.run(observer);
}

inline InferenceResult plbp(const ShatteredNetwork& sn,
                            const Schedule& sched = {},
                            const LbpObserver& observer = {}) {
  if (sn.has_inverse_roles)
    throw UnsupportedConstructError(
        "parameterized propagation does not support inverse roles; use the "
        "grounded engines");
  if (sn.domain.kind != DomainSpec::Kind::Exact)
    throw Error("plbp requires an exact domain size");
  lbp::Engine engine(detail::build_lifted_graph(sn, sn.N), sched);
  return engine.run(observer);
}

}  // namespace crdl
