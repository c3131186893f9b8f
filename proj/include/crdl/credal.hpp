#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crdl/cluster.hpp"

namespace crdl {

// ── Interval-valued propagation ──────────────────────────────────────────────
// When uniqueness fails (interval assessments, bare inclusions, unconstrained
// domain sizes) every message becomes an interval.  The propagation mirrors
// the clustered scheme; each slice inference is bounded by enumerating the
// endpoint combinations of its local credal parameters and incoming interval
// messages (marginals are multilinear in those quantities, so the extrema sit
// at endpoints).  Pool power terms are bounded over the domain-size range at
// its ends: the closed forms are monotone in N for a fixed base.

struct IntervalMessage {
  Interval value;
};

struct CredalSpec {
  // Interval-valued local parameters of the t-network, the optimization
  // vertices of the credal sets.
  struct Slot {
    int tnode = -1;
    int which = 0;  // 0: prior, 1: conditional-if-true, 2: conditional-if-false
  };
  std::vector<Slot> slots;

  static CredalSpec from(const TNetwork& tn) {
    CredalSpec spec;
    for (size_t id = 0; id < tn.nodes.size(); ++id) {
      const TNode& n = tn.nodes[id];
      if (n.kind == TNodeKind::Restriction) continue;  // deterministic
      if (!n.prior.is_point() &&
          (n.kind == TNodeKind::Role ? !n.role_has_hierarchy
                                     : n.model == ConceptModel::Prior ||
                                           n.model == ConceptModel::Unspecified))
        spec.slots.push_back({static_cast<int>(id), 0});
      bool pair = (n.kind == TNodeKind::Role && n.role_has_hierarchy) ||
                  (n.kind == TNodeKind::Concept && n.model == ConceptModel::CondPair);
      if (pair) {
        if (!n.cond_if_true.is_point())
          spec.slots.push_back({static_cast<int>(id), 1});
        if (!n.cond_if_false.is_point())
          spec.slots.push_back({static_cast<int>(id), 2});
      }
    }
    return spec;
  }

  bool degenerate() const { return slots.empty(); }
};

namespace detail {

// Interval marginal of a role chain (through hierarchies), by corner
// enumeration over its interval rows.
inline Interval interval_role_chain(const TNetwork& tn, int role_node) {
  const TNode& n = tn.node(role_node);
  if (!n.role_has_hierarchy) return n.prior;
  Interval super = interval_role_chain(tn, n.parents[0]);
  double lo = 1.0, hi = 0.0;
  for (double s : {super.lo, super.hi})
    for (double t : {n.cond_if_true.lo, n.cond_if_true.hi})
      for (double f : {n.cond_if_false.lo, n.cond_if_false.hi}) {
        double v = s * t + (1.0 - s) * f;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  return {lo, hi};
}

// 2U-style normalized product of interval messages.
inline Interval interval_product(const std::vector<Interval>& msgs) {
  double llo1 = 0.0, llo0 = 0.0, lhi1 = 0.0, lhi0 = 0.0;
  for (const Interval& m : msgs) {
    auto cl = [](double x) {
      return std::min(std::max(x, kMessageEpsilon), 1.0 - kMessageEpsilon);
    };
    llo1 += std::log(cl(m.lo));
    llo0 += std::log1p(-cl(m.lo));
    lhi1 += std::log(cl(m.hi));
    lhi0 += std::log1p(-cl(m.hi));
  }
  auto norm = [](double l1, double l0) {
    double mx = std::max(l1, l0);
    double u1 = std::exp(l1 - mx), u0 = std::exp(l0 - mx);
    return u1 / (u0 + u1);
  };
  return {norm(llo1, llo0), norm(lhi1, lhi0)};
}

}  // namespace detail

// ── Engine ───────────────────────────────────────────────────────────────────

class CredalEngine {
 public:
  CredalEngine(const CompactFactorGraph& graph, std::uint64_t n_lo,
               std::uint64_t n_hi, Schedule sched, ClusterOptions opt = {})
      : g_(graph), n_lo_(n_lo), n_hi_(n_hi), sched_(sched), opt_(opt) {
    if (n_hi_ < n_lo_) throw Error("empty domain-size range");
    init_messages();
  }

  InferenceResult run() {
    double residual = 0.0;
    int iter = 0;
    Interval widest{1.0, 0.0};
    for (iter = 1; iter <= sched_.max_iterations; ++iter) {
      residual = sweep();
      Interval t = belief(g_.sn.target_var);
      if (widest.lo > widest.hi) {
        widest = t;
      } else {
        widest.lo = std::min(widest.lo, t.lo);
        widest.hi = std::max(widest.hi, t.hi);
      }
      if (residual <= sched_.tolerance) break;
    }
    bool converged = residual <= sched_.tolerance;
    if (iter > sched_.max_iterations) iter = sched_.max_iterations;
    InferenceResult r = InferenceResult::bounds(
        converged ? belief(g_.sn.target_var) : widest, iter, converged);
    if (!converged)
      r.warnings.push_back("interval propagation did not converge; residual " +
                           std::to_string(residual));
    return r;
  }

  Interval belief(int var) const {
    std::vector<Interval> msgs;
    msgs.push_back(home_value(var));
    auto cons = g_.consumers.find(var);
    if (cons != g_.consumers.end())
      for (int s2 : cons->second) {
        auto it = like_.find({s2, var});
        if (it != like_.end()) msgs.push_back(it->second);
      }
    return detail::interval_product(msgs);
  }

 private:
  static constexpr size_t kMaxSlots = 12;

  struct ComboSlot {
    enum Kind { CptPrior, CptIfTrue, CptIfFalse, Input, OwnedLike, AggGeneric, AggPool, AggRho } kind;
    int var = -1;       // template id (Cpt*/Input) or restriction template (Agg*)
    Interval range;
  };

  void init_messages() {
    // Single-individual interval marginals seed the boundary messages.
    const TNetwork& tn = *g_.sn.tnet;
    CredalSpec spec = CredalSpec::from(tn);
    size_t bits = std::min(spec.slots.size(), kMaxSlots);
    if (spec.slots.size() > kMaxSlots)
      throw ResourceError("too many interval parameters for vertex enumeration");
    std::map<int, Interval> n1;
    for (size_t combo = 0; combo < (size_t{1} << bits); ++combo) {
      TNetwork tn_pt = tn;  // point-instantiated copy
      for (size_t k = 0; k < bits; ++k) {
        TNode& nd = tn_pt.nodes[static_cast<size_t>(spec.slots[k].tnode)];
        bool hi = (combo >> k) & 1;
        Interval* tgt = spec.slots[k].which == 0
                            ? &nd.prior
                            : (spec.slots[k].which == 1 ? &nd.cond_if_true
                                                        : &nd.cond_if_false);
        *tgt = Interval::point(hi ? tgt->hi : tgt->lo);
      }
      std::map<int, double> marg = single_individual_marginals(tn_pt);
      for (const auto& [tnode, p] : marg) {
        auto it = n1.find(tnode);
        if (it == n1.end())
          n1[tnode] = Interval::point(p);
        else {
          it->second.lo = std::min(it->second.lo, p);
          it->second.hi = std::max(it->second.hi, p);
        }
      }
    }
    for (int b : g_.boundary_vars) {
      int tnode = g_.sn.vars[static_cast<size_t>(b)].tnode;
      Interval seed = n1.count(tnode) ? n1[tnode] : Interval{0.5, 0.5};
      home_[b] = seed;
      for (int sidx : g_.consumers.at(b)) {
        n_[{b, sidx}] = seed;
        like_[{sidx, b}] = {0.5, 0.5};
      }
    }
    n1_ = std::move(n1);
  }

  std::map<int, double> single_individual_marginals(const TNetwork& tn) {
    GroundedNetwork g1;
    g1.tnet = std::shared_ptr<const TNetwork>(&tn, [](const TNetwork*) {});
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
    std::map<int, double> out;
    for (size_t id = 0; id < tn.nodes.size(); ++id) {
      if (tn.nodes[id].kind == TNodeKind::Role) continue;
      FactorSet copy = fs;
      Factor f = copy.eliminate_all_but({g1.var_of(static_cast<int>(id), 0, 0)}, vo);
      out[static_cast<int>(id)] = f.values[1];
    }
    return out;
  }

  // Combined consumer likelihood interval of an owned boundary variable.
  Interval owned_like(int w) const {
    auto cons = g_.consumers.find(w);
    if (cons == g_.consumers.end()) return {0.5, 0.5};
    std::vector<Interval> msgs;
    for (int s2 : cons->second) {
      auto it = like_.find({s2, w});
      if (it != like_.end()) msgs.push_back(it->second);
    }
    if (msgs.empty()) return {0.5, 0.5};
    return detail::interval_product(msgs);
  }

  Interval home_value(int var) const {
    auto it = home_.find(var);
    if (it != home_.end()) return it->second;
    int tnode = g_.sn.vars[static_cast<size_t>(var)].tnode;
    auto n1 = n1_.find(tnode);
    return n1 != n1_.end() ? n1->second : Interval{0.5, 0.5};
  }

  Interval generic_message(int filler_tnode, int sidx) const {
    int var = g_.sn.var_of(filler_tnode, g_.sn.b_class());
    std::vector<Interval> msgs;
    if (var >= 0) {
      msgs.push_back(home_value(var));
      auto cons = g_.consumers.find(var);
      if (cons != g_.consumers.end())
        for (int s2 : cons->second) {
          if (s2 == sidx) continue;
          auto it = like_.find({s2, var});
          if (it != like_.end()) msgs.push_back(it->second);
        }
    } else {
      auto n1 = n1_.find(filler_tnode);
      msgs.push_back(n1 != n1_.end() ? n1->second : Interval{0.5, 0.5});
    }
    return detail::interval_product(msgs);
  }

  // Enumerates the endpoint combinations of a slice and returns, per queried
  // local variable, the marginal interval.  `uniform_prior_for` replaces that
  // input's prior with uniform (for likelihood extraction).
  std::map<int, Interval> slice_bounds(int sidx,
                                       const std::vector<int>& queries,
                                       int uniform_prior_for) {
    const SliceFactor& f = g_.slices[static_cast<size_t>(sidx)];
    const ShatteredNetwork& sn = g_.sn;

    // Collect the optimization slots.
    std::vector<ComboSlot> slots;
    auto add_slot = [&](ComboSlot s) {
      if (slots.size() >= kMaxSlots)
        throw ResourceError("too many interval parameters in one slice");
      slots.push_back(std::move(s));
    };
    for (int v : f.member_vars) {
      const ShatCpt& c = sn.cpts[static_cast<size_t>(v)];
      if (c.kind == CptKind::Bernoulli && !c.p.is_point())
        add_slot({ComboSlot::CptPrior, v, c.p});
      if (c.kind == CptKind::TwoRow) {
        if (!c.if_true.is_point()) add_slot({ComboSlot::CptIfTrue, v, c.if_true});
        if (!c.if_false.is_point())
          add_slot({ComboSlot::CptIfFalse, v, c.if_false});
      }
    }
    for (int u : f.input_vars) {
      Interval msg = u == uniform_prior_for ? Interval{0.5, 0.5} : n_.at({u, sidx});
      if (!msg.is_point()) add_slot({ComboSlot::Input, u, msg});
    }
    for (int w : f.member_vars) {
      if (w == uniform_prior_for) continue;
      Interval lam = owned_like(w);
      if (!lam.is_point()) add_slot({ComboSlot::OwnedLike, w, lam});
    }
    std::uint64_t pool_lo =
        n_lo_ > sn.named.size() + 1 ? n_lo_ - sn.named.size() - 1 : 0;
    std::uint64_t pool_hi =
        n_hi_ > sn.named.size() + 1 ? n_hi_ - sn.named.size() - 1 : 0;
    struct AggInfo {
      int restriction;
      Interval gen;
      Interval rho;
      unsigned cap;
      bool negated;
      int gen_slot = -1, pool_slot = -1, rho_slot = -1;
    };
    std::vector<AggInfo> aggs;
    for (int r : f.restrictions) {
      const ShatCpt& c = sn.cpts[static_cast<size_t>(r)];
      const TNode& node = sn.tnet->node(sn.vars[static_cast<size_t>(r)].tnode);
      AggInfo info;
      info.restriction = r;
      info.cap = c.count_hi == kCountInf ? c.count_lo : c.count_hi + 1;
      info.negated = c.count_negated_filler;
      info.rho = detail::interval_role_chain(*sn.tnet, node.role_node);
      info.gen = node.filler_node >= 0
                     ? generic_message(node.filler_node, sidx)
                     : Interval::point(node.filler_const == FillerConst::Top
                                           ? 1.0
                                           : 0.0);
      if (!info.gen.is_point()) {
        info.gen_slot = static_cast<int>(slots.size());
        add_slot({ComboSlot::AggGeneric, r, info.gen});
      }
      if (pool_hi != pool_lo) {
        info.pool_slot = static_cast<int>(slots.size());
        add_slot({ComboSlot::AggPool, r,
                  Interval{static_cast<double>(pool_lo),
                           static_cast<double>(pool_hi)}});
      }
      if (!info.rho.is_point()) {
        info.rho_slot = static_cast<int>(slots.size());
        add_slot({ComboSlot::AggRho, r, info.rho});
      }
      aggs.push_back(info);
    }

    std::map<int, Interval> out;
    size_t bits = slots.size();
    for (size_t combo = 0; combo < (size_t{1} << bits); ++combo) {
      auto chosen = [&](int slot) {
        const Interval& r = slots[static_cast<size_t>(slot)].range;
        return ((combo >> slot) & 1) ? r.hi : r.lo;
      };
      // Per-combo point values.
      std::map<int, double> input_override;
      for (size_t k = 0; k < bits; ++k) {
        if (slots[k].kind == ComboSlot::Input)
          input_override[slots[k].var] = chosen(static_cast<int>(k));
        if (slots[k].kind == ComboSlot::OwnedLike)
          input_override[~slots[k].var] = chosen(static_cast<int>(k));
      }
      std::map<int, std::array<double, 3>> cpt_override;
      for (size_t k = 0; k < bits; ++k) {
        if (slots[k].kind == ComboSlot::CptPrior)
          cpt_override[slots[k].var][0] = chosen(static_cast<int>(k));
        if (slots[k].kind == ComboSlot::CptIfTrue)
          cpt_override[slots[k].var][1] = chosen(static_cast<int>(k));
        if (slots[k].kind == ComboSlot::CptIfFalse)
          cpt_override[slots[k].var][2] = chosen(static_cast<int>(k));
      }
      std::map<int, std::pair<double, std::uint64_t>> agg_override;  // term, pool
      for (const AggInfo& a : aggs) {
        double gen = a.gen_slot >= 0 ? chosen(a.gen_slot)
                                     : a.gen.lo;
        double rho = a.rho_slot >= 0 ? chosen(a.rho_slot) : a.rho.lo;
        std::uint64_t pool =
            a.pool_slot >= 0
                ? static_cast<std::uint64_t>(chosen(a.pool_slot))
                : pool_hi;
        double term = a.negated ? rho * (1.0 - gen) : rho * gen;
        agg_override[a.restriction] = {term, pool};
      }
      std::map<int, double> marg = evaluate_slice(
          sidx, input_override, cpt_override, agg_override, uniform_prior_for,
          queries);
      for (const auto& [v, p] : marg) {
        auto it = out.find(v);
        if (it == out.end())
          out[v] = Interval::point(p);
        else {
          it->second.lo = std::min(it->second.lo, p);
          it->second.hi = std::max(it->second.hi, p);
        }
      }
    }
    return out;
  }

  // Point-valued slice evaluation with explicit overrides.
  std::map<int, double> evaluate_slice(
      int sidx, const std::map<int, double>& input_override,
      const std::map<int, std::array<double, 3>>& cpt_override,
      const std::map<int, std::pair<double, std::uint64_t>>& agg_override,
      int uniform_prior_for, const std::vector<int>& queries) {
    const SliceFactor& f = g_.slices[static_cast<size_t>(sidx)];
    const ShatteredNetwork& sn = g_.sn;
    FactorSet fs;
    std::map<int, int> local;
    for (int v : f.member_vars) local[v] = fs.add_variable(2);
    for (int u : f.input_vars)
      if (!local.count(u)) local[u] = fs.add_variable(2);

    for (int u : f.input_vars) {
      double p;
      if (u == uniform_prior_for)
        p = 0.5;
      else if (input_override.count(u))
        p = input_override.at(u);
      else
        p = n_.at({u, sidx}).lo;  // degenerate when not a slot
      Factor pf = fs.make({local[u]});
      pf.values = {1.0 - p, p};
      fs.add(std::move(pf));
    }
    // Downstream likelihoods on owned boundary variables; non-point values
    // arrive through the enumeration overrides.
    for (int w : f.member_vars) {
      if (w == uniform_prior_for) continue;
      Interval lam = owned_like(w);
      if (lam.is_point() && lam.lo == 0.5) continue;
      double p = lam.lo;
      auto oit = input_override.find(~w);
      if (oit != input_override.end()) p = oit->second;
      Factor pf = fs.make({local[w]});
      pf.values = {1.0 - p, p};
      fs.add(std::move(pf));
    }

    for (int v : f.member_vars) {
      const ShatCpt& c = sn.cpts[static_cast<size_t>(v)];
      int child = local[v];
      std::array<double, 3> ov{-1, -1, -1};
      auto oit = cpt_override.find(v);
      if (oit != cpt_override.end()) ov = oit->second;
      switch (c.kind) {
        case CptKind::Bernoulli: {
          double p = ov[0] >= 0 ? ov[0] : c.p.lo;
          Factor pf = fs.make({child});
          pf.values = {1.0 - p, p};
          fs.add(std::move(pf));
          break;
        }
        case CptKind::Const: {
          Factor pf = fs.make({child});
          pf.values[static_cast<size_t>(c.const_value ? 1 : 0)] = 1.0;
          fs.add(std::move(pf));
          break;
        }
        case CptKind::TwoRow: {
          double pt = ov[1] >= 0 ? ov[1] : c.if_true.lo;
          double pf0 = ov[2] >= 0 ? ov[2] : c.if_false.lo;
          int parent = local.at(c.parents[0]);
          Factor pf = fs.make({child, parent});
          std::vector<int> vals(2);
          auto set = [&](int pv, int cv, double x) {
            for (size_t k = 0; k < pf.vars.size(); ++k)
              vals[k] = pf.vars[k] == parent ? pv : cv;
            pf.values[FactorSet::index_of(pf, vals)] = x;
          };
          set(1, 1, pt);
          set(1, 0, 1.0 - pt);
          set(0, 1, pf0);
          set(0, 0, 1.0 - pf0);
          fs.add(std::move(pf));
          break;
        }
        case CptKind::BoolFunc: {
          std::vector<int> vars;
          for (int p : c.parents) vars.push_back(local.at(p));
          vars.push_back(child);
          Factor pf = fs.make(vars);
          std::vector<int> vals(pf.vars.size(), 0);
          std::vector<int> parent_vals(c.parents.size());
          for (;;) {
            for (size_t k = 0; k < c.parents.size(); ++k)
              for (size_t q = 0; q < pf.vars.size(); ++q)
                if (pf.vars[q] == local.at(c.parents[k])) parent_vals[k] = vals[q];
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
          fs.add(std::move(pf));
          break;
        }
        case CptKind::Count: {
          unsigned cap = c.count_hi == kCountInf ? c.count_lo : c.count_hi + 1;
          auto in_range = [&](unsigned s) {
            return s >= c.count_lo &&
                   (c.count_hi == kCountInf || s <= c.count_hi);
          };
          auto ao = agg_override.find(v);
          double term = ao != agg_override.end() ? ao->second.first : 0.0;
          std::uint64_t pool = ao != agg_override.end() ? ao->second.second : 0;
          std::vector<double> dist = binomial_clamped(pool, term, cap);
          int state = fs.add_variable(static_cast<int>(cap) + 1);
          {
            Factor pf = fs.make({state});
            pf.values = dist;
            fs.add(std::move(pf));
          }
          for (const auto& pr : c.pairs) {
            if (pr.pool) continue;
            if (!sn.is_live(pr.role_var)) continue;
            int role_local = local.at(pr.role_var);
            int filler_local =
                pr.filler_var >= 0 ? local.at(pr.filler_var) : -1;
            int next = fs.add_variable(static_cast<int>(cap) + 1);
            std::vector<int> vars = {state, role_local};
            if (filler_local >= 0) vars.push_back(filler_local);
            vars.push_back(next);
            Factor pf = fs.make(vars);
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
            fs.add(std::move(pf));
            state = next;
          }
          {
            Factor pf = fs.make({state, child});
            std::vector<int> vals(2);
            for (unsigned s = 0; s <= cap; ++s)
              for (int cv = 0; cv <= 1; ++cv) {
                for (size_t k = 0; k < pf.vars.size(); ++k)
                  vals[k] = pf.vars[k] == child ? cv : static_cast<int>(s);
                pf.values[FactorSet::index_of(pf, vals)] =
                    (cv == (in_range(s) ? 1 : 0)) ? 1.0 : 0.0;
              }
            fs.add(std::move(pf));
          }
          break;
        }
      }
    }
    std::map<int, int> local_evidence;
    for (const auto& [tv, val] : f.evidence) {
      auto it = local.find(tv);
      if (it != local.end()) local_evidence[it->second] = val;
    }
    fs.restrict_evidence(local_evidence);

    VeOptions vo;
    vo.max_factor_entries = opt_.max_factor_entries;
    std::map<int, double> out;
    for (int q : queries) {
      FactorSet copy = fs;
      Factor res = copy.eliminate_all_but({local.at(q)}, vo);
      out[q] = res.values[1];
    }
    return out;
  }

  double sweep() {
    const ShatteredNetwork& sn = g_.sn;
    std::map<int, Interval> new_home = home_;
    std::map<std::pair<int, int>, Interval> new_like = like_;

    for (size_t sidx = 0; sidx < g_.slices.size(); ++sidx) {
      const SliceFactor& f = g_.slices[sidx];
      // Home marginals.
      std::vector<int> home_queries;
      for (int v : f.member_vars) {
        if (sn.vars[static_cast<size_t>(v)].second != -1) continue;
        if (sn.tnet->node(sn.vars[static_cast<size_t>(v)].tnode).kind !=
                TNodeKind::Concept &&
            v != sn.target_var && !g_.home_slice.count(v))
          continue;
        home_queries.push_back(v);
      }
      if (!home_queries.empty()) {
        auto bounds = slice_bounds(static_cast<int>(sidx), home_queries, -1);
        for (const auto& [v, iv] : bounds) new_home[v] = iv;
      }
      for (int u : f.input_vars) {
        auto bounds = slice_bounds(static_cast<int>(sidx), {u}, u);
        new_like[{static_cast<int>(sidx), u}] = bounds.at(u);
      }
    }

    double residual = 0.0;
    auto diff = [&](const Interval& a, const Interval& b) {
      return std::max(std::abs(a.lo - b.lo), std::abs(a.hi - b.hi));
    };
    for (const auto& [k, v] : new_home) {
      auto it = home_.find(k);
      residual = std::max(residual, it == home_.end() ? 1.0 : diff(v, it->second));
    }
    for (const auto& [k, v] : new_like) {
      auto it = like_.find(k);
      residual = std::max(residual, it == like_.end() ? 1.0 : diff(v, it->second));
    }
    home_ = std::move(new_home);
    like_ = std::move(new_like);

    for (int b : g_.boundary_vars) {
      for (int sidx : g_.consumers.at(b)) {
        std::vector<Interval> msgs;
        msgs.push_back(home_value(b));
        for (int s2 : g_.consumers.at(b)) {
          if (s2 == sidx) continue;
          auto it = like_.find({s2, b});
          if (it != like_.end()) msgs.push_back(it->second);
        }
        Interval nv = detail::interval_product(msgs);
        auto& slot = n_[{b, sidx}];
        residual = std::max(residual, diff(nv, slot));
        slot = nv;
      }
    }
    return residual;
  }

  CompactFactorGraph g_;
  std::uint64_t n_lo_, n_hi_;
  Schedule sched_;
  ClusterOptions opt_;

  std::map<int, Interval> home_;
  std::map<std::pair<int, int>, Interval> like_;
  std::map<std::pair<int, int>, Interval> n_;
  std::map<int, Interval> n1_;
};

// ── interval_query ───────────────────────────────────────────────────────────
// Exact(N): point domain, interval parameters.  Range/Unconstrained: the pool
// exponents are additionally optimized over the admissible domain sizes (the
// generic slice must exist, so sizes below M+1 collapse onto M+1).

inline InferenceResult interval_query(const CompactFactorGraph& g,
                                      const CredalSpec& spec, const Query& q,
                                      Schedule sched = ClusterEngine::default_schedule(),
                                      const ClusterOptions& opt = {}) {
  std::uint64_t m = g.sn.named.size();
  std::uint64_t n_lo = 0, n_hi = 0;
  switch (q.domain.kind) {
    case DomainSpec::Kind::Exact:
      n_lo = n_hi = q.domain.n;
      break;
    case DomainSpec::Kind::Range:
      n_lo = std::max(q.domain.lo, m + 1);
      n_hi = q.domain.hi;
      break;
    case DomainSpec::Kind::Unconstrained:
      n_lo = m + 1;
      n_hi = q.domain.hi;
      break;
    case DomainSpec::Kind::Infinite:
      throw Error("interval_query does not take infinite domains; use limit_query");
  }
  if (n_lo < m) throw DomainTooSmallError("domain below the named individuals");

  // Degenerate credal sets with a fixed domain reduce to the point engine.
  if (spec.degenerate() && n_lo == n_hi && g.sn.domain.kind == DomainSpec::Kind::Exact) {
    InferenceResult pt = cluster_query_at(g, n_lo, sched, opt);
    InferenceResult out = InferenceResult::bounds(
        Interval::point(pt.probability), pt.iterations, pt.converged);
    out.warnings = pt.warnings;
    return out;
  }
  CredalEngine engine(g, n_lo, n_hi, sched, opt);
  return engine.run();
}

}  // namespace crdl
