#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crdl/tnetwork.hpp"
#include "crdl/validate.hpp"

namespace crdl {

// ── Grounded Bayesian networks ───────────────────────────────────────────────
// Grounding a terminology over a domain of size N yields one binary indicator
// variable per concept-like node and individual, and one per role node and
// ordered pair of individuals: N|C| + N^2|R| variables in total.  Inverse
// role groundings alias the underlying role variable with swapped arguments
// and never create variables of their own.
//
// Deterministic CPTs stay symbolic: definitions keep their Boolean bodies and
// restrictions keep a counted-pair form (child = 1 iff the number of
// satisfied pairs falls in [lo, hi]), since restriction nodes have O(N)
// parents and tabulation would be exponential.

struct GroundedVariable {
  int tnode = -1;
  int i = -1;          // first argument
  int j = -1;          // second argument (roles only)
};

inline constexpr unsigned kCountInf = 0xffffffffu;

struct CountPair {
  int role_var = -1;
  int filler_var = -1;    // -1 when the filler is constant
  int filler_const = -1;  // 0/1 when filler_var < 0
};

enum class CptKind { Bernoulli, TwoRow, BoolFunc, Count, Const };

struct Cpt {
  CptKind kind = CptKind::Const;
  std::vector<int> parents;  // ordered parent variable ids

  Interval p;                            // Bernoulli
  Interval if_true, if_false;            // TwoRow (parents[0] = condition)
  const DefExpr* def = nullptr;          // BoolFunc (owned by the t-network)
  bool const_value = false;              // Const

  // Count: child = 1 iff #{pairs with role=1 and filler==polarity} in [lo,hi].
  std::vector<CountPair> pairs;
  bool count_negated_filler = false;     // forall counts violations (r and not C)
  unsigned count_lo = 0;
  unsigned count_hi = kCountInf;

  // Evaluates P(child=1 | parent values) for point-valued networks.
  double prob_true(const std::vector<int>& parent_vals) const {
    switch (kind) {
      case CptKind::Bernoulli:
        return p.lo;
      case CptKind::TwoRow:
        return parent_vals[0] ? if_true.lo : if_false.lo;
      case CptKind::BoolFunc:
        return def->eval(parent_vals) ? 1.0 : 0.0;
      case CptKind::Const:
        return const_value ? 1.0 : 0.0;
      case CptKind::Count: {
        unsigned count = 0;
        // parent_vals lays out pairs as (role, filler?) in pair order.
        size_t slot = 0;
        for (const auto& pr : pairs) {
          int role = parent_vals[slot++];
          int filler = pr.filler_var >= 0 ? parent_vals[slot++] : pr.filler_const;
          if (count_negated_filler) filler = 1 - filler;
          if (role && filler) ++count;
        }
        return (count >= count_lo && (count_hi == kCountInf || count <= count_hi))
                   ? 1.0
                   : 0.0;
      }
    }
    return 0.0;
  }

  bool is_deterministic() const {
    return kind == CptKind::BoolFunc || kind == CptKind::Count ||
           kind == CptKind::Const;
  }
  bool is_point_valued() const {
    switch (kind) {
      case CptKind::Bernoulli: return p.is_point();
      case CptKind::TwoRow: return if_true.is_point() && if_false.is_point();
      default: return true;
    }
  }
};

struct GroundedNetwork {
  std::shared_ptr<const TNetwork> tnet;
  std::uint64_t N = 0;
  std::vector<std::string> named;  // M named individuals, index = individual id

  std::vector<GroundedVariable> vars;
  std::vector<Cpt> cpts;                   // one per variable
  std::map<int, int> evidence;             // variable -> observed value
  int target_var = -1;

  // Liveness filter set by prune(); empty means every variable is live.
  std::vector<char> live;

  bool has_inverse_roles = false;
  // Requested inverse groundings and the variable they alias.
  std::vector<std::pair<GroundedVariable, int>> inverse_aliases;

  // Layout: concept-like slots then role slots.
  std::vector<int> node_slot;   // per tnode: slot within its group
  std::vector<bool> node_is_role;
  size_t concept_like = 0;
  size_t role_like = 0;

  size_t M() const { return named.size(); }

  bool is_live(int v) const {
    return live.empty() || live[static_cast<size_t>(v)];
  }
  size_t live_count() const {
    if (live.empty()) return vars.size();
    size_t n = 0;
    for (char c : live) n += c ? 1 : 0;
    return n;
  }

  int var_of(int tnode, std::uint64_t i, std::uint64_t j = 0) const {
    size_t slot = static_cast<size_t>(node_slot[static_cast<size_t>(tnode)]);
    if (node_is_role[static_cast<size_t>(tnode)])
      return static_cast<int>(concept_like * N + slot * N * N + i * N + j);
    return static_cast<int>(slot * N + i);
  }

  const GroundedVariable& var(int id) const {
    return vars[static_cast<size_t>(id)];
  }
  const Cpt& cpt(int id) const { return cpts[static_cast<size_t>(id)]; }

  std::string var_name(int id) const {
    const auto& v = vars[static_cast<size_t>(id)];
    auto ind = [&](int x) {
      return static_cast<size_t>(x) < named.size() ? named[static_cast<size_t>(x)]
                                                   : "x" + std::to_string(x);
    };
    const auto& label = tnet->node(v.tnode).label;
    if (v.j >= 0) return label + "(" + ind(v.i) + "," + ind(v.j) + ")";
    return label + "(" + ind(v.i) + ")";
  }

  bool point_valued() const {
    for (const auto& c : cpts)
      if (!c.is_point_valued()) return false;
    return true;
  }
};

namespace detail {

inline Cpt make_concept_cpt(const TNetwork& tn, const GroundedNetwork& g,
                            int tnode, std::uint64_t i) {
  const TNode& n = tn.node(tnode);
  Cpt c;
  switch (n.model) {
    case ConceptModel::Prior:
    case ConceptModel::Unspecified:
      c.kind = CptKind::Bernoulli;
      c.p = n.prior;
      break;
    case ConceptModel::CondPair:
      c.kind = CptKind::TwoRow;
      c.parents = {g.var_of(n.parents[0], i)};
      c.if_true = n.cond_if_true;
      c.if_false = n.cond_if_false;
      break;
    case ConceptModel::Defined: {
      c.kind = CptKind::BoolFunc;
      c.def = &n.def;
      c.parents.reserve(n.parents.size());
      for (int p : n.parents) c.parents.push_back(g.var_of(p, i));
      break;
    }
    case ConceptModel::Nominal: {
      c.kind = CptKind::Const;
      c.const_value = false;
      for (size_t m = 0; m < g.named.size(); ++m)
        if (g.named[m] == n.nominal_individual && m == i) c.const_value = true;
      break;
    }
  }
  return c;
}

inline Cpt make_restriction_cpt(const TNetwork& tn, GroundedNetwork& g,
                                int tnode, std::uint64_t i) {
  const TNode& n = tn.node(tnode);
  Cpt c;
  c.kind = CptKind::Count;
  switch (n.rkind) {
    case RestrKind::Forall:
      c.count_negated_filler = true;
      c.count_lo = 0;
      c.count_hi = 0;
      break;
    case RestrKind::Exists:
      c.count_lo = 1;
      break;
    case RestrKind::AtLeast:
      c.count_lo = n.k;
      break;
    case RestrKind::AtMost:  // complement of atleast(k+1)
      c.count_lo = 0;
      c.count_hi = n.k;
      break;
    case RestrKind::Exactly:  // atleast(k) and not atleast(k+1)
      c.count_lo = n.k;
      c.count_hi = n.k;
      break;
  }
  for (std::uint64_t y = 0; y < g.N; ++y) {
    CountPair pr;
    if (n.role_inverted) {
      pr.role_var = g.var_of(n.role_node, y, i);
      g.inverse_aliases.push_back({GroundedVariable{n.role_node,
                                                    static_cast<int>(i),
                                                    static_cast<int>(y)},
                                   pr.role_var});
    } else {
      pr.role_var = g.var_of(n.role_node, i, y);
    }
    if (n.filler_node >= 0) {
      pr.filler_var = g.var_of(n.filler_node, y);
    } else {
      pr.filler_const = n.filler_const == FillerConst::Top ? 1 : 0;
    }
    c.pairs.push_back(pr);
    c.parents.push_back(pr.role_var);
    if (pr.filler_var >= 0) c.parents.push_back(pr.filler_var);
  }
  return c;
}

}  // namespace detail

// ── ground ───────────────────────────────────────────────────────────────────

inline GroundedNetwork ground(const Terminology& t, const Query& q) {
  if (q.domain.kind != DomainSpec::Kind::Exact)
    throw Error("ground() requires an exact domain size");
  auto tnet = std::make_shared<TNetwork>(build_tnetwork(t));

  GroundedNetwork g;
  g.tnet = tnet;
  g.N = q.domain.n;
  g.named = q.named_individuals(t);
  if (g.N < g.named.size())
    throw DomainTooSmallError(
        "domain size " + std::to_string(g.N) + " is smaller than the " +
        std::to_string(g.named.size()) + " named individuals");
  g.has_inverse_roles = tnet->has_inverse_roles;

  const std::uint64_t N = g.N;
  // Guard against astronomically large grounded networks.
  {
    const std::uint64_t limit = 4u << 20;
    std::uint64_t total = N * tnet->concept_like_count() +
                          N * N * tnet->role_count();
    if (total > limit)
      throw ResourceError("grounded network would have " +
                          std::to_string(total) + " variables");
  }

  g.node_slot.resize(tnet->nodes.size());
  g.node_is_role.resize(tnet->nodes.size());
  for (size_t id = 0; id < tnet->nodes.size(); ++id) {
    bool role = tnet->nodes[id].kind == TNodeKind::Role;
    g.node_is_role[id] = role;
    g.node_slot[id] = static_cast<int>(role ? g.role_like++ : g.concept_like++);
  }

  size_t total = g.concept_like * N + g.role_like * N * N;
  g.vars.resize(total);
  g.cpts.resize(total);
  for (size_t id = 0; id < tnet->nodes.size(); ++id) {
    const TNode& n = tnet->nodes[id];
    if (n.kind == TNodeKind::Role) {
      for (std::uint64_t i = 0; i < N; ++i)
        for (std::uint64_t j = 0; j < N; ++j) {
          int v = g.var_of(static_cast<int>(id), i, j);
          g.vars[static_cast<size_t>(v)] = {static_cast<int>(id),
                                            static_cast<int>(i),
                                            static_cast<int>(j)};
          Cpt c;
          if (n.role_has_hierarchy) {
            c.kind = CptKind::TwoRow;
            c.parents = {g.var_of(n.parents[0], i, j)};
            c.if_true = n.cond_if_true;
            c.if_false = n.cond_if_false;
          } else {
            c.kind = CptKind::Bernoulli;
            c.p = n.prior;
          }
          g.cpts[static_cast<size_t>(v)] = std::move(c);
        }
    } else {
      for (std::uint64_t i = 0; i < N; ++i) {
        int v = g.var_of(static_cast<int>(id), i);
        g.vars[static_cast<size_t>(v)] = {static_cast<int>(id),
                                          static_cast<int>(i), -1};
        g.cpts[static_cast<size_t>(v)] =
            n.kind == TNodeKind::Restriction
                ? detail::make_restriction_cpt(*tnet, g, static_cast<int>(id), i)
                : detail::make_concept_cpt(*tnet, g, static_cast<int>(id), i);
      }
    }
  }

  // Evidence clamps and query target.
  auto individual_index = [&](const std::string& name) {
    for (size_t m = 0; m < g.named.size(); ++m)
      if (g.named[m] == name) return static_cast<std::uint64_t>(m);
    throw ValidationError("unknown individual " + name);
  };
  for (const auto& as : q.evidence) {
    int v;
    if (as.is_role) {
      int rn = tnet->role_node(as.predicate);
      if (rn < 0) throw ValidationError("unknown role " + as.predicate);
      v = g.var_of(rn, individual_index(as.a), individual_index(as.b));
    } else {
      int cn = tnet->concept_node(as.predicate);
      if (cn < 0) throw ValidationError("unknown concept " + as.predicate);
      v = g.var_of(cn, individual_index(as.a));
    }
    int val = as.positive ? 1 : 0;
    auto it = g.evidence.find(v);
    if (it != g.evidence.end() && it->second != val)
      throw ValidationError("contradictory evidence on " + g.var_name(v));
    g.evidence[v] = val;
  }
  {
    int cn = tnet->concept_node(q.target.predicate);
    if (cn < 0) throw ValidationError("unknown concept " + q.target.predicate);
    g.target_var = g.var_of(cn, individual_index(q.target.a));
  }
  return g;
}

}  // namespace crdl
