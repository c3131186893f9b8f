#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crdl/grounding.hpp"
#include "crdl/prune.hpp"

namespace crdl {

// ── Shattered networks ───────────────────────────────────────────────────────
// Groundings are partitioned into slices: one per named individual, one for a
// reserved generic individual b, and a single parameterized slice standing
// for the remaining pool of N-M-1 interchangeable individuals (with an
// auxiliary second individual for role groundings between distinct pool
// members).  Every template carries the number of grounded copies it stands
// for, so expanding the pool reproduces the grounded network exactly.
//
// Owner/filler classes are encoded as:
//   0..M-1  named individuals (same order as the query's named list)
//   M       the reserved individual b
//   M+1     the parameterized pool individual x
//   M+2     a second pool individual y distinct from x (role templates only)

struct ShatVar {
  int tnode = -1;
  int owner = -1;
  int second = -2;  // -1 for unary relations; a class id for roles
};

struct ShatPair {
  int role_var = -1;
  int filler_var = -1;
  int filler_const = -1;
  std::uint64_t count = 1;  // grounded pairs this template stands for
  bool pool = false;        // beyond the named-plus-b part of the restriction
};

struct ShatCpt {
  CptKind kind = CptKind::Const;
  std::vector<int> parents;  // deduplicated template ids

  Interval p;
  Interval if_true, if_false;
  const DefExpr* def = nullptr;
  bool const_value = false;

  std::vector<ShatPair> pairs;
  bool count_negated_filler = false;
  unsigned count_lo = 0;
  unsigned count_hi = kCountInf;
};

struct ShatteredNetwork {
  std::shared_ptr<const TNetwork> tnet;
  DomainSpec domain;
  std::uint64_t N = 0;  // meaningful for exact domains only
  std::vector<std::string> named;
  bool has_generic = false;  // b and x slices exist

  std::vector<ShatVar> vars;
  std::vector<ShatCpt> cpts;
  std::map<int, int> evidence;
  int target_var = -1;
  std::vector<char> live;
  bool has_inverse_roles = false;

  int M() const { return static_cast<int>(named.size()); }
  int b_class() const { return M(); }
  int x_class() const { return M() + 1; }
  int y_class() const { return M() + 2; }
  int concept_classes() const { return M() + (has_generic ? 2 : 0); }

  std::uint64_t pool(std::uint64_t n) const {
    return n > named.size() ? n - named.size() - 1 : 0;
  }
  std::uint64_t pool() const { return pool(N); }

  // Grounded copies a template stands for (for the given total domain size).
  std::uint64_t multiplicity(int var, std::uint64_t n) const {
    const ShatVar& v = vars[static_cast<size_t>(var)];
    std::uint64_t p = pool(n);
    auto cls = [&](int c) -> std::uint64_t {
      if (c == x_class()) return p;
      return 1;  // named or b
    };
    if (v.second == -1) return cls(v.owner);
    if (v.owner == x_class() && v.second == y_class())
      return p * (p > 0 ? p - 1 : 0);
    if (v.owner == x_class() && v.second == x_class()) return p;  // r(x,x)
    return cls(v.owner) * cls(v.second);
  }
  std::uint64_t multiplicity(int var) const { return multiplicity(var, N); }

  bool is_live(int v) const { return live.empty() || live[static_cast<size_t>(v)]; }

  int var_of(int tnode, int owner, int second = -1) const {
    auto it = index_.find(key(tnode, owner, second));
    return it == index_.end() ? -1 : it->second;
  }

  std::string class_name(int c) const {
    if (c < M()) return named[static_cast<size_t>(c)];
    if (c == b_class()) return "b";
    if (c == x_class()) return "x";
    return "y";
  }
  std::string var_name(int id) const {
    const ShatVar& v = vars[static_cast<size_t>(id)];
    const std::string& label = tnet->node(v.tnode).label;
    if (v.second == -1) return label + "(" + class_name(v.owner) + ")";
    return label + "(" + class_name(v.owner) + "," + class_name(v.second) + ")";
  }

  // Construction helpers (used by shatter()).
  int add_var(int tnode, int owner, int second) {
    vars.push_back({tnode, owner, second});
    cpts.emplace_back();
    int id = static_cast<int>(vars.size()) - 1;
    index_[key(tnode, owner, second)] = id;
    return id;
  }

 private:
  static std::uint64_t key(int tnode, int owner, int second) {
    return (static_cast<std::uint64_t>(tnode) << 24) ^
           (static_cast<std::uint64_t>(owner + 2) << 12) ^
           static_cast<std::uint64_t>(second + 2);
  }
  std::map<std::uint64_t, int> index_;
};

namespace detail {

inline ShatCpt shattered_concept_cpt(const TNetwork& tn,
                                     const ShatteredNetwork& sn, int tnode,
                                     int owner) {
  const TNode& n = tn.node(tnode);
  ShatCpt c;
  switch (n.model) {
    case ConceptModel::Prior:
    case ConceptModel::Unspecified:
      c.kind = CptKind::Bernoulli;
      c.p = n.prior;
      break;
    case ConceptModel::CondPair:
      c.kind = CptKind::TwoRow;
      c.parents = {sn.var_of(n.parents[0], owner)};
      c.if_true = n.cond_if_true;
      c.if_false = n.cond_if_false;
      break;
    case ConceptModel::Defined: {
      c.kind = CptKind::BoolFunc;
      c.def = &n.def;
      for (int p : n.parents) c.parents.push_back(sn.var_of(p, owner));
      break;
    }
    case ConceptModel::Nominal:
      c.kind = CptKind::Const;
      c.const_value = owner < sn.M() &&
                      sn.named[static_cast<size_t>(owner)] == n.nominal_individual;
      break;
  }
  return c;
}

inline ShatCpt shattered_restriction_cpt(const TNetwork& tn,
                                         const ShatteredNetwork& sn, int tnode,
                                         int owner) {
  const TNode& n = tn.node(tnode);
  ShatCpt c;
  c.kind = CptKind::Count;
  switch (n.rkind) {
    case RestrKind::Forall:
      c.count_negated_filler = true;
      c.count_hi = 0;
      break;
    case RestrKind::Exists: c.count_lo = 1; break;
    case RestrKind::AtLeast: c.count_lo = n.k; break;
    case RestrKind::AtMost: c.count_hi = n.k; break;
    case RestrKind::Exactly: c.count_lo = n.k; c.count_hi = n.k; break;
  }
  auto add_pair = [&](int y_class, std::uint64_t count, bool pool_part,
                      bool self_pair) {
    ShatPair pr;
    pr.count = count;
    pr.pool = pool_part;
    int role_second = y_class;
    // A pool owner's role grounding onto another pool member uses the y class.
    if (owner == sn.x_class() && y_class == sn.x_class() && !self_pair)
      role_second = sn.y_class();
    int rf = owner, rs = role_second;
    if (n.role_inverted) {
      std::swap(rf, rs);
      // Distinct pool pairs have a single canonical template (x, y).
      if (rf == sn.y_class()) {
        rf = sn.x_class();
        rs = sn.y_class();
      }
    }
    pr.role_var = sn.var_of(n.role_node, rf, rs);
    if (n.filler_node >= 0) {
      pr.filler_var = sn.var_of(n.filler_node, y_class);
    } else {
      pr.filler_const = n.filler_const == FillerConst::Top ? 1 : 0;
    }
    c.pairs.push_back(pr);
    c.parents.push_back(pr.role_var);
    if (pr.filler_var >= 0) c.parents.push_back(pr.filler_var);
  };

  for (int j = 0; j < sn.M(); ++j) add_pair(j, 1, false, owner == j);
  if (sn.has_generic) {
    add_pair(sn.b_class(), 1, false, owner == sn.b_class());
    if (owner == sn.x_class()) {
      // Self pair plus the cross pairs to the rest of the pool.  Counts are
      // symbolic: engines evaluate them at their own N.
      add_pair(sn.x_class(), 1, false, true);
      add_pair(sn.x_class(), sn.pool() > 0 ? sn.pool() - 1 : 0, true, false);
    } else {
      add_pair(sn.x_class(), sn.pool(), true, false);
    }
  }
  // Deduplicate parents (a pair may repeat a template).
  std::sort(c.parents.begin(), c.parents.end());
  c.parents.erase(std::unique(c.parents.begin(), c.parents.end()),
                  c.parents.end());
  return c;
}

}  // namespace detail

// ── shatter ──────────────────────────────────────────────────────────────────

inline ShatteredNetwork shatter(const Terminology& t, const Query& q) {
  auto tnet = std::make_shared<TNetwork>(build_tnetwork(t));
  ShatteredNetwork sn;
  sn.tnet = tnet;
  sn.domain = q.domain;
  sn.named = q.named_individuals(t);
  sn.has_inverse_roles = tnet->has_inverse_roles;

  std::uint64_t M = sn.named.size();
  switch (q.domain.kind) {
    case DomainSpec::Kind::Exact:
      sn.N = q.domain.n;
      if (sn.N < M)
        throw DomainTooSmallError("domain size " + std::to_string(sn.N) +
                                  " is smaller than the " + std::to_string(M) +
                                  " named individuals");
      sn.has_generic = sn.N > M;
      break;
    case DomainSpec::Kind::Infinite:
      sn.N = 0;
      sn.has_generic = true;
      break;
    case DomainSpec::Kind::Range:
    case DomainSpec::Kind::Unconstrained:
      sn.N = q.domain.hi;
      sn.has_generic = true;
      break;
  }

  // Variables: concept-like templates per owner class, role templates per
  // (owner, second) class pair.
  int owners = sn.concept_classes();
  for (size_t id = 0; id < tnet->nodes.size(); ++id) {
    const TNode& n = tnet->nodes[id];
    if (n.kind == TNodeKind::Role) {
      for (int o = 0; o < owners; ++o)
        for (int f = 0; f < owners; ++f)
          sn.add_var(static_cast<int>(id), o, f);
      if (sn.has_generic)
        sn.add_var(static_cast<int>(id), sn.x_class(), sn.y_class());
    } else {
      for (int o = 0; o < owners; ++o) sn.add_var(static_cast<int>(id), o, -1);
    }
  }

  // CPT templates.
  for (size_t v = 0; v < sn.vars.size(); ++v) {
    const ShatVar& sv = sn.vars[v];
    const TNode& n = tnet->node(sv.tnode);
    if (n.kind == TNodeKind::Role) {
      ShatCpt c;
      if (n.role_has_hierarchy) {
        c.kind = CptKind::TwoRow;
        c.parents = {sn.var_of(n.parents[0], sv.owner, sv.second)};
        c.if_true = n.cond_if_true;
        c.if_false = n.cond_if_false;
      } else {
        c.kind = CptKind::Bernoulli;
        c.p = n.prior;
      }
      sn.cpts[v] = std::move(c);
    } else if (n.kind == TNodeKind::Restriction) {
      sn.cpts[v] =
          detail::shattered_restriction_cpt(*tnet, sn, sv.tnode, sv.owner);
    } else {
      sn.cpts[v] = detail::shattered_concept_cpt(*tnet, sn, sv.tnode, sv.owner);
    }
  }

  // Evidence and target live on named slices.
  auto individual_index = [&](const std::string& name) {
    for (size_t m = 0; m < sn.named.size(); ++m)
      if (sn.named[m] == name) return static_cast<int>(m);
    throw ValidationError("unknown individual " + name);
  };
  for (const auto& as : q.evidence) {
    int v;
    if (as.is_role) {
      int rn = tnet->role_node(as.predicate);
      if (rn < 0) throw ValidationError("unknown role " + as.predicate);
      v = sn.var_of(rn, individual_index(as.a), individual_index(as.b));
    } else {
      int cn = tnet->concept_node(as.predicate);
      if (cn < 0) throw ValidationError("unknown concept " + as.predicate);
      v = sn.var_of(cn, individual_index(as.a));
    }
    int val = as.positive ? 1 : 0;
    auto it = sn.evidence.find(v);
    if (it != sn.evidence.end() && it->second != val)
      throw ValidationError("contradictory evidence on " + sn.var_name(v));
    sn.evidence[v] = val;
  }
  {
    int cn = tnet->concept_node(q.target.predicate);
    if (cn < 0) throw ValidationError("unknown concept " + q.target.predicate);
    sn.target_var = sn.var_of(cn, individual_index(q.target.a));
  }
  return sn;
}

// ── expand ───────────────────────────────────────────────────────────────────
// Instantiates the pool: named individuals keep their indices, b becomes M,
// and the pool becomes M+1..N-1.  The result must equal ground() up to this
// renaming; the equality is exercised by tests.

inline GroundedNetwork expand(const ShatteredNetwork& sn) {
  if (sn.domain.kind != DomainSpec::Kind::Exact)
    throw Error("expand() requires an exact domain size");
  const std::uint64_t N = sn.N;
  const std::uint64_t M = sn.named.size();
  const TNetwork& tn = *sn.tnet;

  GroundedNetwork g;
  g.tnet = sn.tnet;
  g.N = N;
  g.named = sn.named;
  g.has_inverse_roles = sn.has_inverse_roles;

  g.node_slot.resize(tn.nodes.size());
  g.node_is_role.resize(tn.nodes.size());
  for (size_t id = 0; id < tn.nodes.size(); ++id) {
    bool role = tn.nodes[id].kind == TNodeKind::Role;
    g.node_is_role[id] = role;
    g.node_slot[id] = static_cast<int>(role ? g.role_like++ : g.concept_like++);
  }
  g.vars.resize(g.concept_like * N + g.role_like * N * N);
  g.cpts.resize(g.vars.size());

  // Class of a concrete individual.
  auto class_of = [&](std::uint64_t i) {
    if (i < M) return static_cast<int>(i);
    if (i == M) return sn.b_class();
    return sn.x_class();
  };

  for (size_t id = 0; id < tn.nodes.size(); ++id) {
    const TNode& n = tn.nodes[id];
    int tnode = static_cast<int>(id);
    if (n.kind == TNodeKind::Role) {
      for (std::uint64_t i = 0; i < N; ++i)
        for (std::uint64_t j = 0; j < N; ++j) {
          int gv = g.var_of(tnode, i, j);
          g.vars[static_cast<size_t>(gv)] = {tnode, static_cast<int>(i),
                                             static_cast<int>(j)};
          int second = class_of(j);
          if (class_of(i) == sn.x_class() && class_of(j) == sn.x_class() &&
              i != j)
            second = sn.y_class();
          int tv = sn.var_of(tnode, class_of(i), second);
          const ShatCpt& sc = sn.cpts[static_cast<size_t>(tv)];
          Cpt c;
          c.kind = sc.kind;
          if (sc.kind == CptKind::TwoRow) {
            c.parents = {g.var_of(tn.node(tnode).parents[0], i, j)};
            c.if_true = sc.if_true;
            c.if_false = sc.if_false;
          } else {
            c.p = sc.p;
          }
          g.cpts[static_cast<size_t>(gv)] = std::move(c);
        }
      continue;
    }
    for (std::uint64_t i = 0; i < N; ++i) {
      int gv = g.var_of(tnode, i);
      g.vars[static_cast<size_t>(gv)] = {tnode, static_cast<int>(i), -1};
      int tv = sn.var_of(tnode, class_of(i));
      const ShatCpt& sc = sn.cpts[static_cast<size_t>(tv)];
      Cpt c;
      c.kind = sc.kind;
      switch (sc.kind) {
        case CptKind::Bernoulli:
          c.p = sc.p;
          break;
        case CptKind::Const:
          c.const_value = sc.const_value;
          break;
        case CptKind::TwoRow:
          c.parents = {g.var_of(n.parents[0], i)};
          c.if_true = sc.if_true;
          c.if_false = sc.if_false;
          break;
        case CptKind::BoolFunc:
          c.def = sc.def;
          for (int p : n.parents) c.parents.push_back(g.var_of(p, i));
          break;
        case CptKind::Count: {
          c.count_negated_filler = sc.count_negated_filler;
          c.count_lo = sc.count_lo;
          c.count_hi = sc.count_hi;
          for (std::uint64_t y = 0; y < N; ++y) {
            CountPair pr;
            pr.role_var = n.role_inverted ? g.var_of(n.role_node, y, i)
                                          : g.var_of(n.role_node, i, y);
            if (n.filler_node >= 0)
              pr.filler_var = g.var_of(n.filler_node, y);
            else
              pr.filler_const =
                  n.filler_const == FillerConst::Top ? 1 : 0;
            c.pairs.push_back(pr);
            c.parents.push_back(pr.role_var);
            if (pr.filler_var >= 0) c.parents.push_back(pr.filler_var);
          }
          break;
        }
      }
      g.cpts[static_cast<size_t>(gv)] = std::move(c);
    }
  }

  // Liveness carries over class-wise.
  if (!sn.live.empty()) {
    g.live.assign(g.vars.size(), 0);
    for (size_t gv = 0; gv < g.vars.size(); ++gv) {
      const GroundedVariable& v = g.vars[gv];
      int second = -1;
      if (v.j >= 0) {
        second = class_of(static_cast<std::uint64_t>(v.j));
        if (class_of(static_cast<std::uint64_t>(v.i)) == sn.x_class() &&
            second == sn.x_class() && v.i != v.j)
          second = sn.y_class();
      }
      int tv = sn.var_of(v.tnode, class_of(static_cast<std::uint64_t>(v.i)),
                         second);
      g.live[gv] = tv >= 0 && sn.is_live(tv);
    }
  }

  // Evidence and target carry over by individual index (named classes map to
  // themselves).
  for (const auto& [tv, val] : sn.evidence) {
    const ShatVar& sv = sn.vars[static_cast<size_t>(tv)];
    int gv = sv.second == -1
                 ? g.var_of(sv.tnode, static_cast<std::uint64_t>(sv.owner))
                 : g.var_of(sv.tnode, static_cast<std::uint64_t>(sv.owner),
                            static_cast<std::uint64_t>(sv.second));
    g.evidence[gv] = val;
  }
  {
    const ShatVar& sv = sn.vars[static_cast<size_t>(sn.target_var)];
    g.target_var = g.var_of(sv.tnode, static_cast<std::uint64_t>(sv.owner));
  }
  return g;
}

// Template-level d-separation pruning; symmetric instances share their
// reachability status, so class-level Bayes-ball matches the grounded one.
inline ShatteredNetwork prune(const ShatteredNetwork& sn) {
  size_t n = sn.vars.size();
  std::vector<std::vector<int>> children(n);
  for (size_t v = 0; v < n; ++v)
    for (int p : sn.cpts[v].parents)
      children[static_cast<size_t>(p)].push_back(static_cast<int>(v));
  std::vector<char> observed(n, 0);
  for (const auto& [v, val] : sn.evidence) observed[static_cast<size_t>(v)] = 1;
  auto parents = [&](int v) -> const std::vector<int>& {
    return sn.cpts[static_cast<size_t>(v)].parents;
  };
  std::vector<char> keep =
      detail::bayes_ball(n, parents, children, observed, sn.target_var);
  ShatteredNetwork out = sn;
  out.live = keep;
  for (auto it = out.evidence.begin(); it != out.evidence.end();) {
    if (!out.live[static_cast<size_t>(it->first)])
      it = out.evidence.erase(it);
    else
      ++it;
  }
  return out;
}

}  // namespace crdl
