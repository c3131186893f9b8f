#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crdl/terminology.hpp"

namespace crdl {

// ── t-network ────────────────────────────────────────────────────────────────
// Directed acyclic graph over concept names, restriction occurrences, and role
// names.  Each concept node carries its resolved local model (definition,
// prior, or conditional pair); restriction nodes carry role/filler/k; role
// nodes carry a prior or a hierarchy row pair.  Definition bodies are compiled
// into DefExpr trees whose leaves index into the node's parent list.

enum class TNodeKind { Concept, Restriction, Role };

enum class RestrKind { Forall, Exists, AtLeast, AtMost, Exactly };

// Constant fillers need no t-network parent.
enum class FillerConst { None, Top, Bottom };

// Boolean body of a definition CPT; Ref leaves index the parent list.
struct DefExpr {
  enum Kind { Const, Ref, Not, And, Or } kind;
  bool value = false;  // Const
  int ref = -1;        // Ref: index into parents
  std::vector<DefExpr> kids;

  bool eval(const std::vector<int>& parent_vals) const {
    switch (kind) {
      case Const: return value;
      case Ref: return parent_vals[static_cast<size_t>(ref)] != 0;
      case Not: return !kids[0].eval(parent_vals);
      case And: return kids[0].eval(parent_vals) && kids[1].eval(parent_vals);
      case Or: return kids[0].eval(parent_vals) || kids[1].eval(parent_vals);
    }
    return false;
  }
};

enum class ConceptModel {
  Defined,       // C == expr
  Prior,         // P(C) in [lo,hi]
  CondPair,      // P(C|C') and P(C|not C')
  Nominal,       // indicator concept for {a}
  Unspecified,   // no local model; vacuous prior (credal profile)
};

struct TNode {
  TNodeKind kind;
  std::string label;            // concept/role name, or a rendered restriction
  std::vector<int> parents;     // node ids

  // Concept payload.
  ConceptModel model = ConceptModel::Unspecified;
  DefExpr def;                  // Defined
  Interval prior = Interval::vacuous();        // Prior / role prior
  Interval cond_if_true = Interval::vacuous(); // CondPair / hierarchy rows
  Interval cond_if_false = Interval::vacuous();
  std::string nominal_individual;              // Nominal

  // Restriction payload.
  RestrKind rkind = RestrKind::Exists;
  unsigned k = 0;
  int role_node = -1;
  int filler_node = -1;          // -1 when the filler is a constant
  FillerConst filler_const = FillerConst::None;
  bool role_inverted = false;

  // Role payload.
  bool role_has_hierarchy = false;  // parents[0] is the super-role when set
};

struct TNetwork {
  std::vector<TNode> nodes;
  std::map<std::string, int> concept_index;  // concept name -> node
  std::map<std::string, int> role_index;     // role name -> node
  std::vector<int> topo_order;               // parents before children
  bool has_inverse_roles = false;

  const TNode& node(int id) const { return nodes[static_cast<size_t>(id)]; }
  int concept_node(const std::string& name) const {
    auto it = concept_index.find(name);
    return it == concept_index.end() ? -1 : it->second;
  }
  int role_node(const std::string& name) const {
    auto it = role_index.find(name);
    return it == role_index.end() ? -1 : it->second;
  }
  // Concept-or-restriction node count (the |C| of the grounding size formula).
  size_t concept_like_count() const {
    size_t n = 0;
    for (const auto& nd : nodes)
      if (nd.kind != TNodeKind::Role) ++n;
    return n;
  }
  size_t role_count() const { return nodes.size() - concept_like_count(); }
};

namespace detail {

// Resolved per-concept local model prior to node creation.
struct ConceptSpecDraft {
  ConceptModel model = ConceptModel::Unspecified;
  ExprPtr definition;
  Interval prior = Interval::vacuous();
  std::string cond;
  Interval if_true = Interval::vacuous();
  Interval if_false = Interval::vacuous();
  bool has_if_true = false;
  bool has_if_false = false;
  bool from_inclusion = false;
  std::vector<std::string> conflicts;
};

struct RoleSpecDraft {
  bool has_prior = false;
  Interval prior = Interval::vacuous();
  std::string super;
  Interval if_true = Interval::vacuous();
  Interval if_false = Interval::vacuous();
  bool has_if_true = false;
  bool has_if_false = false;
  std::vector<std::string> conflicts;
};

struct ResolvedSpecs {
  std::map<std::string, ConceptSpecDraft> concepts;
  std::map<std::string, RoleSpecDraft> roles;
  std::vector<std::string> hard_violations;
  std::vector<std::string> uniqueness_violations;
};

// Applies the uniqueness rules: a concept has exactly one of {definition,
// prior, conditional pair}; an inclusion C < D contributes P(C|not D) = 0 and
// leaves P(C|D) to an accompanying assessment (vacuous when absent).
inline ResolvedSpecs resolve_specs(const Terminology& t) {
  ResolvedSpecs out;
  for (const auto& name : t.concept_names()) out.concepts[name];
  for (const auto& r : t.roles) out.roles[r];

  for (const auto& [name, e] : t.definitions) {
    auto& d = out.concepts[name];
    if (d.model == ConceptModel::Defined)
      d.conflicts.push_back("duplicate definition for " + name);
    else if (d.model != ConceptModel::Unspecified)
      d.conflicts.push_back(name + " has both a definition and assessments");
    d.model = ConceptModel::Defined;
    d.definition = e;
  }

  for (const auto& inc : t.inclusions) {
    auto& d = out.concepts[inc.lhs];
    if (d.model == ConceptModel::Defined) {
      d.conflicts.push_back(inc.lhs + " has both a definition and an inclusion");
      continue;
    }
    if (d.from_inclusion) {
      d.conflicts.push_back("multiple inclusions for " + inc.lhs);
      continue;
    }
    if (d.model == ConceptModel::Prior) {
      d.conflicts.push_back(inc.lhs + " has both a prior and an inclusion");
      continue;
    }
    // Inclusion bodies must be concept names here; the parser normalizes
    // complex right-hand sides through synthetic definitions.
    std::string cond;
    if (inc.rhs->kind == ExprKind::Name) cond = inc.rhs->name;
    if (cond.empty()) {
      d.conflicts.push_back("inclusion right-hand side of " + inc.lhs +
                            " must be a concept name");
      continue;
    }
    if (d.model == ConceptModel::CondPair && d.cond != cond) {
      d.conflicts.push_back(inc.lhs + " conditioned on two different concepts");
      continue;
    }
    d.model = ConceptModel::CondPair;
    d.cond = cond;
    d.from_inclusion = true;
    d.if_false = Interval::point(0.0);
    d.has_if_false = true;
  }

  for (const auto& a : t.assessments) {
    switch (a.kind) {
      case AssessKind::ConceptPrior: {
        auto& d = out.concepts[a.subject];
        if (d.model != ConceptModel::Unspecified)
          d.conflicts.push_back(a.subject + " has a prior and another model");
        d.model = ConceptModel::Prior;
        d.prior = a.prob;
        break;
      }
      case AssessKind::ConceptConditional: {
        auto& d = out.concepts[a.subject];
        if (d.model == ConceptModel::Defined || d.model == ConceptModel::Prior) {
          d.conflicts.push_back(a.subject +
                                " has a conditional and another model");
          break;
        }
        if (d.model == ConceptModel::CondPair && d.cond != a.condition) {
          d.conflicts.push_back(a.subject +
                                " conditioned on two different concepts");
          break;
        }
        d.model = ConceptModel::CondPair;
        d.cond = a.condition;
        auto& slot = a.condition_negated ? d.if_false : d.if_true;
        auto& flag = a.condition_negated ? d.has_if_false : d.has_if_true;
        if (flag) {
          d.conflicts.push_back("duplicate conditional assessment for " +
                                a.subject);
          break;
        }
        slot = a.prob;
        flag = true;
        break;
      }
      case AssessKind::RolePrior: {
        auto& d = out.roles[a.subject];
        if (d.has_prior || d.has_if_true || d.has_if_false)
          d.conflicts.push_back("duplicate assessment for role " + a.subject);
        d.has_prior = true;
        d.prior = a.prob;
        break;
      }
      case AssessKind::RoleHierarchy: {
        auto& d = out.roles[a.subject];
        if (d.has_prior) {
          d.conflicts.push_back("role " + a.subject +
                                " has both a prior and a hierarchy");
          break;
        }
        if (!d.super.empty() && d.super != a.condition) {
          d.conflicts.push_back("role " + a.subject +
                                " conditioned on two different roles");
          break;
        }
        d.super = a.condition;
        auto& slot = a.condition_negated ? d.if_false : d.if_true;
        auto& flag = a.condition_negated ? d.has_if_false : d.has_if_true;
        if (flag)
          d.conflicts.push_back("duplicate hierarchy row for " + a.subject);
        slot = a.prob;
        flag = true;
        break;
      }
    }
  }

  // Complex conditioning expressions were normalized into synthetic concepts;
  // they fall outside the uniqueness assumption's name-only conditionals.
  for (const auto& a : t.assessments)
    if (a.kind == AssessKind::ConceptConditional && t.synthetic.count(a.condition))
      out.uniqueness_violations.push_back(
          "conditional for " + a.subject + " uses a complex conditioning concept");

  for (auto& [name, d] : out.concepts) {
    for (const auto& c : d.conflicts) out.hard_violations.push_back(c);
    if (d.model == ConceptModel::Unspecified)
      out.uniqueness_violations.push_back("concept " + name +
                                          " has no local model");
    if (d.model == ConceptModel::CondPair) {
      if (!d.has_if_true)
        out.uniqueness_violations.push_back("P(" + name + "|" + d.cond +
                                            ") is unconstrained");
      if (!d.has_if_false)
        out.uniqueness_violations.push_back("P(" + name + "|not " + d.cond +
                                            ") is unconstrained");
    }
  }
  for (auto& [name, d] : out.roles) {
    for (const auto& c : d.conflicts) out.hard_violations.push_back(c);
    if (!d.has_prior && d.super.empty())
      out.uniqueness_violations.push_back("role " + name + " has no assessment");
    if (!d.super.empty() && (!d.has_if_true || !d.has_if_false))
      out.uniqueness_violations.push_back("role " + name +
                                          " has an incomplete hierarchy pair");
  }
  std::sort(out.hard_violations.begin(), out.hard_violations.end());
  std::sort(out.uniqueness_violations.begin(), out.uniqueness_violations.end());
  return out;
}

}  // namespace detail

// ── build_tnetwork ───────────────────────────────────────────────────────────

inline TNetwork build_tnetwork(const Terminology& t) {
  detail::ResolvedSpecs specs = detail::resolve_specs(t);
  if (!specs.hard_violations.empty())
    throw ValidationError("conflicting specification: " +
                          specs.hard_violations.front());

  TNetwork net;
  auto add_node = [&](TNode n) {
    net.nodes.push_back(std::move(n));
    return static_cast<int>(net.nodes.size()) - 1;
  };

  // Concept and role name nodes first; restriction occurrences are appended
  // while compiling definition bodies.
  for (const auto& [name, d] : specs.concepts) {
    TNode n;
    n.kind = TNodeKind::Concept;
    n.label = name;
    net.concept_index[name] = add_node(std::move(n));
  }
  for (const auto& [name, d] : specs.roles) {
    TNode n;
    n.kind = TNodeKind::Role;
    n.label = name;
    n.prior = d.has_prior ? d.prior : Interval::vacuous();
    if (!d.super.empty()) n.role_has_hierarchy = true;
    n.cond_if_true = d.if_true;
    n.cond_if_false = d.if_false;
    net.role_index[name] = add_node(std::move(n));
  }
  for (const auto& [name, d] : specs.roles) {
    if (d.super.empty()) continue;
    auto it = net.role_index.find(d.super);
    if (it == net.role_index.end())
      throw ValidationError("unknown super-role " + d.super);
    net.nodes[static_cast<size_t>(net.role_index[name])].parents = {it->second};
  }

  // Compiles a definition body: creates restriction occurrence nodes, returns
  // a DefExpr over the owner's parent list.
  auto compile = [&](int owner, const ExprPtr& e, auto&& self) -> DefExpr {
    auto parent_ref = [&](int node_id) {
      auto& parents = net.nodes[static_cast<size_t>(owner)].parents;
      for (size_t i = 0; i < parents.size(); ++i)
        if (parents[i] == node_id) return static_cast<int>(i);
      parents.push_back(node_id);
      return static_cast<int>(parents.size()) - 1;
    };
    DefExpr d;
    switch (e->kind) {
      case ExprKind::Top:
        d.kind = DefExpr::Const;
        d.value = true;
        return d;
      case ExprKind::Bottom:
        d.kind = DefExpr::Const;
        d.value = false;
        return d;
      case ExprKind::Name: {
        int id = net.concept_node(e->name);
        if (id < 0) throw ValidationError("unknown concept " + e->name);
        d.kind = DefExpr::Ref;
        d.ref = parent_ref(id);
        return d;
      }
      case ExprKind::Not:
        d.kind = DefExpr::Not;
        d.kids = {self(owner, e->kids[0], self)};
        return d;
      case ExprKind::And:
      case ExprKind::Or:
        d.kind = e->kind == ExprKind::And ? DefExpr::And : DefExpr::Or;
        d.kids = {self(owner, e->kids[0], self), self(owner, e->kids[1], self)};
        return d;
      case ExprKind::Nominal:
        throw ValidationError("nominal outside restriction");
      default: {  // restriction occurrence
        TNode rn;
        rn.kind = TNodeKind::Restriction;
        switch (e->kind) {
          case ExprKind::Forall: rn.rkind = RestrKind::Forall; break;
          case ExprKind::Exists: rn.rkind = RestrKind::Exists; break;
          case ExprKind::AtLeast: rn.rkind = RestrKind::AtLeast; break;
          case ExprKind::AtMost: rn.rkind = RestrKind::AtMost; break;
          default: rn.rkind = RestrKind::Exactly; break;
        }
        rn.k = e->k;
        rn.label = expr_to_string(e);
        int role_id = net.role_node(e->role.name);
        if (role_id < 0)
          throw ValidationError("unknown role " + e->role.name);
        rn.role_node = role_id;
        rn.role_inverted = e->role.inverted;
        if (e->role.inverted) net.has_inverse_roles = true;
        rn.parents.push_back(role_id);
        const ExprPtr& filler = e->filler();
        if (filler->kind == ExprKind::Top) {
          rn.filler_const = FillerConst::Top;
        } else if (filler->kind == ExprKind::Bottom) {
          rn.filler_const = FillerConst::Bottom;
        } else if (filler->kind == ExprKind::Nominal) {
          // Nominal fillers get an indicator concept node "{a}".
          std::string label = "{" + filler->name + "}";
          int id = net.concept_node(label);
          if (id < 0) {
            TNode nom;
            nom.kind = TNodeKind::Concept;
            nom.label = label;
            nom.model = ConceptModel::Nominal;
            nom.nominal_individual = filler->name;
            id = add_node(std::move(nom));
            net.concept_index[label] = id;
          }
          rn.filler_node = id;
          rn.parents.push_back(id);
        } else {
          int id = net.concept_node(filler->name);
          if (id < 0) throw ValidationError("unknown concept " + filler->name);
          rn.filler_node = id;
          rn.parents.push_back(id);
        }
        int rid = add_node(std::move(rn));
        d.kind = DefExpr::Ref;
        d.ref = parent_ref(rid);
        return d;
      }
    }
  };

  for (const auto& [name, d] : specs.concepts) {
    int id = net.concept_index[name];
    // compile() may append restriction nodes and reallocate; re-index after.
    net.nodes[static_cast<size_t>(id)].model = d.model;
    switch (d.model) {
      case ConceptModel::Defined: {
        DefExpr def = compile(id, d.definition, compile);
        net.nodes[static_cast<size_t>(id)].def = std::move(def);
        break;
      }
      case ConceptModel::Prior:
        net.nodes[static_cast<size_t>(id)].prior = d.prior;
        break;
      case ConceptModel::CondPair: {
        int cid = net.concept_node(d.cond);
        if (cid < 0) throw ValidationError("unknown concept " + d.cond);
        net.nodes[static_cast<size_t>(id)].parents = {cid};
        net.nodes[static_cast<size_t>(id)].cond_if_true =
            d.has_if_true ? d.if_true : Interval::vacuous();
        net.nodes[static_cast<size_t>(id)].cond_if_false =
            d.has_if_false ? d.if_false : Interval::vacuous();
        break;
      }
      case ConceptModel::Unspecified:
        net.nodes[static_cast<size_t>(id)].prior = Interval::vacuous();
        break;
      case ConceptModel::Nominal:
        break;
    }
  }

  // Topological order; a cycle is reported with the offending node labels.
  {
    size_t count = net.nodes.size();
    std::vector<int> indeg(count, 0);
    std::vector<std::vector<int>> children(count);
    for (size_t i = 0; i < count; ++i)
      for (int p : net.nodes[i].parents) {
        ++indeg[i];
        children[static_cast<size_t>(p)].push_back(static_cast<int>(i));
      }
    std::vector<int> order;
    std::vector<int> stack;
    for (size_t i = 0; i < count; ++i)
      if (indeg[i] == 0) stack.push_back(static_cast<int>(i));
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (int c : children[static_cast<size_t>(v)])
        if (--indeg[static_cast<size_t>(c)] == 0) stack.push_back(c);
    }
    if (order.size() != count) {
      std::vector<std::string> cycle;
      for (size_t i = 0; i < count; ++i)
        if (indeg[i] > 0) cycle.push_back(net.nodes[i].label);
      std::string msg = "terminology is cyclic:";
      for (const auto& s : cycle) msg += " " + s;
      throw CycleError(msg, cycle);
    }
    net.topo_order = std::move(order);
  }
  return net;
}

}  // namespace crdl
