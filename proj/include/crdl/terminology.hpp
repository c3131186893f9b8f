#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crdl/expr.hpp"
#include "crdl/types.hpp"

namespace crdl {

// ── Probabilistic assessments ────────────────────────────────────────────────
// P(C) in [lo,hi]           -> ConceptPrior
// P(C | D) / P(C | not D)   -> ConceptConditional (one entry per row)
// P(r)                      -> RolePrior
// P(r | s) / P(r | not s)   -> RoleHierarchy (one entry per row)

enum class AssessKind { ConceptPrior, ConceptConditional, RolePrior, RoleHierarchy };

struct Assessment {
  AssessKind kind;
  std::string subject;
  std::string condition;        // empty for priors
  bool condition_negated = false;
  Interval prob;
  int line = 0;                 // source line, for diagnostics
};

struct Inclusion {
  std::string lhs;
  ExprPtr rhs;
  int line = 0;
};

struct Terminology {
  // Definitions in file order; only concept names on left-hand sides.
  std::vector<std::pair<std::string, ExprPtr>> definitions;
  std::vector<Inclusion> inclusions;
  std::vector<Assessment> assessments;
  std::set<std::string> roles;            // names used in role position
  std::set<std::string> synthetic;        // auto-introduced auxiliary concepts
  std::set<std::string> nominal_individuals;

  const ExprPtr* definition_of(const std::string& name) const {
    for (const auto& [n, e] : definitions)
      if (n == name) return &e;
    return nullptr;
  }

  bool has_inverse_roles() const {
    bool found = false;
    auto walk = [&](const ExprPtr& e, auto&& self) -> void {
      if (e->is_restriction() && e->role.inverted) found = true;
      for (const auto& c : e->kids) self(c, self);
    };
    for (const auto& [n, e] : definitions) walk(e, walk);
    for (const auto& inc : inclusions) walk(inc.rhs, walk);
    return found;
  }

  // All concept names mentioned anywhere (definition sides, assessments).
  std::set<std::string> concept_names() const {
    std::set<std::string> out;
    auto walk = [&](const ExprPtr& e, auto&& self) -> void {
      if (e->kind == ExprKind::Name) out.insert(e->name);
      for (const auto& c : e->kids) self(c, self);
    };
    for (const auto& [n, e] : definitions) {
      out.insert(n);
      walk(e, walk);
    }
    for (const auto& inc : inclusions) {
      out.insert(inc.lhs);
      walk(inc.rhs, walk);
    }
    for (const auto& a : assessments) {
      if (a.kind == AssessKind::ConceptPrior ||
          a.kind == AssessKind::ConceptConditional)
        out.insert(a.subject);
      if (a.kind == AssessKind::ConceptConditional && !a.condition.empty())
        out.insert(a.condition);
    }
    return out;
  }
};

// ── Assertions, Aboxes, queries ──────────────────────────────────────────────

struct Assertion {
  bool is_role = false;
  std::string predicate;    // concept or role name
  std::string a;            // first individual
  std::string b;            // second individual (roles only)
  bool positive = true;

  std::string to_string() const {
    std::string s = predicate + "(" + a + (is_role ? "," + b : "") + ")";
    return positive ? s : "not " + s;
  }
  bool operator==(const Assertion& o) const {
    return is_role == o.is_role && predicate == o.predicate && a == o.a &&
           b == o.b && positive == o.positive;
  }
};

using Abox = std::vector<Assertion>;

struct DomainSpec {
  enum class Kind { Exact, Infinite, Range, Unconstrained };
  Kind kind = Kind::Exact;
  std::uint64_t n = 1;       // Exact
  std::uint64_t lo = 1;      // Range
  std::uint64_t hi = 1;      // Range / Unconstrained max

  static DomainSpec exact(std::uint64_t n) { return {Kind::Exact, n, 0, 0}; }
  static DomainSpec infinite() { return {Kind::Infinite, 0, 0, 0}; }
  static DomainSpec range(std::uint64_t lo, std::uint64_t hi) {
    return {Kind::Range, 0, lo, hi};
  }
  static DomainSpec unconstrained(std::uint64_t max) {
    return {Kind::Unconstrained, 0, 0, max};
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::Exact: return std::to_string(n);
      case Kind::Infinite: return "inf";
      case Kind::Range: return std::to_string(lo) + ".." + std::to_string(hi);
      case Kind::Unconstrained: return "le:" + std::to_string(hi);
    }
    return "?";
  }
};

struct Query {
  Assertion target;          // positive concept assertion
  Abox evidence;
  DomainSpec domain;

  // Distinct named individuals in target, evidence and nominals, in first-use
  // order.  This ordering fixes the individual indices used by grounding.
  std::vector<std::string> named_individuals(const Terminology& t) const {
    std::vector<std::string> out;
    auto add = [&](const std::string& name) {
      if (name.empty()) return;
      for (const auto& n : out)
        if (n == name) return;
      out.push_back(name);
    };
    add(target.a);
    for (const auto& as : evidence) {
      add(as.a);
      add(as.b);
    }
    for (const auto& n : t.nominal_individuals) add(n);
    return out;
  }
};

}  // namespace crdl
