#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crdl/types.hpp"

namespace crdl {

// ── Concept expressions ──────────────────────────────────────────────────────
// Immutable expression tree.  Restrictions carry a role reference and a single
// filler child; counted restrictions additionally carry k.  Nominals ({a}) are
// expression leaves naming an individual and are only legal directly under a
// restriction (checked during normalization, not here).

enum class ExprKind {
  Top,
  Bottom,
  Name,      // concept name
  Nominal,   // {individual}
  Not,
  And,
  Or,
  Exists,
  Forall,
  AtLeast,   // >= k
  AtMost,    // <= k
  Exactly,   // == k
};

struct RoleRef {
  std::string name;
  bool inverted = false;  // r- denotes the inverse role

  bool operator==(const RoleRef& o) const {
    return name == o.name && inverted == o.inverted;
  }
  std::string to_string() const { return inverted ? name + "-" : name; }
};

class ConceptExpr;
using ExprPtr = std::shared_ptr<const ConceptExpr>;

class ConceptExpr {
 public:
  ExprKind kind;
  std::string name;            // Name: concept; Nominal: individual
  RoleRef role;                // restrictions only
  unsigned k = 0;              // AtLeast/AtMost/Exactly
  std::vector<ExprPtr> kids;   // Not: 1; And/Or: 2; restrictions: 1 (filler)

  static ExprPtr top() { return make(ExprKind::Top); }
  static ExprPtr bottom() { return make(ExprKind::Bottom); }
  static ExprPtr concept_name(std::string n) {
    auto e = make(ExprKind::Name);
    e->name = std::move(n);
    return e;
  }
  static ExprPtr nominal(std::string individual) {
    auto e = make(ExprKind::Nominal);
    e->name = std::move(individual);
    return e;
  }
  static ExprPtr negate(ExprPtr a) {
    auto e = make(ExprKind::Not);
    e->kids = {std::move(a)};
    return e;
  }
  static ExprPtr conj(ExprPtr a, ExprPtr b) {
    auto e = make(ExprKind::And);
    e->kids = {std::move(a), std::move(b)};
    return e;
  }
  static ExprPtr disj(ExprPtr a, ExprPtr b) {
    auto e = make(ExprKind::Or);
    e->kids = {std::move(a), std::move(b)};
    return e;
  }
  static ExprPtr restriction(ExprKind kind, RoleRef r, ExprPtr filler,
                             unsigned k = 0) {
    if (kind == ExprKind::AtLeast && k < 1)
      throw Error("atleast requires k >= 1");
    auto e = make(kind);
    e->role = std::move(r);
    e->k = k;
    e->kids = {std::move(filler)};
    return e;
  }

  bool is_restriction() const {
    switch (kind) {
      case ExprKind::Exists:
      case ExprKind::Forall:
      case ExprKind::AtLeast:
      case ExprKind::AtMost:
      case ExprKind::Exactly:
        return true;
      default:
        return false;
    }
  }

  const ExprPtr& filler() const { return kids.front(); }

 private:
  static std::shared_ptr<ConceptExpr> make(ExprKind k) {
    auto e = std::make_shared<ConceptExpr>();
    e->kind = k;
    return e;
  }
};

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->k != b->k ||
      !(a->role == b->role) || a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!expr_equal(a->kids[i], b->kids[i])) return false;
  return true;
}

// Renders in the same concrete syntax the parser accepts.
inline std::string expr_to_string(const ExprPtr& e) {
  auto paren = [](const ExprPtr& c, bool need) {
    std::string s = expr_to_string(c);
    return need ? "(" + s + ")" : s;
  };
  auto binary_operand = [&](const ExprPtr& c) {
    return paren(c, c->kind == ExprKind::And || c->kind == ExprKind::Or);
  };
  auto filler_operand = [&](const ExprPtr& c) {
    // Fillers bind tighter than and/or; restrictions under restrictions need
    // parens only for readability, the grammar takes a unary operand.
    return paren(c, c->kind == ExprKind::And || c->kind == ExprKind::Or);
  };
  switch (e->kind) {
    case ExprKind::Top:
      return "top";
    case ExprKind::Bottom:
      return "bottom";
    case ExprKind::Name:
      return e->name;
    case ExprKind::Nominal:
      return "{" + e->name + "}";
    case ExprKind::Not:
      return "not " + binary_operand(e->kids[0]);
    case ExprKind::And:
      return binary_operand(e->kids[0]) + " and " + binary_operand(e->kids[1]);
    case ExprKind::Or:
      return binary_operand(e->kids[0]) + " or " + binary_operand(e->kids[1]);
    case ExprKind::Exists:
      return "exists " + e->role.to_string() + "." + filler_operand(e->kids[0]);
    case ExprKind::Forall:
      return "forall " + e->role.to_string() + "." + filler_operand(e->kids[0]);
    case ExprKind::AtLeast:
      return "atleast " + std::to_string(e->k) + " " + e->role.to_string() +
             "." + filler_operand(e->kids[0]);
    case ExprKind::AtMost:
      return "atmost " + std::to_string(e->k) + " " + e->role.to_string() +
             "." + filler_operand(e->kids[0]);
    case ExprKind::Exactly:
      return "exactly " + std::to_string(e->k) + " " + e->role.to_string() +
             "." + filler_operand(e->kids[0]);
  }
  return "?";
}

}  // namespace crdl
