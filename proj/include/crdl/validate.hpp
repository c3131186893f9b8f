#pragma once

#include <string>
#include <vector>

#include "crdl/tnetwork.hpp"

namespace crdl {

// ── Validation ───────────────────────────────────────────────────────────────
// Hard violations (conflicting specifications, unknown symbols, cycles) fail
// validation outright.  Uniqueness failures, non-degenerate intervals, and
// non-exact domain specs merely downgrade the assumption profile: such
// queries route to the credal engine instead of the point-valued ones.

struct ValidationReport {
  bool passed = false;
  std::vector<std::pair<std::string, std::string>> violations;  // code, detail

  bool unique_names = true;        // enforced by construction
  bool confined_domain = false;    // domain spec is Exact
  bool uniqueness = false;         // point-valued, uniquely specified models

  bool bayesian() const { return unique_names && confined_domain && uniqueness; }
  std::string profile() const { return bayesian() ? "bayesian" : "credal"; }
};

inline ValidationReport validate(const Terminology& t, const Query& q) {
  ValidationReport rep;
  detail::ResolvedSpecs specs = detail::resolve_specs(t);

  for (const auto& v : specs.hard_violations)
    rep.violations.emplace_back("conflict", v);

  // Cycles and unknown symbols surface while building the t-network.
  try {
    build_tnetwork(t);
  } catch (const CycleError& e) {
    rep.violations.emplace_back("cycle", e.what());
  } catch (const ValidationError& e) {
    rep.violations.emplace_back("symbol", e.what());
  }

  // Assessment subjects/conditions must name declared concepts or roles.
  {
    auto concepts = t.concept_names();
    for (const auto& a : t.assessments) {
      bool role = a.kind == AssessKind::RolePrior ||
                  a.kind == AssessKind::RoleHierarchy;
      if (!role && !concepts.count(a.subject))
        rep.violations.emplace_back("symbol",
                                    "assessment over unknown concept " + a.subject);
      if (a.kind == AssessKind::ConceptConditional && !concepts.count(a.condition))
        rep.violations.emplace_back(
            "symbol", "assessment conditioned on unknown concept " + a.condition);
    }
  }

  rep.uniqueness = specs.uniqueness_violations.empty();
  for (const auto& v : specs.uniqueness_violations)
    rep.violations.emplace_back("uniqueness", v);

  // Interval-valued assessments break uniqueness of the joint.
  for (const auto& a : t.assessments)
    if (!a.prob.is_point()) {
      rep.uniqueness = false;
      rep.violations.emplace_back("interval",
                                  "interval assessment for " + a.subject);
    }

  rep.confined_domain = q.domain.kind == DomainSpec::Kind::Exact;
  if (!rep.confined_domain)
    rep.violations.emplace_back("domain",
                                "domain spec " + q.domain.to_string() +
                                    " is not a fixed finite size");

  // Query-side checks.
  auto named = q.named_individuals(t);
  if (q.domain.kind == DomainSpec::Kind::Exact && q.domain.n < named.size())
    rep.violations.emplace_back(
        "domain", "domain size " + std::to_string(q.domain.n) +
                      " is smaller than the " + std::to_string(named.size()) +
                      " named individuals");
  for (const auto& ind : t.nominal_individuals) {
    bool found = false;
    for (const auto& n : named) found = found || n == ind;
    if (!found)
      rep.violations.emplace_back("nominal", "nominal individual " + ind +
                                                 " missing from named set");
  }
  {
    auto concepts = t.concept_names();
    if (q.target.is_role)
      rep.violations.emplace_back("query", "query target must be a concept assertion");
    else if (!concepts.count(q.target.predicate))
      rep.violations.emplace_back("query",
                                  "unknown query concept " + q.target.predicate);
    for (const auto& as : q.evidence) {
      if (as.is_role) {
        if (!t.roles.count(as.predicate))
          rep.violations.emplace_back("symbol",
                                      "unknown role in evidence: " + as.predicate);
      } else if (!concepts.count(as.predicate)) {
        rep.violations.emplace_back("symbol",
                                    "unknown concept in evidence: " + as.predicate);
      }
    }
  }

  // Uniqueness/interval/domain-shape findings downgrade the profile; anything
  // else is a hard failure.
  bool hard = false;
  for (const auto& [code, detail] : rep.violations) {
    if (code == "uniqueness" || code == "interval") continue;
    if (code == "domain" && q.domain.kind != DomainSpec::Kind::Exact) continue;
    hard = true;
  }
  rep.passed = !hard;
  return rep;
}

}  // namespace crdl
