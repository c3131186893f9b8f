#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace crdl;

TEST_CASE("kangaroo fixture parses to the expected shape") {
  Terminology t = testsupport::load_fixture("kangaroo.crl");
  REQUIRE(t.definitions.size() == 4);
  CHECK(t.definitions[0].first == "Human");
  CHECK(t.definitions[1].first == "Beast");
  CHECK(t.definitions[2].first == "Parent");
  CHECK(t.definitions[3].first == "MaternityKangaroo");

  int priors = 0, conditionals = 0;
  for (const auto& a : t.assessments) {
    if (a.kind == AssessKind::ConceptPrior) ++priors;
    if (a.kind == AssessKind::ConceptConditional) ++conditionals;
  }
  CHECK(priors == 2);          // Animal, Rational
  CHECK(conditionals == 2);    // the Kangaroo pair
  CHECK(t.roles == std::set<std::string>{"hasChild"});

  // The conditional pair is over Beast, one row negated.
  bool pos = false, neg = false;
  for (const auto& a : t.assessments)
    if (a.kind == AssessKind::ConceptConditional && a.subject == "Kangaroo" &&
        a.condition == "Beast") {
      if (a.condition_negated) neg = true;
      else {
        pos = true;
        CHECK(a.prob.lo == 0.4);
      }
    }
  CHECK(pos);
  CHECK(neg);
}

TEST_CASE("empty input gives an empty terminology") {
  Terminology t = parse_terminology("");
  CHECK(t.definitions.empty());
  CHECK(t.assessments.empty());
  CHECK(t.roles.empty());
}

TEST_CASE("probability literals outside [0,1] are rejected") {
  CHECK_THROWS_AS(parse_terminology("P(A) = 1.5"), ParseError);
  CHECK_THROWS_AS(parse_terminology("P(A | B) in [0.4, 0.2]"), ParseError);
}

TEST_CASE("syntax errors carry line numbers") {
  try {
    parse_terminology("P(A) = 0.5\nC = and or\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("round-trip: serialize then reparse is structurally equal") {
  for (const char* name : {"tu.crl", "kangaroo.crl", "tu_credal.crl"}) {
    Terminology t = testsupport::load_fixture(name);
    Terminology again = parse_terminology(serialize(t));
    INFO(name);
    CHECK(terminology_equal(t, again));
  }
}

TEST_CASE("composite restriction fillers are normalized through synthetics") {
  Terminology t = parse_terminology(
      "P(A) = 0.5\nP(B) = 0.5\nP(r) = 0.3\nC = exists r.(A and B)\n");
  REQUIRE(t.definitions.size() == 2);  // C and the synthetic filler
  const auto& aux = t.definitions[1];
  CHECK(t.synthetic.count(aux.first) == 1);
  CHECK(aux.second->kind == ExprKind::And);
  // C's filler is now the synthetic name.
  const ExprPtr& c = t.definitions[0].second;
  REQUIRE(c->kind == ExprKind::Exists);
  CHECK(c->filler()->kind == ExprKind::Name);
  CHECK(c->filler()->name == aux.first);

  Terminology again = parse_terminology(serialize(t));
  CHECK(terminology_equal(t, again));
}

TEST_CASE("counted restrictions and inverse roles parse") {
  Terminology t = parse_terminology(
      "P(A) = 0.5\nP(r) = 0.3\n"
      "C = atleast 2 r.A\nD = atmost 1 r-.A\nE = exactly 1 r.A\n");
  const ExprPtr& c = *t.definition_of("C");
  CHECK(c->kind == ExprKind::AtLeast);
  CHECK(c->k == 2);
  const ExprPtr& d = *t.definition_of("D");
  CHECK(d->kind == ExprKind::AtMost);
  CHECK(d->role.inverted);
  CHECK_THROWS_AS(parse_terminology("C = atleast 0 r.A\n"), ParseError);
}

TEST_CASE("nominals are restricted to restriction fillers") {
  Terminology t = parse_terminology(
      "P(r) = 0.3\nC = exists r.{tweety}\n");
  CHECK(t.nominal_individuals.count("tweety") == 1);
  CHECK_THROWS_AS(parse_terminology("C = {tweety}\n"), ParseError);
  CHECK_THROWS_AS(parse_terminology("C = {tweety} and {tweety}\n"), ParseError);
}

TEST_CASE("complex conditioning concepts are normalized to synthetics") {
  Terminology t = parse_terminology(
      "P(A) = 0.5\nP(B) = 0.5\nP(C | A or B) = 0.7\n");
  REQUIRE(t.assessments.size() == 3);
  const Assessment& cond = t.assessments[2];
  CHECK(cond.kind == AssessKind::ConceptConditional);
  CHECK(t.synthetic.count(cond.condition) == 1);
  const ExprPtr* aux = t.definition_of(cond.condition);
  REQUIRE(aux != nullptr);
  CHECK((*aux)->kind == ExprKind::Or);
}

TEST_CASE("role hierarchies classify both names as roles") {
  Terminology t = parse_terminology(
      "P(s) = 0.5\nP(r | s) = 0.8\nP(r | not s) = 0.1\n"
      "C = exists r.top\n");
  CHECK(t.roles.count("r") == 1);
  CHECK(t.roles.count("s") == 1);
  int hier = 0;
  for (const auto& a : t.assessments)
    if (a.kind == AssessKind::RoleHierarchy) ++hier;
  CHECK(hier == 2);
}

TEST_CASE("assertion and abox parsing") {
  Assertion a = parse_assertion("not Kangaroo(tweety)");
  CHECK(!a.positive);
  CHECK(a.predicate == "Kangaroo");
  CHECK(a.a == "tweety");
  Assertion r = parse_assertion("hasChild(a0, a1)");
  CHECK(r.is_role);
  CHECK(r.b == "a1");

  Abox e = parse_abox("not C(a0), B(a2), r(a0,a1)");
  REQUIRE(e.size() == 3);
  CHECK(e[0].predicate == "C");
  CHECK(e[2].is_role);
}

TEST_CASE("domain specs parse") {
  CHECK(parse_domain_spec("5").kind == DomainSpec::Kind::Exact);
  CHECK(parse_domain_spec("5").n == 5);
  CHECK(parse_domain_spec("inf").kind == DomainSpec::Kind::Infinite);
  auto r = parse_domain_spec("2..9");
  CHECK(r.kind == DomainSpec::Kind::Range);
  CHECK(r.lo == 2);
  CHECK(r.hi == 9);
  auto u = parse_domain_spec("le:20");
  CHECK(u.kind == DomainSpec::Kind::Unconstrained);
  CHECK(u.hi == 20);
}
