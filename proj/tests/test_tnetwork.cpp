#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace crdl;

namespace {
std::set<std::string> parent_labels(const TNetwork& net, const std::string& label) {
  for (const auto& n : net.nodes)
    if (n.label == label) {
      std::set<std::string> out;
      for (int p : n.parents) out.insert(net.node(p).label);
      return out;
    }
  FAIL("no node labelled " + label);
  return {};
}
}  // namespace

TEST_CASE("t-network for the two-restriction fixture matches the known graph") {
  Terminology t = testsupport::load_fixture("tu.crl");
  TNetwork net = build_tnetwork(t);

  // Nodes: A, B, C, D, r, forall r.A, exists r.D.
  CHECK(net.nodes.size() == 7);
  CHECK(net.concept_like_count() == 6);
  CHECK(net.role_count() == 1);

  CHECK(parent_labels(net, "A").empty());
  CHECK(parent_labels(net, "B") == std::set<std::string>{"A"});
  CHECK(parent_labels(net, "forall r.A") == std::set<std::string>{"A", "r"});
  CHECK(parent_labels(net, "D") == std::set<std::string>{"forall r.A"});
  CHECK(parent_labels(net, "exists r.D") == std::set<std::string>{"D", "r"});
  CHECK(parent_labels(net, "C") == std::set<std::string>{"B", "exists r.D"});

  // B's pair: P(B|A) = 0.45 from the assessment, P(B|not A) = 0 from the
  // inclusion.
  const TNode& b = net.nodes[static_cast<size_t>(net.concept_node("B"))];
  CHECK(b.model == ConceptModel::CondPair);
  CHECK(b.cond_if_true.lo == 0.45);
  CHECK(b.cond_if_true.is_point());
  CHECK(b.cond_if_false.lo == 0.0);
  CHECK(b.cond_if_false.is_point());
}

TEST_CASE("self-use is rejected as a cycle") {
  Terminology t = parse_terminology("P(r) = 0.3\nC = exists r.C\n");
  CHECK_THROWS_AS(build_tnetwork(t), CycleError);

  Terminology t2 = parse_terminology("A = not B\nB = not A\n");
  CHECK_THROWS_AS(build_tnetwork(t2), CycleError);
}

TEST_CASE("priors only gives an edgeless graph") {
  Terminology t = parse_terminology("P(A) = 0.1\nP(B) = 0.2\n");
  TNetwork net = build_tnetwork(t);
  CHECK(net.nodes.size() == 2);
  for (const auto& n : net.nodes) CHECK(n.parents.empty());
}

TEST_CASE("conflicting specifications are hard errors") {
  Terminology t = parse_terminology("P(A) = 0.5\nA = B\nP(B) = 0.2\n");
  Query q = testsupport::make_query("A(a0)", "", 1);
  ValidationReport rep = validate(t, q);
  CHECK(!rep.passed);
  CHECK_THROWS_AS(build_tnetwork(t), ValidationError);
}

TEST_CASE("validation profiles") {
  SECTION("tu with Exact(9) is Bayesian") {
    Terminology t = testsupport::load_fixture("tu.crl");
    ValidationReport rep = validate(t, testsupport::make_query("C(a0)", "", 9));
    CHECK(rep.passed);
    CHECK(rep.bayesian());
    CHECK(rep.profile() == "bayesian");
  }
  SECTION("dropping P(B|A) downgrades to credal") {
    Terminology t = testsupport::load_fixture("tu_credal.crl");
    ValidationReport rep = validate(t, testsupport::make_query("C(a0)", "", 9));
    CHECK(rep.passed);
    CHECK(!rep.uniqueness);
    CHECK(rep.profile() == "credal");
  }
  SECTION("interval assessments downgrade to credal") {
    Terminology t = parse_terminology("P(A) in [0.2, 0.4]\n");
    ValidationReport rep = validate(t, testsupport::make_query("A(a0)", "", 2));
    CHECK(rep.passed);
    CHECK(!rep.bayesian());
  }
  SECTION("non-exact domain specs downgrade to credal") {
    Terminology t = testsupport::load_fixture("tu.crl");
    Query q = testsupport::make_query("C(a0)", "", 1);
    q.domain = DomainSpec::unconstrained(20);
    ValidationReport rep = validate(t, q);
    CHECK(rep.passed);
    CHECK(!rep.confined_domain);
    CHECK(rep.profile() == "credal");
  }
  SECTION("kangaroo is Bayesian") {
    Terminology t = testsupport::load_fixture("kangaroo.crl");
    ValidationReport rep =
        validate(t, testsupport::make_query("Parent(a0)", "", 5));
    CHECK(rep.passed);
    CHECK(rep.bayesian());
  }
}

TEST_CASE("validation catches hard problems") {
  SECTION("domain smaller than the named individuals") {
    Terminology t = testsupport::load_fixture("tu.crl");
    ValidationReport rep =
        validate(t, testsupport::make_query("C(a0)", "not C(a1), B(a2)", 2));
    CHECK(!rep.passed);
  }
  SECTION("unknown evidence symbols") {
    Terminology t = testsupport::load_fixture("tu.crl");
    ValidationReport rep =
        validate(t, testsupport::make_query("C(a0)", "Zebra(a1)", 5));
    CHECK(!rep.passed);
  }
  SECTION("duplicate assessments") {
    Terminology t = parse_terminology("P(A) = 0.5\nP(A) = 0.6\n");
    ValidationReport rep = validate(t, testsupport::make_query("A(a0)", "", 1));
    CHECK(!rep.passed);
  }
  SECTION("assessment over an otherwise unknown concept is fine") {
    // The assessment itself declares the concept.
    Terminology t = parse_terminology("P(A) = 0.5\n");
    ValidationReport rep = validate(t, testsupport::make_query("A(a0)", "", 1));
    CHECK(rep.passed);
  }
}

TEST_CASE("every assessed symbol must resolve") {
  // Conditional over a concept that exists nowhere else is reported (the
  // condition gets a vacuous model, downgrading the profile, not a crash).
  Terminology t = parse_terminology("P(A | Ghost) = 0.5\nP(A | not Ghost) = 0.1\n");
  ValidationReport rep = validate(t, testsupport::make_query("A(a0)", "", 1));
  CHECK(rep.passed);        // Ghost becomes an unspecified concept
  CHECK(!rep.uniqueness);   // ... which violates uniqueness
}

TEST_CASE("topological order puts parents first") {
  Terminology t = testsupport::load_fixture("kangaroo.crl");
  TNetwork net = build_tnetwork(t);
  std::vector<int> pos(net.nodes.size());
  for (size_t k = 0; k < net.topo_order.size(); ++k)
    pos[static_cast<size_t>(net.topo_order[k])] = static_cast<int>(k);
  for (size_t v = 0; v < net.nodes.size(); ++v)
    for (int p : net.nodes[v].parents) CHECK(pos[static_cast<size_t>(p)] < pos[v]);
}
