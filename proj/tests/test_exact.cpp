#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace crdl;
using testsupport::load_fixture;
using testsupport::make_query;

TEST_CASE("published exact values, small N by direct enumeration") {
  SECTION("P(C(a0)) at N=1 is 0.5535") {
    GroundedNetwork g = ground(load_fixture("tu.crl"), make_query("C(a0)", "", 1));
    CHECK_THAT(enumerate_query(g), Catch::Matchers::WithinAbs(0.5535, 5e-5));
  }
  SECTION("P(Parent(a0)) at N=1 is 0.1620") {
    GroundedNetwork g =
        ground(load_fixture("kangaroo.crl"), make_query("Parent(a0)", "", 1));
    CHECK_THAT(enumerate_query(g), Catch::Matchers::WithinAbs(0.1620, 5e-5));
  }
  SECTION("conditioning on the target itself gives 1 exactly") {
    GroundedNetwork g =
        ground(load_fixture("tu.crl"), make_query("A(a0)", "A(a0)", 2));
    CHECK(enumerate_query(g) == 1.0);
    CHECK(ve_query(g) == 1.0);
  }
  SECTION("trivial prior readout") {
    for (std::uint64_t n : {1, 2, 5}) {
      GroundedNetwork g =
          ground(load_fixture("tu.crl"), make_query("A(a0)", "", n));
      GroundedNetwork pruned = prune(g);
      CHECK(std::abs(ve_query(pruned) - 0.9) < 1e-12);
    }
  }
}

TEST_CASE("variable elimination reproduces the published tables") {
  SECTION("example terminology") {
    // The N=5 value is frozen from two agreeing independent routes (direct
    // enumeration and an analytic decomposition conditioning on the A-vector);
    // the reference table's 0.8445 for that cell is a one-digit misprint.
    const std::pair<std::uint64_t, double> expect[] = {
        {1, 0.5535}, {5, 0.848538}, {9, 0.9210}};
    for (auto [n, want] : expect) {
      GroundedNetwork g =
          prune(ground(load_fixture("tu.crl"), make_query("C(a0)", "", n)));
      CHECK_THAT(ve_query(g), Catch::Matchers::WithinAbs(want, 5e-5));
    }
  }
  SECTION("kangaroo") {
    const std::pair<std::uint64_t, double> expect[] = {
        {1, 0.1620}, {5, 0.3536}, {9, 0.4481}};
    for (auto [n, want] : expect) {
      GroundedNetwork g = prune(
          ground(load_fixture("kangaroo.crl"), make_query("Parent(a0)", "", n)));
      CHECK_THAT(ve_query(g), Catch::Matchers::WithinAbs(want, 5e-5));
    }
  }
}

TEST_CASE("ve agrees with enumeration wherever both run") {
  struct Case {
    const char* fixture;
    const char* target;
    const char* evidence;
    std::uint64_t n;
  } cases[] = {
      {"tu.crl", "C(a0)", "", 1},
      {"tu.crl", "C(a0)", "", 2},
      {"tu.crl", "C(a0)", "not D(a1)", 2},
      {"tu.crl", "D(a0)", "B(a0)", 2},
      {"tu.crl", "A(a0)", "C(a0)", 2},
      {"kangaroo.crl", "Parent(a0)", "", 2},
      {"kangaroo.crl", "MaternityKangaroo(a0)", "Kangaroo(a1)", 2},
  };
  for (const auto& c : cases) {
    INFO(c.fixture << " " << c.target << " | " << c.evidence << " N=" << c.n);
    GroundedNetwork g =
        ground(load_fixture(c.fixture), make_query(c.target, c.evidence, c.n));
    double brute = enumerate_query(g);
    double ve = ve_query(g);
    CHECK(std::abs(brute - ve) < 1e-12);
  }
}

TEST_CASE("normalization against the brute joint") {
  GroundedNetwork g = ground(load_fixture("tu.crl"),
                             make_query("C(a0)", "not D(a1)", 2));
  double p = ve_query(g);
  // Brute complementary conditional.
  double num = 0.0, den = 0.0;
  size_t n = g.vars.size();
  std::vector<int> vals(n, 0);
  for (;;) {
    double w = 1.0;
    std::vector<int> pv;
    for (size_t v = 0; v < n && w > 0; ++v) {
      const Cpt& c = g.cpts[v];
      pv.clear();
      for (int par : c.parents) pv.push_back(vals[static_cast<size_t>(par)]);
      double pt = c.prob_true(pv);
      w *= vals[v] ? pt : 1.0 - pt;
    }
    bool ok = true;
    for (const auto& [v, val] : g.evidence)
      ok = ok && vals[static_cast<size_t>(v)] == val;
    if (ok && w > 0) {
      den += w;
      if (vals[static_cast<size_t>(g.target_var)] == 1) num += w;
    }
    size_t d = n;
    bool done = true;
    while (d-- > 0) {
      if (++vals[d] < 2) { done = false; break; }
      vals[d] = 0;
    }
    if (done) break;
  }
  CHECK(std::abs(p - num / den) < 1e-12);
  CHECK(std::abs(p + (den - num) / den - 1.0) < 1e-12);
}

TEST_CASE("prune invariance") {
  struct Case {
    const char* fixture;
    const char* target;
    const char* evidence;
    std::uint64_t n;
  } cases[] = {
      {"tu.crl", "C(a0)", "", 2},
      {"tu.crl", "D(a0)", "B(a0)", 2},
      {"kangaroo.crl", "Parent(a0)", "Kangaroo(a1)", 2},
  };
  for (const auto& c : cases) {
    GroundedNetwork g =
        ground(load_fixture(c.fixture), make_query(c.target, c.evidence, c.n));
    GroundedNetwork pg = prune(g);
    INFO(c.fixture << " " << c.target);
    CHECK(pg.live_count() < g.vars.size());
    CHECK(std::abs(ve_query(g) - ve_query(pg)) < 1e-12);
    CHECK(std::abs(enumerate_query(g, {30}) - enumerate_query(pg)) < 1e-12);
  }
}

TEST_CASE("monotone sanity: the value restriction shrinks with N") {
  // P(D(a0)) = 0.97^N: every pair (r(a0,y), A(y)) independently violates the
  // restriction with probability 0.3 * 0.1.
  double prev = 1.0;
  for (std::uint64_t n : {1, 2, 3}) {
    GroundedNetwork g =
        prune(ground(load_fixture("tu.crl"), make_query("D(a0)", "", n)));
    double p = ve_query(g);
    double closed = std::pow(0.97, static_cast<double>(n));
    CHECK(std::abs(p - closed) < 1e-12);
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("explicit elimination orders reproduce the min-fill result") {
  GroundedNetwork g =
      prune(ground(load_fixture("tu.crl"), make_query("C(a0)", "", 2)));
  double auto_order = ve_query(g);
  VeOptions opt;
  for (size_t v = 0; v < g.vars.size(); ++v)
    if (static_cast<int>(v) != g.target_var)
      opt.order.push_back(static_cast<int>(v));
  double fixed = ve_query(g, opt);
  CHECK(std::abs(auto_order - fixed) < 1e-12);
}

TEST_CASE("resource guard trips on tiny budgets") {
  GroundedNetwork g =
      prune(ground(load_fixture("tu.crl"), make_query("C(a0)", "", 5)));
  VeOptions opt;
  opt.max_factor_entries = 8;
  CHECK_THROWS_AS(ve_query(g, opt), ResourceError);
}

TEST_CASE("zero-probability evidence is reported") {
  // B(a0) with not A(a0) is impossible: P(B | not A) = 0.
  GroundedNetwork g = ground(load_fixture("tu.crl"),
                             make_query("C(a0)", "B(a0), not A(a0)", 1));
  CHECK_THROWS_AS(enumerate_query(g), UndefinedConditionalError);
  CHECK_THROWS_AS(ve_query(g), UndefinedConditionalError);
}

TEST_CASE("enumeration guard") {
  GroundedNetwork g =
      ground(load_fixture("tu.crl"), make_query("C(a0)", "", 3));
  EnumerateOptions opt;
  opt.max_variables = 10;
  CHECK_THROWS_AS(enumerate_query(g, opt), ResourceError);
}
