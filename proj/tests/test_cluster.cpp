#include <catch2/catch_amalgamated.hpp>

#include "crdl/cluster.hpp"
#include "support.hpp"

using namespace crdl;
using testsupport::load_fixture;
using testsupport::make_query;

namespace {

// Brute-force counterpart of the pool-collapsed aggregate: enumerates named
// outcomes and walks the pool count distribution by exact convolution with
// Pascal-style binomials (no logs, no shared code path).
double brute_aggregate(AggregateKind kind, unsigned k, double rho,
                       const std::vector<double>& named, double generic,
                       std::uint64_t n, std::uint64_t m) {
  std::uint64_t pool = n - m;
  std::vector<double> dist(static_cast<size_t>(pool) + named.size() + 1, 0.0);
  dist[0] = 1.0;
  auto convolve = [&](double q) {
    std::vector<double> next(dist.size(), 0.0);
    for (size_t s = 0; s + 1 < dist.size(); ++s) {
      next[s] += dist[s] * (1.0 - q);
      next[s + 1] += dist[s] * q;
    }
    next[dist.size() - 1] += dist[dist.size() - 1] * 1.0;
    dist = next;
  };
  for (double nm : named) convolve(rho * nm);
  for (std::uint64_t i = 0; i < pool; ++i) convolve(rho * generic);
  double tail = 0.0;
  unsigned threshold = kind == AggregateKind::AtLeast ? k : 1;
  for (size_t s = threshold; s < dist.size(); ++s) tail += dist[s];
  if (kind == AggregateKind::Forall) {
    // forall uses violation counts: recompute with the complement term.
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[0] = 1.0;
    for (double nm : named) convolve(rho * (1.0 - nm));
    for (std::uint64_t i = 0; i < pool; ++i) convolve(rho * (1.0 - generic));
    return dist[0];
  }
  return tail;
}

}  // namespace

TEST_CASE("restriction_aggregate closed forms") {
  SECTION("universal with one named message") {
    double got = restriction_aggregate(AggregateKind::Forall, 0.3, {1.0}, 0.9, 9, 1);
    CHECK_THAT(got, Catch::Matchers::WithinAbs(std::pow(0.97, 8), 1e-12));
    CHECK_THAT(got, Catch::Matchers::WithinAbs(0.78374, 5e-6));
  }
  SECTION("atleast(1) coincides with exists") {
    for (double rho : {0.1, 0.5, 0.9})
      for (double gen : {0.0, 0.3, 1.0})
        for (std::uint64_t n : {3ull, 7ull, 20ull}) {
          std::vector<double> named = {0.2, 0.8};
          double ex = restriction_aggregate(AggregateKind::Exists, rho, named, gen, n, 2);
          double al = restriction_aggregate(AggregateKind::AtLeast, rho, named, gen, n, 2, 1);
          CHECK(std::abs(ex - al) < 1e-12);
        }
  }
  SECTION("generic message of one leaves only the named product") {
    double got = restriction_aggregate(AggregateKind::Forall, 0.4, {0.7, 0.9}, 1.0, 50, 2);
    double named_only = (1.0 - 0.4 * 0.3) * (1.0 - 0.4 * 0.1);
    CHECK(std::abs(got - named_only) < 1e-12);
  }
  SECTION("degenerate role probability") {
    CHECK(restriction_aggregate(AggregateKind::Forall, 0.0, {0.2}, 0.1, 1000, 1) == 1.0);
    CHECK(restriction_aggregate(AggregateKind::Exists, 0.0, {0.2}, 0.1, 1000, 1) == 0.0);
  }
  SECTION("unsatisfiable counts return zero with a diagnostic") {
    std::string diag;
    double got = restriction_aggregate(AggregateKind::AtLeast, 0.5, {}, 0.5, 3, 0, 7, &diag);
    CHECK(got == 0.0);
    CHECK(!diag.empty());
  }
}

TEST_CASE("atleast tails agree with exhaustive convolution") {
  for (std::uint64_t pool : {0ull, 1ull, 3ull, 7ull, 10ull}) {
    for (unsigned k : {1u, 2u, 4u}) {
      for (double rho : {0.25, 0.7}) {
        std::vector<double> named = {0.3, 0.95};
        std::uint64_t m = named.size();
        std::uint64_t n = m + pool;
        double fast =
            restriction_aggregate(AggregateKind::AtLeast, rho, named, 0.6, n, m, k);
        double brute =
            brute_aggregate(AggregateKind::AtLeast, k, rho, named, 0.6, n, m);
        INFO("pool=" << pool << " k=" << k << " rho=" << rho);
        CHECK(std::abs(fast - brute) < 1e-10);
      }
    }
  }
  // forall and exists against the same oracle
  for (std::uint64_t pool : {0ull, 4ull, 9ull}) {
    std::vector<double> named = {0.5};
    std::uint64_t n = 1 + pool;
    double fa = restriction_aggregate(AggregateKind::Forall, 0.3, named, 0.8, n, 1);
    CHECK(std::abs(fa - brute_aggregate(AggregateKind::Forall, 0, 0.3, named, 0.8, n, 1)) < 1e-10);
    double ex = restriction_aggregate(AggregateKind::Exists, 0.3, named, 0.8, n, 1);
    CHECK(std::abs(ex - brute_aggregate(AggregateKind::Exists, 0, 0.3, named, 0.8, n, 1)) < 1e-10);
  }
}

TEST_CASE("aggregate monotonicity in the domain size") {
  double prev_fa = 1.0, prev_ex = 0.0, prev_al = 0.0;
  for (std::uint64_t n = 2; n <= 40; n += 2) {
    double fa = restriction_aggregate(AggregateKind::Forall, 0.3, {0.9}, 0.7, n, 1);
    double ex = restriction_aggregate(AggregateKind::Exists, 0.3, {0.9}, 0.7, n, 1);
    double al = restriction_aggregate(AggregateKind::AtLeast, 0.3, {0.9}, 0.7, n, 1, 3);
    CHECK(fa <= prev_fa + 1e-12);
    CHECK(ex >= prev_ex - 1e-12);
    CHECK(al >= prev_al - 1e-12);
    CHECK((fa >= 0 && fa <= 1 && ex >= 0 && ex <= 1 && al >= 0 && al <= 1));
    prev_fa = fa;
    prev_ex = ex;
    prev_al = al;
  }
}

TEST_CASE("slice factor construction") {
  SECTION("two slices plus aggregates for the running example") {
    Terminology t = load_fixture("tu.crl");
    Query q = make_query("A(a0)", "C(a0)", 9);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    REQUIRE(g.slices.size() == 2);  // a0 and b
    CHECK(g.b_slice == 1);
    CHECK(g.slices[0].restrictions.size() == 2);
    CHECK(!g.slices[0].input_vars.empty());
  }
  SECTION("restriction-free terminologies have no cross-slice inputs") {
    Terminology t = parse_terminology("P(A) = 0.7\nB < A\nP(B | A) = 0.5\n");
    Query q = make_query("B(a0)", "", 5);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    for (const auto& f : g.slices) {
      CHECK(f.input_vars.empty());
      CHECK(f.restrictions.empty());
    }
  }
  SECTION("kangaroo carries both existential aggregates before pruning") {
    Terminology t = load_fixture("kangaroo.crl");
    Query q = make_query("Parent(a0)", "", 5);
    CompactFactorGraph g = build_slice_factors(shatter(t, q));
    REQUIRE(g.slices.size() == 2);
    CHECK(g.slices[0].restrictions.size() == 2);
  }
  SECTION("size guard demands a finer split when disabled") {
    Terminology t = load_fixture("tu.crl");
    Query q = make_query("C(a0)", "", 9);
    ClusterOptions opt;
    opt.slice_var_budget = 3;
    opt.allow_finer_split = false;
    CHECK_THROWS_AS(build_slice_factors(prune(shatter(t, q)), opt), ResourceError);
    opt.allow_finer_split = true;
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)), opt);
    CHECK(g.slices[0].fine_mode);
  }
  SECTION("inverse roles are refused") {
    Terminology t = parse_terminology("P(A) = 0.4\nP(r) = 0.3\nC = exists r-.A\n");
    Query q = make_query("C(a0)", "", 3);
    CHECK_THROWS_AS(build_slice_factors(shatter(t, q)), UnsupportedConstructError);
  }
}

TEST_CASE("clustered propagation reproduces the published tables") {
  Terminology k = load_fixture("kangaroo.crl");
  const std::pair<std::uint64_t, double> kang[] = {
      {1, 0.1620}, {5, 0.3536}, {9, 0.4481}, {20, 0.5268}, {200, 0.5400}};
  for (auto [n, want] : kang) {
    Query q = make_query("Parent(a0)", "", n);
    CompactFactorGraph g = build_slice_factors(prune(shatter(k, q)));
    InferenceResult r = cluster_query(g);
    INFO("N=" << n);
    CHECK(r.converged);
    CHECK_THAT(r.probability, Catch::Matchers::WithinAbs(want, 5e-4));
  }
  Terminology t = load_fixture("tu.crl");
  {
    Query q = make_query("C(a0)", "", 500);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    InferenceResult r = cluster_query(g);
    CHECK_THAT(r.probability, Catch::Matchers::WithinAbs(0.4050, 2e-3));
  }
}

TEST_CASE("cluster equals exact at N=1 and stays near it at small N") {
  for (const char* fixture : {"tu.crl", "kangaroo.crl"}) {
    Terminology t = load_fixture(fixture);
    const char* target = std::string(fixture) == "tu.crl" ? "C(a0)" : "Parent(a0)";
    {
      Query q = make_query(target, "", 1);
      CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
      double clu = cluster_query(g).probability;
      double exact = ve_query(prune(ground(t, q)));
      INFO(fixture);
      CHECK(std::abs(clu - exact) < 1e-6);
    }
    for (std::uint64_t n : {2, 3, 4}) {
      Query q = make_query(target, "", n);
      CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
      double clu = cluster_query(g).probability;
      double exact = ve_query(prune(ground(t, q)));
      INFO(fixture << " N=" << n);
      CHECK(std::abs(clu - exact) <= 0.05);
    }
  }
  // Evidence-carrying cases stay within the proximity bound too.
  Terminology t = load_fixture("tu.crl");
  for (std::uint64_t n : {2, 3, 4}) {
    Query q = make_query("A(a0)", "not C(a0)", n);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    double clu = cluster_query(g).probability;
    double exact = ve_query(prune(ground(t, q)));
    CHECK(std::abs(clu - exact) <= 0.05);
  }
}

TEST_CASE("limit queries saturate onto the infinite-domain value") {
  Terminology t = load_fixture("tu.crl");
  {
    Query q;
    q.target = parse_assertion("C(a0)");
    q.domain = DomainSpec::infinite();
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    InferenceResult r = limit_query(g);
    CHECK(r.converged);
    CHECK(r.saturation_n > 0);
    CHECK_THAT(r.probability, Catch::Matchers::WithinAbs(0.4050, 2e-3));
    // Stability: doubling past saturation does not move the value.
    InferenceResult at = cluster_query_at(g, r.saturation_n);
    InferenceResult at2 = cluster_query_at(g, r.saturation_n * 2);
    CHECK(std::abs(r.probability - at2.probability) < 1e-9);
    CHECK(std::abs(at.probability - at2.probability) < 1e-7);
  }
  {
    Terminology k = load_fixture("kangaroo.crl");
    Query q;
    q.target = parse_assertion("Parent(a0)");
    q.domain = DomainSpec::infinite();
    CompactFactorGraph g = build_slice_factors(prune(shatter(k, q)));
    InferenceResult r = limit_query(g);
    CHECK_THAT(r.probability, Catch::Matchers::WithinAbs(0.5400, 1e-3));
  }
  {
    // No restrictions: saturation is immediate.
    Terminology p = parse_terminology("P(A) = 0.7\nB < A\nP(B | A) = 0.5\n");
    Query q;
    q.target = parse_assertion("B(a0)");
    q.domain = DomainSpec::infinite();
    CompactFactorGraph g = build_slice_factors(prune(shatter(p, q)));
    InferenceResult r = limit_query(g);
    CHECK(r.saturation_n == 2);  // M+1
    CHECK(std::abs(r.probability - 0.35) < 1e-9);
  }
}

TEST_CASE("domain profiles") {
  Terminology t = load_fixture("tu.crl");
  SECTION("the published evidence profile") {
    Query q = make_query("A(a0)", "not C(a0), not D(a1), B(a2), not B(a3)", 9);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    Interval iv = domain_profile(g, "A");
    CHECK_THAT(iv.lo, Catch::Matchers::WithinAbs(0.598, 1e-2));
    CHECK(iv.hi > 1.0 - 1e-12);
  }
  SECTION("no evidence collapses the profile") {
    Query q = make_query("A(a0)", "", 5);
    CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
    Interval iv = domain_profile(g, "A");
    CHECK(iv.width() < 1e-9);
    CHECK_THAT(iv.lo, Catch::Matchers::WithinAbs(0.9, 1e-9));
  }
}

TEST_CASE("slice messages equal independent inference on the slice network") {
  Terminology t = load_fixture("tu.crl");
  Query q = make_query("A(a0)", "not C(a0), not D(a1)", 5);
  CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
  // Tight tolerance: the check recompiles slices with the newest messages,
  // so the stored marginals must have settled well below the 1e-10 bound.
  Schedule tight = ClusterEngine::default_schedule();
  tight.tolerance = 1e-13;
  ClusterEngine engine(g, 5, tight);
  engine.run();
  for (size_t s = 0; s < g.slices.size(); ++s) {
    ClusterEngine::SliceSnapshot snap = engine.slice_snapshot(static_cast<int>(s));
    for (const auto& [tv, home] : snap.home) {
      // Only boundary templates carry cross-slice messages.
      if (!g.home_slice.count(tv)) continue;
      // Brute-force product-sum over the slice's compiled factors, with the
      // boundary variable's own downstream likelihood swapped out the same
      // way the engine does it.
      std::vector<Factor> factors = snap.factors;
      auto bit = snap.boundary_like_factor.find(tv);
      if (bit != snap.boundary_like_factor.end())
        factors[bit->second].values = {0.5, 0.5};
      // Variables and cardinalities:
      std::map<int, int> cards;
      for (const auto& f : factors)
        for (size_t i = 0; i < f.vars.size(); ++i)
          cards[f.vars[i]] = f.cards[i];
      std::vector<int> vars;
      for (const auto& [v, c] : cards) vars.push_back(v);
      int target = snap.local.at(tv);
      double num = 0.0, den = 0.0;
      std::vector<int> assign(vars.size(), 0);
      for (;;) {
        double w = 1.0;
        for (const auto& f : factors) {
          std::vector<int> vals;
          for (size_t i = 0; i < f.vars.size(); ++i) {
            size_t pos = static_cast<size_t>(
                std::lower_bound(vars.begin(), vars.end(), f.vars[i]) -
                vars.begin());
            vals.push_back(assign[pos]);
          }
          w *= f.values[FactorSet::index_of(f, vals)];
          if (w == 0.0) break;
        }
        if (w > 0.0) {
          den += w;
          size_t tpos = static_cast<size_t>(
              std::lower_bound(vars.begin(), vars.end(), target) - vars.begin());
          if (assign[tpos] == 1) num += w;
        }
        size_t d = vars.size();
        bool done = true;
        while (d-- > 0) {
          if (++assign[d] < cards[vars[static_cast<size_t>(d)]]) {
            done = false;
            break;
          }
          assign[d] = 0;
        }
        if (done) break;
      }
      REQUIRE(den > 0.0);
      INFO("slice " << s << " template " << g.sn.var_name(tv));
      CHECK(std::abs(num / den - home) < 1e-10);
    }
  }
}

TEST_CASE("fine-split fallback still answers") {
  Terminology t = load_fixture("kangaroo.crl");
  Query q = make_query("Parent(a0)", "", 9);
  ClusterOptions fine;
  fine.slice_var_budget = 4;
  CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)), fine);
  bool any_fine = false;
  for (const auto& f : g.slices) any_fine = any_fine || f.fine_mode;
  REQUIRE(any_fine);
  InferenceResult r = cluster_query(g, ClusterEngine::default_schedule(), fine);
  double reference =
      cluster_query(build_slice_factors(prune(shatter(t, q)))).probability;
  CHECK(std::isfinite(r.probability));
  CHECK(std::abs(r.probability - reference) < 0.05);
}
