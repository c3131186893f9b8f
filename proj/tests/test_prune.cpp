#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace crdl;
using testsupport::load_fixture;
using testsupport::make_query;

namespace {
std::set<std::string> live_names(const GroundedNetwork& g) {
  std::set<std::string> out;
  for (size_t v = 0; v < g.vars.size(); ++v)
    if (g.is_live(static_cast<int>(v))) out.insert(g.var_name(static_cast<int>(v)));
  return out;
}
}  // namespace

TEST_CASE("unconditional prior prunes to a single node") {
  GroundedNetwork g =
      prune(ground(load_fixture("tu.crl"), make_query("A(a0)", "", 5)));
  CHECK(g.live_count() == 1);
  CHECK(live_names(g) == std::set<std::string>{"A(a0)"});
  CHECK(std::abs(ve_query(g) - 0.9) < 1e-12);
}

TEST_CASE("query below the evidence keeps only the active ancestors") {
  GroundedNetwork g = prune(
      ground(load_fixture("tu.crl"), make_query("D(a0)", "B(a0)", 2)));
  auto names = live_names(g);
  // Keeps the universal restriction's inputs and the evidence channel.
  CHECK(names.count("D(a0)") == 1);
  CHECK(names.count("forall r.A(a0)") == 1);
  CHECK(names.count("A(a0)") == 1);
  CHECK(names.count("A(x1)") == 1);
  CHECK(names.count("r(a0,a0)") == 1);
  CHECK(names.count("r(a0,x1)") == 1);
  CHECK(names.count("B(a0)") == 1);
  // Drops the disjunction side entirely.
  CHECK(names.count("C(a0)") == 0);
  CHECK(names.count("exists r.D(a0)") == 0);
  CHECK(names.count("B(x1)") == 0);
}

TEST_CASE("evidence equal to the target collapses to the indicator") {
  GroundedNetwork g = ground(load_fixture("tu.crl"),
                             make_query("A(a0)", "A(a0)", 3));
  GroundedNetwork pg = prune(g);
  CHECK(ve_query(pg) == 1.0);
  CHECK(enumerate_query(pg) == 1.0);

  Query q = make_query("A(a0)", "not A(a0)", 3);
  GroundedNetwork neg = prune(ground(load_fixture("tu.crl"), q));
  CHECK(ve_query(neg) == 0.0);
}

TEST_CASE("pruning is sound under varied evidence placements") {
  struct Case {
    const char* target;
    const char* evidence;
  } cases[] = {
      {"C(a0)", "not D(a1)"},
      {"A(a0)", "C(a0)"},
      {"B(a0)", "D(a0), not C(a1)"},
      {"D(a0)", ""},
  };
  for (const auto& c : cases) {
    GroundedNetwork g =
        ground(load_fixture("tu.crl"), make_query(c.target, c.evidence, 2));
    GroundedNetwork pg = prune(g);
    INFO(c.target << " | " << c.evidence);
    CHECK(std::abs(enumerate_query(g, {30}) - enumerate_query(pg, {30})) < 1e-12);
  }
}
