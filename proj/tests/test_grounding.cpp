#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace crdl;

namespace {

// Joint probability of a full assignment, straight from the CPT product.
double joint_prob(const GroundedNetwork& g, const std::vector<int>& vals) {
  double w = 1.0;
  std::vector<int> pv;
  for (size_t v = 0; v < g.vars.size(); ++v) {
    const Cpt& c = g.cpts[v];
    pv.clear();
    for (int p : c.parents) pv.push_back(vals[static_cast<size_t>(p)]);
    double pt = c.prob_true(pv);
    w *= vals[v] ? pt : 1.0 - pt;
    if (w == 0.0) return 0.0;
  }
  return w;
}

}  // namespace

TEST_CASE("variable count follows N|C| + N^2|R|") {
  struct Case {
    const char* fixture;
    std::uint64_t n;
  } cases[] = {{"tu.crl", 1}, {"tu.crl", 2}, {"tu.crl", 3},
               {"kangaroo.crl", 1}, {"kangaroo.crl", 2}, {"tu_credal.crl", 2}};
  for (const auto& c : cases) {
    Terminology t = testsupport::load_fixture(c.fixture);
    TNetwork net = build_tnetwork(t);
    Query q = testsupport::make_query("A(a0)", "", c.n);
    if (std::string(c.fixture) == "kangaroo.crl")
      q = testsupport::make_query("Parent(a0)", "", c.n);
    GroundedNetwork g = ground(t, q);
    INFO(c.fixture << " N=" << c.n);
    CHECK(g.vars.size() == c.n * net.concept_like_count() +
                               c.n * c.n * net.role_count());
  }
  // The two-restriction fixture at N=2: 6 concept-like nodes, 1 role.
  Terminology t = testsupport::load_fixture("tu.crl");
  GroundedNetwork g = ground(t, testsupport::make_query("C(a0)", "", 2));
  CHECK(g.vars.size() == 16);
}

TEST_CASE("value restriction at N=1 is the implication r -> A") {
  Terminology t = testsupport::load_fixture("tu.crl");
  GroundedNetwork g = ground(t, testsupport::make_query("D(a0)", "", 1));
  int forall_node = -1;
  for (size_t id = 0; id < g.tnet->nodes.size(); ++id)
    if (g.tnet->nodes[id].kind == TNodeKind::Restriction &&
        g.tnet->nodes[id].rkind == RestrKind::Forall)
      forall_node = static_cast<int>(id);
  REQUIRE(forall_node >= 0);
  const Cpt& c = g.cpt(g.var_of(forall_node, 0));
  REQUIRE(c.kind == CptKind::Count);
  REQUIRE(c.parents.size() == 2);  // r(a0,a0), A(a0)
  // child = 1 iff r(a0,a0)=0 or A(a0)=1
  CHECK(c.prob_true({0, 0}) == 1.0);
  CHECK(c.prob_true({0, 1}) == 1.0);
  CHECK(c.prob_true({1, 0}) == 0.0);
  CHECK(c.prob_true({1, 1}) == 1.0);
}

TEST_CASE("evidence clamps the asserted variable") {
  Terminology t = testsupport::load_fixture("kangaroo.crl");
  Query q = testsupport::make_query("Parent(a0)", "Kangaroo(a0)", 2);
  GroundedNetwork g = ground(t, q);
  int kang = g.tnet->concept_node("Kangaroo");
  REQUIRE(kang >= 0);
  int v = g.var_of(kang, 0);
  REQUIRE(g.evidence.count(v) == 1);
  CHECK(g.evidence.at(v) == 1);

  CHECK_THROWS_AS(
      ground(t, testsupport::make_query("Parent(a0)",
                                        "Kangaroo(a0), not Kangaroo(a0)", 2)),
      ValidationError);
}

TEST_CASE("domain smaller than the named individuals is rejected") {
  Terminology t = testsupport::load_fixture("tu.crl");
  CHECK_THROWS_AS(ground(t, testsupport::make_query("C(a0)", "B(a1), B(a2)", 2)),
                  DomainTooSmallError);
}

TEST_CASE("CPT parents are the groundings of the t-network parents") {
  Terminology t = testsupport::load_fixture("tu.crl");
  GroundedNetwork g = ground(t, testsupport::make_query("C(a0)", "", 3));
  const TNetwork& tn = *g.tnet;
  for (size_t v = 0; v < g.vars.size(); ++v) {
    const auto& gv = g.vars[v];
    const TNode& n = tn.node(gv.tnode);
    const Cpt& c = g.cpts[v];
    if (n.kind == TNodeKind::Restriction) {
      // role and filler groundings over every y
      REQUIRE(c.pairs.size() == g.N);
      for (std::uint64_t y = 0; y < g.N; ++y) {
        CHECK(c.pairs[y].role_var ==
              g.var_of(n.role_node, static_cast<std::uint64_t>(gv.i), y));
        CHECK(c.pairs[y].filler_var == g.var_of(n.filler_node, y));
      }
    } else {
      std::set<int> expected;
      for (int p : n.parents)
        expected.insert(g.var_of(p, static_cast<std::uint64_t>(gv.i),
                                 static_cast<std::uint64_t>(
                                     gv.j >= 0 ? gv.j : 0)));
      std::set<int> got(c.parents.begin(), c.parents.end());
      CHECK(got == expected);
    }
  }
}

TEST_CASE("inverse role groundings alias instead of allocating") {
  Terminology t = parse_terminology(
      "P(A) = 0.4\nP(r) = 0.3\nC = exists r-.A\n");
  TNetwork tn = build_tnetwork(t);
  GroundedNetwork g = ground(t, testsupport::make_query("C(a0)", "", 2));
  CHECK(g.vars.size() == 2 * tn.concept_like_count() + 4 * tn.role_count());
  CHECK(g.has_inverse_roles);
  CHECK(!g.inverse_aliases.empty());
  // The restriction at a0 reads r(y, a0), not r(a0, y).
  int cnode = -1;
  for (size_t id = 0; id < g.tnet->nodes.size(); ++id)
    if (g.tnet->nodes[id].kind == TNodeKind::Restriction)
      cnode = static_cast<int>(id);
  const Cpt& c = g.cpt(g.var_of(cnode, 0));
  int rnode = g.tnet->role_node("r");
  CHECK(c.pairs[1].role_var == g.var_of(rnode, 1, 0));
}

TEST_CASE("nominal fillers ground to indicator concepts") {
  Terminology t = parse_terminology(
      "P(r) = 0.5\nC = exists r.{ind}\n");
  Query q;
  q.target = parse_assertion("C(a0)");
  q.domain = DomainSpec::exact(3);
  GroundedNetwork g = ground(t, q);
  // Named individuals: a0 plus the nominal ind.
  REQUIRE(g.named.size() == 2);
  int nom = g.tnet->concept_node("{ind}");
  REQUIRE(nom >= 0);
  // Indicator: true exactly at the nominal's own slot.
  CHECK(g.cpt(g.var_of(nom, 0)).const_value == false);
  CHECK(g.cpt(g.var_of(nom, 1)).const_value == true);
  CHECK(g.cpt(g.var_of(nom, 2)).const_value == false);
}

TEST_CASE("Markov condition holds on the grounded joint (N=2)") {
  Terminology t = testsupport::load_fixture("tu.crl");
  GroundedNetwork g = ground(t, testsupport::make_query("C(a0)", "", 2));
  size_t n = g.vars.size();
  REQUIRE(n == 16);

  int c_a0 = g.target_var;
  const Cpt& c_cpt = g.cpt(c_a0);
  std::vector<int> pa = c_cpt.parents;  // B(a0), exists-rest(a0)

  // Non-using assertions: nothing uses C in this terminology.
  int a_a1 = g.var_of(g.tnet->concept_node("A"), 1);
  int d_a1 = g.var_of(g.tnet->concept_node("D"), 1);

  for (int z : {a_a1, d_a1}) {
    // Accumulate P(C, Z, pa-configuration).
    std::map<std::vector<int>, double> table;
    std::vector<int> vals(n, 0);
    for (;;) {
      double w = joint_prob(g, vals);
      if (w > 0) {
        std::vector<int> key;
        for (int p : pa) key.push_back(vals[static_cast<size_t>(p)]);
        key.push_back(vals[static_cast<size_t>(c_a0)]);
        key.push_back(vals[static_cast<size_t>(z)]);
        table[key] += w;
      }
      size_t d = n;
      bool done = true;
      while (d-- > 0) {
        if (++vals[d] < 2) { done = false; break; }
        vals[d] = 0;
      }
      if (done) break;
    }
    // For each parent configuration: P(C,Z|pa) == P(C|pa) P(Z|pa).
    for (int b0 : {0, 1})
      for (int e0 : {0, 1}) {
        double joint[2][2] = {{0, 0}, {0, 0}};
        for (int cv : {0, 1})
          for (int zv : {0, 1}) {
            auto it = table.find({b0, e0, cv, zv});
            if (it != table.end()) joint[cv][zv] = it->second;
          }
        double total = joint[0][0] + joint[0][1] + joint[1][0] + joint[1][1];
        if (total <= 0) continue;
        double pc1 = (joint[1][0] + joint[1][1]) / total;
        double pz1 = (joint[0][1] + joint[1][1]) / total;
        CHECK(std::abs(joint[1][1] / total - pc1 * pz1) < 1e-10);
      }
  }
}
