#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "crdl/grounding.hpp"

namespace crdl {

// ── Discrete factors ─────────────────────────────────────────────────────────
// Row-major tables over ascending variable ids; the last variable varies
// fastest.  Count-state auxiliaries introduced by restriction decomposition
// are the only variables with cardinality above two.

struct Factor {
  std::vector<int> vars;    // ascending
  std::vector<int> cards;   // aligned with vars
  std::vector<double> values;

  size_t size() const { return values.size(); }

  static Factor unit() {
    Factor f;
    f.values = {1.0};
    return f;
  }
};

struct VeOptions {
  size_t max_factor_entries = size_t{1} << 22;
  // Explicit elimination order (variable ids); min-fill when empty.
  std::vector<int> order;
};

namespace detail {

inline Factor factor_product(const Factor& a, const Factor& b,
                             size_t max_entries) {
  Factor out;
  out.vars.reserve(a.vars.size() + b.vars.size());
  out.cards.reserve(a.vars.size() + b.vars.size());
  {
    size_t i = 0, j = 0;
    while (i < a.vars.size() || j < b.vars.size()) {
      if (j >= b.vars.size() || (i < a.vars.size() && a.vars[i] < b.vars[j])) {
        out.vars.push_back(a.vars[i]);
        out.cards.push_back(a.cards[i]);
        ++i;
      } else if (i >= a.vars.size() || b.vars[j] < a.vars[i]) {
        out.vars.push_back(b.vars[j]);
        out.cards.push_back(b.cards[j]);
        ++j;
      } else {
        out.vars.push_back(a.vars[i]);
        out.cards.push_back(a.cards[i]);
        ++i;
        ++j;
      }
    }
  }
  size_t total = 1;
  for (int c : out.cards) {
    total *= static_cast<size_t>(c);
    if (total > max_entries)
      throw ResourceError("intermediate factor exceeds size budget");
  }
  // Strides of each input factor along the output's variables (0 where the
  // input does not mention the variable).
  auto strides_for = [&](const Factor& f) {
    std::vector<size_t> strides(out.vars.size(), 0);
    size_t s = 1;
    for (size_t k = f.vars.size(); k-- > 0;) {
      auto it = std::lower_bound(out.vars.begin(), out.vars.end(), f.vars[k]);
      strides[static_cast<size_t>(it - out.vars.begin())] = s;
      s *= static_cast<size_t>(f.cards[k]);
    }
    return strides;
  };
  std::vector<size_t> sa = strides_for(a), sb = strides_for(b);
  out.values.assign(total, 0.0);
  std::vector<int> idx(out.vars.size(), 0);
  size_t ia = 0, ib = 0;
  for (size_t pos = 0;; ++pos) {
    out.values[pos] = a.values[ia] * b.values[ib];
    // odometer increment (last var fastest)
    size_t d = out.vars.size();
    while (d-- > 0) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out.cards[d]) break;
      ia -= sa[d] * static_cast<size_t>(out.cards[d]);
      ib -= sb[d] * static_cast<size_t>(out.cards[d]);
      idx[d] = 0;
      if (d == 0) return out;
    }
    if (out.vars.empty()) return out;
  }
}

inline Factor factor_sum_out(const Factor& f, int var) {
  size_t pos = static_cast<size_t>(
      std::lower_bound(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  Factor out;
  out.vars = f.vars;
  out.cards = f.cards;
  out.vars.erase(out.vars.begin() + static_cast<long>(pos));
  out.cards.erase(out.cards.begin() + static_cast<long>(pos));
  size_t inner = 1;
  for (size_t k = pos + 1; k < f.vars.size(); ++k)
    inner *= static_cast<size_t>(f.cards[k]);
  size_t card = static_cast<size_t>(f.cards[pos]);
  size_t outer = f.values.size() / (inner * card);
  out.values.assign(inner * outer, 0.0);
  for (size_t o = 0; o < outer; ++o)
    for (size_t c = 0; c < card; ++c)
      for (size_t in = 0; in < inner; ++in)
        out.values[o * inner + in] += f.values[(o * card + c) * inner + in];
  return out;
}

inline Factor factor_restrict(const Factor& f, int var, int val) {
  auto it = std::lower_bound(f.vars.begin(), f.vars.end(), var);
  if (it == f.vars.end() || *it != var) return f;
  size_t pos = static_cast<size_t>(it - f.vars.begin());
  Factor out;
  out.vars = f.vars;
  out.cards = f.cards;
  out.vars.erase(out.vars.begin() + static_cast<long>(pos));
  out.cards.erase(out.cards.begin() + static_cast<long>(pos));
  size_t inner = 1;
  for (size_t k = pos + 1; k < f.vars.size(); ++k)
    inner *= static_cast<size_t>(f.cards[k]);
  size_t card = static_cast<size_t>(f.cards[pos]);
  size_t outer = f.values.size() / (inner * card);
  out.values.resize(inner * outer);
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in)
      out.values[o * inner + in] =
          f.values[(o * card + static_cast<size_t>(val)) * inner + in];
  return out;
}

}  // namespace detail

// ── Factor sets and variable elimination ─────────────────────────────────────

class FactorSet {
 public:
  std::vector<Factor> factors;

  int add_variable(int card) {
    cards_[next_var_] = card;
    return next_var_++;
  }
  // Registers an externally numbered variable (e.g. a grounded variable id).
  void register_variable(int id, int card) {
    cards_[id] = card;
    next_var_ = std::max(next_var_, id + 1);
  }
  int card(int id) const { return cards_.at(id); }

  void add(Factor f) { factors.push_back(std::move(f)); }

  Factor make(std::vector<int> vars) const {
    Factor f;
    std::vector<std::pair<int, int>> vc;
    for (int v : vars) vc.emplace_back(v, card(v));
    std::sort(vc.begin(), vc.end());
    size_t total = 1;
    for (auto& [v, c] : vc) {
      f.vars.push_back(v);
      f.cards.push_back(c);
      total *= static_cast<size_t>(c);
    }
    f.values.assign(total, 0.0);
    return f;
  }

  // Index into a factor's table for an assignment given in ORIGINAL var order
  // used to build it via make(); callers must pass values aligned with
  // f.vars (ascending).
  static size_t index_of(const Factor& f, const std::vector<int>& vals) {
    size_t idx = 0;
    for (size_t k = 0; k < f.vars.size(); ++k)
      idx = idx * static_cast<size_t>(f.cards[k]) + static_cast<size_t>(vals[k]);
    return idx;
  }

  void restrict_evidence(const std::map<int, int>& evidence) {
    for (auto& f : factors)
      for (const auto& [v, val] : evidence) f = detail::factor_restrict(f, v, val);
  }

  // Eliminates every variable except those in `keep`; returns the normalized
  // product factor over the kept variables (in ascending id order).
  Factor eliminate_all_but(const std::vector<int>& keep, const VeOptions& opt) {
    std::set<int> keep_set(keep.begin(), keep.end());
    std::set<int> present;
    for (const auto& f : factors)
      for (int v : f.vars) present.insert(v);

    std::vector<int> order;
    if (!opt.order.empty()) {
      for (int v : opt.order)
        if (present.count(v) && !keep_set.count(v)) order.push_back(v);
      // Anything the caller forgot goes afterwards, by id.
      std::set<int> ordered(order.begin(), order.end());
      for (int v : present)
        if (!keep_set.count(v) && !ordered.count(v)) order.push_back(v);
    } else {
      order = min_fill_order(present, keep_set);
    }

    std::vector<Factor> work = factors;
    for (int v : order) {
      Factor prod = Factor::unit();
      std::vector<Factor> rest;
      rest.reserve(work.size());
      bool seen = false;
      for (auto& f : work) {
        if (std::binary_search(f.vars.begin(), f.vars.end(), v)) {
          prod = seen ? detail::factor_product(prod, f, opt.max_factor_entries)
                      : std::move(f);
          seen = true;
        } else {
          rest.push_back(std::move(f));
        }
      }
      if (seen) rest.push_back(detail::factor_sum_out(prod, v));
      work = std::move(rest);
    }
    Factor out = Factor::unit();
    for (auto& f : work)
      out = detail::factor_product(out, f, opt.max_factor_entries);
    for (int k : keep)
      if (present.count(k) &&
          !std::binary_search(out.vars.begin(), out.vars.end(), k))
        throw Error("kept variable vanished during elimination");
    if (!out.vars.empty() && out.vars.size() != keep.size())
      throw Error("elimination left unexpected variables");
    for (int k : keep)
      if (!present.count(k))
        throw Error("kept variable was restricted away (observed?)");
    double z = 0.0;
    for (double x : out.values) z += x;
    if (z <= 0.0)
      throw UndefinedConditionalError("evidence has probability zero");
    for (double& x : out.values) x /= z;
    return out;
  }

 private:
  // Min-fill with deterministic lexicographic tie-break.
  std::vector<int> min_fill_order(const std::set<int>& present,
                                  const std::set<int>& keep) const {
    std::map<int, std::set<int>> adj;
    for (const auto& f : factors)
      for (int a : f.vars)
        for (int b : f.vars)
          if (a != b) adj[a].insert(b);
    for (int v : present) adj[v];  // isolated variables

    std::set<int> remaining;
    for (int v : present)
      if (!keep.count(v)) remaining.insert(v);

    std::vector<int> order;
    order.reserve(remaining.size());
    while (!remaining.empty()) {
      int best = -1;
      long best_fill = -1;
      for (int v : remaining) {
        const auto& nb = adj[v];
        long fill = 0;
        for (auto it = nb.begin(); it != nb.end(); ++it) {
          auto jt = it;
          for (++jt; jt != nb.end(); ++jt)
            if (!adj[*it].count(*jt)) ++fill;
        }
        if (best < 0 || fill < best_fill || (fill == best_fill && v < best)) {
          best = v;
          best_fill = fill;
        }
      }
      order.push_back(best);
      remaining.erase(best);
      auto nb = adj[best];
      for (int a : nb) {
        adj[a].erase(best);
        for (int b : nb)
          if (a != b) adj[a].insert(b);
      }
      adj.erase(best);
    }
    return order;
  }

  std::unordered_map<int, int> cards_;
  int next_var_ = 0;
};

// ── Compiling grounded networks to factors ───────────────────────────────────

namespace detail {

// Count-state decomposition: a restriction with P pairs becomes a chain of
// ternary/quaternary deterministic factors over clamped partial counts.
// States run 0..cap; cap itself absorbs "at least cap".
inline void compile_count_cpt(FactorSet& fs, const Cpt& c, int child) {
  unsigned cap = c.count_hi == kCountInf ? c.count_lo : c.count_hi + 1;
  auto in_range = [&](unsigned s) {
    return s >= c.count_lo && (c.count_hi == kCountInf || s <= c.count_hi);
  };
  if (cap == 0) {
    // Count range [0, inf): constant true.
    Factor f = fs.make({child});
    f.values = {0.0, 1.0};
    fs.add(std::move(f));
    return;
  }
  auto term = [&](int role, int filler) {
    if (c.count_negated_filler) filler = 1 - filler;
    return (role && filler) ? 1u : 0u;
  };
  int prev_state = -1;
  for (size_t t = 0; t < c.pairs.size(); ++t) {
    const CountPair& pr = c.pairs[t];
    bool last = t + 1 == c.pairs.size();
    int next = last ? child : fs.add_variable(static_cast<int>(cap) + 1);
    bool next_is_child = last;
    std::vector<int> vars;
    if (prev_state >= 0) vars.push_back(prev_state);
    vars.push_back(pr.role_var);
    if (pr.filler_var >= 0) vars.push_back(pr.filler_var);
    vars.push_back(next);
    Factor f = fs.make(vars);
    // Iterate the raw assignment space of the factor's (sorted) vars.
    std::vector<int> vals(f.vars.size(), 0);
    auto value_of = [&](int var) {
      for (size_t k = 0; k < f.vars.size(); ++k)
        if (f.vars[k] == var) return vals[k];
      return 0;
    };
    for (;;) {
      unsigned s = prev_state >= 0 ? static_cast<unsigned>(value_of(prev_state)) : 0u;
      int role = value_of(pr.role_var);
      int filler = pr.filler_var >= 0 ? value_of(pr.filler_var) : pr.filler_const;
      unsigned ns = std::min(cap, s + term(role, filler));
      bool ok;
      if (next_is_child) {
        ok = static_cast<unsigned>(value_of(next)) == (in_range(ns) ? 1u : 0u);
      } else {
        ok = static_cast<unsigned>(value_of(next)) == ns;
      }
      f.values[FactorSet::index_of(f, vals)] = ok ? 1.0 : 0.0;
      size_t d = f.vars.size();
      bool done = true;
      while (d-- > 0) {
        if (++vals[d] < f.cards[d]) {
          done = false;
          break;
        }
        vals[d] = 0;
      }
      if (done) break;
    }
    fs.add(std::move(f));
    prev_state = next;
  }
}

}  // namespace detail

// Compiles the network's CPTs into factors.  Grounded variable ids are used
// as factor variable ids; auxiliary count-state variables get fresh ids above
// them.  Evidence is NOT applied here.
inline FactorSet compile_factors(const GroundedNetwork& g,
                                 const std::vector<int>* subset = nullptr) {
  FactorSet fs;
  size_t n = g.vars.size();
  for (size_t v = 0; v < n; ++v) fs.register_variable(static_cast<int>(v), 2);

  std::vector<char> wanted(n, subset == nullptr);
  if (subset)
    for (int v : *subset) wanted[static_cast<size_t>(v)] = 1;

  for (size_t v = 0; v < n; ++v) {
    if (!wanted[v] || !g.is_live(static_cast<int>(v))) continue;
    const Cpt& c = g.cpts[v];
    int child = static_cast<int>(v);
    switch (c.kind) {
      case CptKind::Bernoulli: {
        Factor f = fs.make({child});
        f.values = {1.0 - c.p.lo, c.p.lo};
        fs.add(std::move(f));
        break;
      }
      case CptKind::Const: {
        Factor f = fs.make({child});
        f.values[static_cast<size_t>(c.const_value ? 1 : 0)] = 1.0;
        fs.add(std::move(f));
        break;
      }
      case CptKind::TwoRow: {
        int parent = c.parents[0];
        Factor f = fs.make({child, parent});
        auto set = [&](int pv, int cv, double x) {
          std::vector<int> vals(2);
          for (size_t k = 0; k < f.vars.size(); ++k)
            vals[k] = f.vars[k] == parent ? pv : cv;
          f.values[FactorSet::index_of(f, vals)] = x;
        };
        set(1, 1, c.if_true.lo);
        set(1, 0, 1.0 - c.if_true.lo);
        set(0, 1, c.if_false.lo);
        set(0, 0, 1.0 - c.if_false.lo);
        fs.add(std::move(f));
        break;
      }
      case CptKind::BoolFunc: {
        if (c.parents.size() > 16)
          throw ResourceError("definition with too many parents to tabulate");
        std::vector<int> vars = c.parents;
        vars.push_back(child);
        Factor f = fs.make(vars);
        std::vector<int> vals(f.vars.size(), 0);
        std::vector<int> parent_vals(c.parents.size());
        for (;;) {
          for (size_t k = 0; k < c.parents.size(); ++k) {
            for (size_t q = 0; q < f.vars.size(); ++q)
              if (f.vars[q] == c.parents[k]) parent_vals[k] = vals[q];
          }
          int child_val = 0;
          for (size_t q = 0; q < f.vars.size(); ++q)
            if (f.vars[q] == child) child_val = vals[q];
          bool truth = c.def->eval(parent_vals);
          f.values[FactorSet::index_of(f, vals)] =
              (child_val == (truth ? 1 : 0)) ? 1.0 : 0.0;
          size_t d = f.vars.size();
          bool done = true;
          while (d-- > 0) {
            if (++vals[d] < f.cards[d]) {
              done = false;
              break;
            }
            vals[d] = 0;
          }
          if (done) break;
        }
        fs.add(std::move(f));
        break;
      }
      case CptKind::Count:
        detail::compile_count_cpt(fs, c, child);
        break;
    }
  }
  return fs;
}

}  // namespace crdl
