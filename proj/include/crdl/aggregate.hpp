#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crdl/types.hpp"

namespace crdl {

// ── Closed-form power messages ───────────────────────────────────────────────
// Restrictions aggregate over the domain; the pool of interchangeable
// individuals contributes identical per-pair terms, so its effect collapses
// into powers and Binomial partial sums.  Powers run in log space because the
// exponent can be astronomically large (limit queries double N until power
// terms saturate).

// x^e for x in [0,1]; ln is clamped at ln(kMessageEpsilon) so deterministic
// zeros survive.
inline double power_term(double x, double exponent) {
  if (exponent <= 0.0) return 1.0;
  if (x >= 1.0) return 1.0;
  if (x < kMessageEpsilon) x = kMessageEpsilon;
  return std::exp(exponent * std::log(x));
}

// Binomial(n, p) clamped at cap: returns cap+1 masses, the last being
// P(S >= cap).  Individual masses go through lgamma so huge n is fine.
inline std::vector<double> binomial_clamped(std::uint64_t n, double p,
                                            unsigned cap) {
  std::vector<double> out(cap + 1, 0.0);
  if (p <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out[std::min<std::uint64_t>(n, cap)] = 1.0;
    return out;
  }
  double nd = static_cast<double>(n);
  double lp = std::log(p), lq = std::log1p(-p);
  double below = 0.0;
  for (unsigned j = 0; j < cap; ++j) {
    if (j > n) break;
    double jd = static_cast<double>(j);
    double lmass = std::lgamma(nd + 1.0) - std::lgamma(jd + 1.0) -
                   std::lgamma(nd - jd + 1.0) + jd * lp + (nd - jd) * lq;
    out[j] = std::exp(lmass);
    below += out[j];
  }
  out[cap] = std::max(0.0, 1.0 - below);
  if (n < cap) out[cap] = 0.0;
  return out;
}

enum class AggregateKind { Forall, Exists, AtLeast };

// Success/violation count distribution over `named` Bernoulli terms plus a
// Binomial pool, clamped at cap.
inline std::vector<double> count_distribution(
    const std::vector<double>& named_probs, std::uint64_t pool_count,
    double pool_prob, unsigned cap) {
  std::vector<double> dp = binomial_clamped(pool_count, pool_prob, cap);
  for (double q : named_probs) {
    std::vector<double> next(cap + 1, 0.0);
    for (unsigned s = 0; s <= cap; ++s) {
      if (dp[s] == 0.0) continue;
      next[s] += dp[s] * (1.0 - q);
      next[std::min(cap, s + 1)] += dp[s] * q;
    }
    dp = std::move(next);
  }
  return dp;
}

// The pool-collapsed restriction probability: named messages enter as
// independent per-pair terms, the N-M generic elements through the closed
// forms.  `k` is only read for AtLeast.
inline double restriction_aggregate(AggregateKind kind, double role_prob,
                                    const std::vector<double>& named_msgs,
                                    double generic_msg, std::uint64_t N,
                                    std::uint64_t M, unsigned k = 1,
                                    std::string* diagnostic = nullptr) {
  std::uint64_t pool = N >= M ? N - M : 0;
  if (role_prob == 0.0) {
    // No pair can fire: the universal holds vacuously, witnesses never occur.
    switch (kind) {
      case AggregateKind::Forall: return 1.0;
      case AggregateKind::Exists: return 0.0;
      case AggregateKind::AtLeast: return k == 0 ? 1.0 : 0.0;
    }
  }
  switch (kind) {
    case AggregateKind::Forall: {
      double out = power_term(1.0 - role_prob * (1.0 - generic_msg),
                              static_cast<double>(pool));
      for (double n : named_msgs) out *= 1.0 - role_prob * (1.0 - n);
      return out;
    }
    case AggregateKind::Exists: {
      double none = power_term(1.0 - role_prob * generic_msg,
                               static_cast<double>(pool));
      for (double n : named_msgs) none *= 1.0 - role_prob * n;
      return 1.0 - none;
    }
    case AggregateKind::AtLeast: {
      if (k > N) {
        if (diagnostic)
          *diagnostic = "atleast " + std::to_string(k) +
                        " is unsatisfiable with domain size " + std::to_string(N);
        return 0.0;
      }
      if (k == 0) return 1.0;
      std::vector<double> named_probs;
      named_probs.reserve(named_msgs.size());
      for (double n : named_msgs) named_probs.push_back(role_prob * n);
      std::vector<double> dist =
          count_distribution(named_probs, pool, role_prob * generic_msg, k);
      return dist[k];
    }
  }
  return 0.0;
}

}  // namespace crdl
