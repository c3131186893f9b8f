#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crdl/parser.hpp"

namespace crdl {

// ── Random terminology generator ─────────────────────────────────────────────
// Deterministic by seed and byte-stable: every draw goes through the raw
// 64-bit generator (distribution classes vary across standard libraries).
// The output always satisfies the Bayesian assumption: every concept gets
// exactly one of {definition, prior, conditional pair}, every role a prior,
// all point-valued.

struct GenOptions {
  std::uint64_t seed = 1;
  int nodes = 10;          // concept names
  int deterministic = 4;   // Boolean-defined concepts
  int restrictions = 1;    // restriction-defined concepts
  int roles = 1;
};

namespace detail {

class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  // Two-decimal probability strictly inside (0, 1).
  double prob() { return static_cast<double>(below(99) + 1) / 100.0; }
  bool coin(double p) { return prob() <= p; }

 private:
  std::uint64_t state_;
};

}  // namespace detail

inline Terminology generate_terminology(const GenOptions& opt) {
  if (opt.nodes < 1) throw Error("generator needs at least one concept");
  if (opt.deterministic < 0 || opt.restrictions < 0 || opt.roles < 0)
    throw Error("generator counts must be non-negative");
  int stochastic = opt.nodes - opt.deterministic - opt.restrictions;
  if (stochastic < 1)
    throw Error("generator needs at least one stochastic root concept");
  if ((opt.restrictions > 0 || opt.roles > 0) && opt.roles < 1 &&
      opt.restrictions > 0)
    throw Error("restrictions require a role");

  detail::SplitMix rng(opt.seed * 0x5851f42d4c957f2dull + 0x14057b7ef767814full);
  std::vector<std::string> names;
  for (int i = 0; i < opt.nodes; ++i) names.push_back("C" + std::to_string(i));
  std::vector<std::string> roles;
  int role_count = opt.restrictions > 0 ? std::max(opt.roles, 1) : opt.roles;
  for (int i = 0; i < role_count; ++i) roles.push_back("r" + std::to_string(i));

  // Kind per node: the first `stochastic` stay stochastic so every definition
  // has earlier material to draw from; the rest mix Boolean and restriction
  // definitions in seeded order.
  enum Kind { Stochastic, Boolean, Restriction };
  std::vector<Kind> kinds(static_cast<size_t>(opt.nodes), Stochastic);
  {
    std::vector<Kind> tail;
    for (int i = 0; i < opt.deterministic; ++i) tail.push_back(Boolean);
    for (int i = 0; i < opt.restrictions; ++i) tail.push_back(Restriction);
    // Seeded shuffle.
    for (size_t i = tail.size(); i > 1; --i) {
      size_t j = rng.below(i);
      std::swap(tail[i - 1], tail[j]);
    }
    for (size_t i = 0; i < tail.size(); ++i)
      kinds[static_cast<size_t>(stochastic) + i] = tail[i];
  }

  std::string text;
  for (const auto& r : roles)
    text += "P(" + r + ") = " + detail::prob_to_string(rng.prob()) + "\n";
  for (int i = 0; i < opt.nodes; ++i) {
    const std::string& name = names[static_cast<size_t>(i)];
    switch (kinds[static_cast<size_t>(i)]) {
      case Stochastic: {
        if (i == 0 || rng.coin(0.6)) {
          text += "P(" + name + ") = " + detail::prob_to_string(rng.prob()) + "\n";
        } else {
          const std::string& cond = names[rng.below(static_cast<size_t>(i))];
          text += "P(" + name + " | " + cond + ") = " +
                  detail::prob_to_string(rng.prob()) + "\n";
          text += "P(" + name + " | not " + cond + ") = " +
                  detail::prob_to_string(rng.prob()) + "\n";
        }
        break;
      }
      case Boolean: {
        auto pick = [&]() {
          std::string s = names[rng.below(static_cast<size_t>(i))];
          return rng.coin(0.3) ? "not " + s : s;
        };
        std::string expr = pick();
        int extra = 1 + static_cast<int>(rng.below(2));
        for (int k = 0; k < extra; ++k)
          expr += (rng.coin(0.5) ? " and " : " or ") + pick();
        text += name + " = " + expr + "\n";
        break;
      }
      case Restriction: {
        const std::string& role = roles[rng.below(roles.size())];
        const std::string& filler = names[rng.below(static_cast<size_t>(i))];
        switch (rng.below(3)) {
          case 0: text += name + " = forall " + role + "." + filler + "\n"; break;
          case 1: text += name + " = exists " + role + "." + filler + "\n"; break;
          default:
            text += name + " = atleast " +
                    std::to_string(1 + rng.below(2)) + " " + role + "." +
                    filler + "\n";
        }
        break;
      }
    }
  }
  return parse_terminology(text);
}

inline std::string generate_terminology_text(const GenOptions& opt) {
  return serialize(generate_terminology(opt));
}

}  // namespace crdl
