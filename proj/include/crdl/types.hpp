#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace crdl {

// ── Probability intervals ────────────────────────────────────────────────────
// Every assessed quantity is an interval [lo, hi]; point assessments are the
// degenerate case lo == hi.  Engines that require point values assert
// degeneracy up front instead of silently taking midpoints.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double p) { return {p, p}; }
  static Interval vacuous() { return {0.0, 1.0}; }

  bool is_point(double eps = 0.0) const { return hi - lo <= eps; }
  double width() const { return hi - lo; }
  bool contains(double p, double eps = 0.0) const {
    return p >= lo - eps && p <= hi + eps;
  }
  bool contains(const Interval& o, double eps = 0.0) const {
    return o.lo >= lo - eps && o.hi <= hi + eps;
  }
  bool operator==(const Interval& o) const { return lo == o.lo && hi == o.hi; }
};

// ── Errors ───────────────────────────────────────────────────────────────────
// One exception hierarchy; the CLI maps categories onto exit codes
// (1 = input/validation, 2 = unsupported construct, 3 = resource guard).

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int col)
      : Error("parse error at " + std::to_string(line) + ":" +
              std::to_string(col) + ": " + what),
        line(line),
        col(col) {}
  int line;
  int col;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class CycleError : public ValidationError {
 public:
  CycleError(const std::string& what, std::vector<std::string> cycle)
      : ValidationError(what), cycle(std::move(cycle)) {}
  std::vector<std::string> cycle;
};

class UnsupportedConstructError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class UndefinedConditionalError : public Error {
 public:
  using Error::Error;
};

class DomainTooSmallError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ── Inference results ────────────────────────────────────────────────────────

struct InferenceResult {
  double probability = std::numeric_limits<double>::quiet_NaN();
  Interval interval{std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
  bool is_interval = false;
  int iterations = 0;
  bool converged = true;
  // Domain size at which limit_query saturated (0 when not a limit query).
  std::uint64_t saturation_n = 0;
  std::vector<std::string> warnings;

  static InferenceResult point(double p, int iters = 0, bool conv = true) {
    InferenceResult r;
    r.probability = p;
    r.iterations = iters;
    r.converged = conv;
    return r;
  }
  static InferenceResult bounds(Interval iv, int iters = 0, bool conv = true) {
    InferenceResult r;
    r.interval = iv;
    r.is_interval = true;
    r.iterations = iters;
    r.converged = conv;
    return r;
  }
};

// ── Message-passing schedule ─────────────────────────────────────────────────

struct Schedule {
  enum class Mode { Synchronous, Sequential };
  Mode mode = Mode::Synchronous;
  double damping = 0.0;     // in [0, 1)
  int max_iterations = 10000;
  double tolerance = 1e-8;  // max-norm message residual
};

// Message floor used by the loopy engines to survive deterministic zeros.
inline constexpr double kMessageEpsilon = 1e-12;

}  // namespace crdl
