#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crdl/cluster.hpp"
#include "crdl/credal.hpp"
#include "crdl/exact.hpp"
#include "crdl/generate.hpp"
#include "crdl/lbp.hpp"
#include "crdl/parser.hpp"
#include "crdl/prune.hpp"
#include "crdl/validate.hpp"

namespace crdl::cli {

// Exit codes: 0 ok, 1 parse/validation, 2 unsupported construct, 3 resource.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitUnsupported = 2;
inline constexpr int kExitResource = 3;

inline size_t exact_guard() {
  if (const char* env = std::getenv("CRDL_EXACT_GUARD"))
    return static_cast<size_t>(std::strtoull(env, nullptr, 10));
  return 25;
}

struct RunRecord {
  std::string query;
  std::string engine;
  std::string n;
  std::optional<double> probability;
  std::optional<Interval> interval;
  int iterations = 0;
  bool converged = true;
  double runtime_ms = 0.0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["query"] = query;
    j["engine"] = engine;
    j["n"] = n;
    if (probability) j["probability"] = *probability;
    if (interval) j["interval"] = {interval->lo, interval->hi};
    j["iterations"] = iterations;
    j["converged"] = converged;
    j["runtime_ms"] = runtime_ms;
    j["warnings"] = warnings;
    return j;
  }

  std::string to_table() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "query      " << query << "\n";
    out << "engine     " << engine << "\n";
    out << "n          " << n << "\n";
    if (probability) out << "probability " << *probability << "\n";
    if (interval)
      out << "interval   [" << interval->lo << ", " << interval->hi << "]\n";
    out << "iterations " << iterations << "\n";
    out << "converged  " << (converged ? "yes" : "no") << "\n";
    out << "runtime_ms " << runtime_ms << "\n";
    for (const auto& w : warnings) out << "warning    " << w << "\n";
    return out.str();
  }
};

struct InferOptions {
  std::string tbox_path;
  std::string query;
  std::string evidence;
  std::string n = "1";
  std::string engine = "auto";
  std::string out = "json";
  double tolerance = 1e-8;
  int max_iterations = -1;  // engine default when negative
  double damping = 0.0;
};

namespace detail_cli {

inline Schedule make_schedule(const InferOptions& opt, int default_iters) {
  Schedule s;
  s.tolerance = opt.tolerance;
  s.damping = opt.damping;
  s.max_iterations = opt.max_iterations > 0 ? opt.max_iterations : default_iters;
  return s;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UnsupportedConstructError*>(&e)) return kExitUnsupported;
  if (dynamic_cast<const ResourceError*>(&e)) return kExitResource;
  return kExitInput;
}

}  // namespace detail_cli

inline int cmd_infer(const InferOptions& opt, std::ostream& out,
                     std::ostream& err) {
  auto started = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.query = opt.query;
  rec.n = opt.n;
  try {
    Terminology t = parse_terminology_file(opt.tbox_path);
    Query q;
    q.target = parse_assertion(opt.query);
    if (!opt.evidence.empty()) q.evidence = parse_abox(opt.evidence);
    q.domain = parse_domain_spec(opt.n);

    ValidationReport rep = validate(t, q);
    if (!rep.passed) {
      for (const auto& [code, detail] : rep.violations)
        err << "error (" << code << "): " << detail << "\n";
      return kExitInput;
    }
    // Non-exact domain specs downgrade the profile but route by domain kind;
    // the point-valued engines only need uniqueness.
    bool credal_profile = !rep.uniqueness || !rep.unique_names;

    std::string engine = opt.engine;
    if (engine == "auto") {
      if (q.domain.kind == DomainSpec::Kind::Exact) {
        GroundedNetwork g = prune(ground(t, q));
        if (g.live_count() <= exact_guard())
          engine = "exact";
        else if (!t.has_inverse_roles())
          engine = credal_profile ? "credal" : "cluster";
        else
          engine = "lbp";
      } else if (q.domain.kind == DomainSpec::Kind::Infinite) {
        engine = "cluster";
      } else {
        engine = "credal";
      }
    }
    rec.engine = engine;

    if (engine == "exact") {
      if (q.domain.kind != DomainSpec::Kind::Exact)
        throw UnsupportedConstructError("exact engine requires --n <int>");
      if (credal_profile)
        throw UnsupportedConstructError(
            "point-valued engine on a credal-profile problem; use --engine credal");
      GroundedNetwork g = prune(ground(t, q));
      rec.probability = ve_query(g);
      rec.iterations = 0;
    } else if (engine == "lbp") {
      if (q.domain.kind != DomainSpec::Kind::Exact)
        throw UnsupportedConstructError("lbp requires --n <int>");
      if (credal_profile)
        throw UnsupportedConstructError(
            "point-valued engine on a credal-profile problem; use --engine credal");
      InferenceResult r =
          grounded_lbp(prune(ground(t, q)), detail_cli::make_schedule(opt, 10000));
      rec.probability = r.probability;
      rec.iterations = r.iterations;
      rec.converged = r.converged;
      rec.warnings = r.warnings;
    } else if (engine == "plbp") {
      if (q.domain.kind != DomainSpec::Kind::Exact)
        throw UnsupportedConstructError("plbp requires --n <int>");
      if (credal_profile)
        throw UnsupportedConstructError(
            "point-valued engine on a credal-profile problem; use --engine credal");
      InferenceResult r =
          plbp(prune(shatter(t, q)), detail_cli::make_schedule(opt, 10000));
      rec.probability = r.probability;
      rec.iterations = r.iterations;
      rec.converged = r.converged;
      rec.warnings = r.warnings;
    } else if (engine == "cluster") {
      if (credal_profile)
        throw UnsupportedConstructError(
            "clustered engine requires the Bayesian assumption; use --engine credal");
      CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
      Schedule sched = detail_cli::make_schedule(opt, 100);
      InferenceResult r;
      if (q.domain.kind == DomainSpec::Kind::Exact)
        r = cluster_query(g, sched);
      else if (q.domain.kind == DomainSpec::Kind::Infinite)
        r = limit_query(g, sched);
      else
        throw UnsupportedConstructError(
            "domain-size ranges route to the credal engine");
      rec.probability = r.probability;
      rec.iterations = r.iterations;
      rec.converged = r.converged;
      rec.warnings = r.warnings;
      if (r.saturation_n > 0)
        rec.warnings.push_back("saturated at N=" + std::to_string(r.saturation_n));
    } else if (engine == "credal") {
      if (q.domain.kind == DomainSpec::Kind::Infinite)
        throw UnsupportedConstructError(
            "infinite domains need uniqueness; use --engine cluster");
      CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
      CredalSpec spec = CredalSpec::from(*g.sn.tnet);
      InferenceResult r =
          interval_query(g, spec, q, detail_cli::make_schedule(opt, 100));
      rec.interval = r.interval;
      rec.iterations = r.iterations;
      rec.converged = r.converged;
      rec.warnings = r.warnings;
    } else {
      err << "error: unknown engine '" << engine << "'\n";
      return kExitInput;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return detail_cli::exit_code_for(e);
  }
  auto elapsed = std::chrono::steady_clock::now() - started;
  rec.runtime_ms =
      std::chrono::duration_cast<std::chrono::microseconds>(elapsed).count() /
      1000.0;
  if (opt.out == "table")
    out << rec.to_table();
  else
    out << rec.to_json().dump() << "\n";
  return kExitOk;
}

// ── validate ─────────────────────────────────────────────────────────────────

inline int cmd_validate(const std::string& tbox_path, std::ostream& out,
                        std::ostream& err) {
  try {
    Terminology t = parse_terminology_file(tbox_path);
    // Terminology-level validation: a fixed-size domain with a fresh
    // individual stands in for the query.
    Query q;
    auto concepts = t.concept_names();
    q.target.predicate = concepts.empty() ? "Thing" : *concepts.begin();
    q.target.a = "a0";
    q.domain = DomainSpec::exact(1 + t.nominal_individuals.size());
    if (concepts.empty()) {
      nlohmann::json j;
      j["passed"] = true;
      j["profile"] = "bayesian";
      j["assumptions"] = {{"unique_names", true},
                          {"confined_domain", true},
                          {"uniqueness", true}};
      j["violations"] = nlohmann::json::array();
      out << j.dump(2) << "\n";
      return kExitOk;
    }
    ValidationReport rep = validate(t, q);
    nlohmann::json j;
    j["passed"] = rep.passed;
    j["profile"] = rep.profile();
    j["assumptions"] = {{"unique_names", rep.unique_names},
                        {"confined_domain", rep.confined_domain},
                        {"uniqueness", rep.uniqueness}};
    j["violations"] = nlohmann::json::array();
    for (const auto& [code, detail] : rep.violations)
      j["violations"].push_back({{"code", code}, {"detail", detail}});
    out << j.dump(2) << "\n";
    return rep.passed ? kExitOk : kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return detail_cli::exit_code_for(e);
  }
}

// ── bench ────────────────────────────────────────────────────────────────────

struct BenchOptions {
  std::string suite = "all";              // tu | kangaroo | all
  std::vector<std::uint64_t> n_list = {1, 5, 9};
  std::string fixture_dir = "fixtures";
  std::string out = "table";              // table | json
};

inline int cmd_bench(const BenchOptions& opt, std::ostream& out,
                     std::ostream& err) {
  struct Suite {
    std::string name;
    std::string file;
    std::string query;
  };
  std::vector<Suite> suites;
  if (opt.suite == "tu" || opt.suite == "all")
    suites.push_back({"tu", opt.fixture_dir + "/tu.crl", "C(a0)"});
  if (opt.suite == "kangaroo" || opt.suite == "all")
    suites.push_back(
        {"kangaroo", opt.fixture_dir + "/kangaroo.crl", "Parent(a0)"});
  if (suites.empty()) {
    err << "error: unknown suite '" << opt.suite << "'\n";
    return kExitInput;
  }

  nlohmann::json all = nlohmann::json::array();
  for (const auto& suite : suites) {
    Terminology t;
    try {
      t = parse_terminology_file(suite.file);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitInput;
    }
    std::vector<std::optional<double>> exact_row, lbp_row, proposed_row;
    std::vector<double> runtime_row;
    for (std::uint64_t n : opt.n_list) {
      Query q;
      q.target = parse_assertion(suite.query);
      q.domain = DomainSpec::exact(n);
      // Exact within the desk-scale guard; dashes elsewhere, like the source
      // tables.
      std::optional<double> exact;
      try {
        GroundedNetwork g = prune(ground(t, q));
        if (g.live_count() <= 4096) exact = ve_query(g);
      } catch (const std::exception&) {
      }
      exact_row.push_back(exact);
      std::optional<double> lbp;
      try {
        InferenceResult r = plbp(prune(shatter(t, q)));
        if (r.converged) lbp = r.probability;
      } catch (const std::exception&) {
      }
      lbp_row.push_back(lbp);
      std::optional<double> prop;
      double ms = 0.0;
      try {
        auto t0 = std::chrono::steady_clock::now();
        CompactFactorGraph g = build_slice_factors(prune(shatter(t, q)));
        InferenceResult r = cluster_query(g);
        auto t1 = std::chrono::steady_clock::now();
        ms = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0)
                 .count() /
             1000.0;
        prop = r.probability;
      } catch (const std::exception&) {
      }
      proposed_row.push_back(prop);
      runtime_row.push_back(ms);
    }

    if (opt.out == "table") {
      auto cell = [](std::optional<double> v) {
        if (!v) return std::string("—");
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(4) << *v;
        return ss.str();
      };
      out << "suite: " << suite.name << "\n";
      out << std::left << std::setw(12) << "N";
      for (std::uint64_t n : opt.n_list) out << std::setw(10) << n;
      out << "\n";
      out << std::setw(12) << "Exact:";
      for (auto& v : exact_row) out << std::setw(10) << cell(v);
      out << "\n";
      out << std::setw(12) << "LBP:";
      for (auto& v : lbp_row) out << std::setw(10) << cell(v);
      out << "\n";
      out << std::setw(12) << "Proposed:";
      for (auto& v : proposed_row) out << std::setw(10) << cell(v);
      out << "\n";
      out << std::setw(12) << "Runtime(ms):";
      for (double v : runtime_row) {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(1) << v;
        out << std::setw(10) << ss.str();
      }
      out << "\n\n";
    }
    nlohmann::json j;
    j["suite"] = suite.name;
    j["n"] = opt.n_list;
    auto row = [](const std::vector<std::optional<double>>& xs) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& x : xs) {
        if (x)
          arr.push_back(*x);
        else
          arr.push_back(nullptr);
      }
      return arr;
    };
    j["exact"] = row(exact_row);
    j["lbp"] = row(lbp_row);
    j["proposed"] = row(proposed_row);
    j["runtime_ms"] = runtime_row;
    all.push_back(j);
  }
  if (opt.out == "json")
    out << all.dump(2) << "\n";
  else
    out << all.dump() << "\n";
  return kExitOk;
}

// ── gen ──────────────────────────────────────────────────────────────────────

inline int cmd_gen(const GenOptions& opt, const std::string& out_path,
                   std::ostream& out, std::ostream& err) {
  try {
    std::string text = generate_terminology_text(opt);
    if (out_path.empty() || out_path == "-") {
      out << text;
    } else {
      std::ofstream f(out_path, std::ios::binary);
      if (!f) throw Error("cannot write " + out_path);
      f << text;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace crdl::cli
