#pragma once

// Shared helpers for the test suites.

#include <fstream>
#include <sstream>
#include <string>

#include "crdl/crdl.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
  return std::string(CRDL_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline crdl::Terminology load_fixture(const std::string& name) {
  return crdl::parse_terminology_file(fixture_path(name));
}

inline crdl::Query make_query(const std::string& target,
                              const std::string& evidence,
                              std::uint64_t n) {
  crdl::Query q;
  q.target = crdl::parse_assertion(target);
  if (!evidence.empty()) q.evidence = crdl::parse_abox(evidence);
  q.domain = crdl::DomainSpec::exact(n);
  return q;
}

}  // namespace testsupport
