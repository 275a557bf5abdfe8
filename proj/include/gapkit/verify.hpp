#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace gapkit {

struct VerifyCheck {
  std::string suite;
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=", ">=", ">" or "=="
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

/// gradients, span, bounds, coupling.
const std::vector<std::string>& verify_suites();

/// Runs one suite, or every suite for "all". Unknown names are usage errors.
std::vector<VerifyCheck> run_verify(const std::string& suite, std::uint64_t seed = 7);

void write_verify_table(const std::vector<VerifyCheck>& checks, std::ostream& out);

}  // namespace gapkit
