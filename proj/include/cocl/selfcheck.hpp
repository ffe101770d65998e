#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cocl {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;      // first violation, empty on success
  std::uint64_t seed = 0;  // instance seed of the first violation
};

struct SelfCheckOptions {
  // Mutation hook: the simulated coordinator sums shares in descending node
  // order, which must break the bit-exact equivalence check.
  bool corrupt_aggregation_order = false;
  std::ostream* log = nullptr;  // one line per check when set
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  const CheckResult* first_failure() const;
};

// Property suites across all modules on fixed seeds: pseudoinverse Penrose
// conditions, one-step convergence, closed-form / iterative / network
// equivalence, underparameterized convergence, metric identities.
SelfCheckReport run_selfcheck(const SelfCheckOptions& options = {});

}  // namespace cocl
