#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rankphase {

struct IdentityResult {
  std::string name;
  bool passed = true;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::size_t checks = 0;
  std::optional<std::uint64_t> failing_seed;
  std::string detail;
};

struct VerifyReport {
  std::vector<IdentityResult> identities;
  bool passed() const;
};

// Names accepted by run_verify's inject argument, in execution order.
std::vector<std::string> identity_names();

// Runs every identity on seeded random instances. When inject names an
// identity, that identity is fed a corrupted input and must fail.
// Throws InputError for an unknown inject name.
VerifyReport run_verify(const std::optional<std::string>& inject = std::nullopt,
                        std::uint64_t seed = 20240611);

struct OracleReport {
  std::size_t n = 0;
  std::size_t instances = 0;
  // Feature matching against enumeration, sum budget and sum + square budget.
  std::size_t fm_matches_sum = 0;
  std::size_t fm_matches_square = 0;
  // Same vector as the enumeration, not just the same objective; out of
  // 2 * instances.
  std::size_t fm_identical = 0;
  double fm_worst_gap = 0.0;
  std::optional<std::uint64_t> fm_first_mismatch_seed;
  // Profile iteration against the exhaustive profile minimizer.
  std::size_t profile_matches = 0;
  double profile_worst_gap = 0.0;

  bool feature_match_ok() const {
    return fm_matches_sum == instances && fm_matches_square == instances;
  }
  double profile_match_rate() const {
    return instances ? static_cast<double>(profile_matches) / static_cast<double>(instances) : 0.0;
  }
};

// n must lie in [3, 6]; throws InputError otherwise.
OracleReport run_oracle_check(std::size_t n, std::size_t instances, std::uint64_t seed);

}  // namespace rankphase
