#pragma once

#include <cstdint>

#include "rankphase/types.hpp"

namespace rankphase {

// log(x!) through the log-gamma function; reentrant.
double log_factorial(std::int64_t x);

// sum_{i != j} (X_ij log mu_ij - mu_ij - log X_ij!). Throws InputError on a
// nonpositive mean, a negative count or a dimension mismatch.
double poisson_log_likelihood(const PoissonCounts& x, const MeanMatrix& mu);

// argmax of the Poisson likelihood over the rank space by enumeration,
// lexicographic tie-break. Throws RefusedError when n > n_max.
RankVector poisson_mle_brute_force(const PoissonCounts& x, const ModelSpec& model,
                                   const RankSpace& space, std::size_t n_max = 6);

// E sqrt(dP_tilde / dP) over independent Poisson cells:
// exp(-1/2 sum (sqrt(mu_tilde) - sqrt(mu))^2).
double bhattacharyya_affinity(const MeanMatrix& mu, const MeanMatrix& mu_tilde);

// sum_x sqrt(p(x | mu) p(x | mu_tilde)) for one cell, summed outward from
// the mode and truncated once terms drop below 1e-16 past both modes.
double bhattacharyya_cell_series(double mu, double mu_tilde);

// Product of bhattacharyya_cell_series over all off-diagonal cells.
double bhattacharyya_affinity_series(const MeanMatrix& mu, const MeanMatrix& mu_tilde);

}  // namespace rankphase
