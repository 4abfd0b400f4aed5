#pragma once

#include <cstddef>

#include "rankphase/types.hpp"

namespace rankphase {

// mu_{r(i) r(j)} for every ordered pair i != j.
MeanMatrix build_mean_matrix(const ModelSpec& model, const RankVector& r);

bool space_contains(const RankSpace& space, const RankVector& r);

// l_0 = fraction of mismatched entries; l_q = mean |r_hat - r|^q for q in (0, 2].
double loss(double q, const RankVector& r_hat, const RankVector& r);

// Sum over ordered pairs of squared differences between the two mean matrices.
// Poisson models compare square-root means.
double signal_gap(const ModelSpec& model, const RankVector& r, const RankVector& r_tilde);

// Closed form of signal_gap for models with theta_k = alpha + beta_tilde k.
//   differential: 2 n b^2 |d|^2 - 2 b^2 (sum d)^2
//   additive and Poisson: b^2 (2 (n - 2) |d|^2 + 2 (sum d)^2)
// with d = r_tilde - r. Throws InputError for non-linear theta.
double signal_gap_closed_form(const ModelSpec& model, const RankVector& r,
                              const RankVector& r_tilde);

// SNR = n beta^2 / (4 sigma^2).
double snr(std::size_t n, double beta, double sigma);
// Inverse of snr(): beta = 2 sigma sqrt(snr / n).
double beta_for_snr(std::size_t n, double snr_value, double sigma);

}  // namespace rankphase
