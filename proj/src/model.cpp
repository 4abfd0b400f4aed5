#include "rankphase/model.hpp"

#include <cmath>

#include "rankphase/errors.hpp"

namespace rankphase {

namespace {

void require_size(const ModelSpec& model, const RankVector& r, const char* what) {
  if (r.size() != model.n()) {
    throw InputError(std::string(what) + ": rank length " + std::to_string(r.size()) +
                     " does not match model size " + std::to_string(model.n()));
  }
}

}  // namespace

MeanMatrix build_mean_matrix(const ModelSpec& model, const RankVector& r) {
  require_size(model, r, "build_mean_matrix");
  const std::size_t n = r.size();
  MeanMatrix mu(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) mu(i, j) = model.mean(r[i], r[j]);
    }
  }
  return mu;
}

bool space_contains(const RankSpace& space, const RankVector& r) {
  if (r.size() != space.n()) return false;
  return space.sum_ok(r.sum()) && space.sum_of_squares_ok(r.sum_of_squares());
}

double loss(double q, const RankVector& r_hat, const RankVector& r) {
  if (!(q >= 0.0 && q <= 2.0)) throw InputError("loss exponent q must lie in [0, 2]");
  if (r_hat.size() != r.size() || r.size() == 0) {
    throw InputError("loss: rank vectors must have equal nonzero length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const int d = std::abs(r_hat[i] - r[i]);
    if (q == 0.0) {
      total += d != 0 ? 1.0 : 0.0;
    } else if (q == 1.0) {
      total += d;
    } else if (q == 2.0) {
      total += static_cast<double>(d) * d;
    } else {
      total += std::pow(static_cast<double>(d), q);
    }
  }
  return total / static_cast<double>(r.size());
}

double signal_gap(const ModelSpec& model, const RankVector& r, const RankVector& r_tilde) {
  require_size(model, r, "signal_gap");
  require_size(model, r_tilde, "signal_gap");
  const std::size_t n = r.size();
  double gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = model.signal_coordinate(r_tilde[i], r_tilde[j]) -
                       model.signal_coordinate(r[i], r[j]);
      gap += d * d;
    }
  }
  return gap;
}

double signal_gap_closed_form(const ModelSpec& model, const RankVector& r,
                              const RankVector& r_tilde) {
  require_size(model, r, "signal_gap_closed_form");
  require_size(model, r_tilde, "signal_gap_closed_form");
  if (!model.is_linear()) {
    throw InputError("closed-form signal gap needs theta_k = alpha + beta_tilde k");
  }
  const auto n = static_cast<double>(r.size());
  double norm_sq = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r_tilde[i] - r[i];
    norm_sq += d * d;
    total += d;
  }
  const double b2 = model.beta_tilde() * model.beta_tilde();
  if (model.kind() == ModelKind::DifferentialComparison) {
    return 2.0 * n * b2 * norm_sq - 2.0 * b2 * total * total;
  }
  return b2 * (2.0 * (n - 2.0) * norm_sq + 2.0 * total * total);
}

double snr(std::size_t n, double beta, double sigma) {
  if (n < 2) throw InputError("snr needs n >= 2");
  if (!(sigma > 0.0)) throw InputError("snr needs sigma > 0");
  return static_cast<double>(n) * beta * beta / (4.0 * sigma * sigma);
}

double beta_for_snr(std::size_t n, double snr_value, double sigma) {
  if (n < 2) throw InputError("beta_for_snr needs n >= 2");
  if (!(sigma > 0.0)) throw InputError("beta_for_snr needs sigma > 0");
  if (!(snr_value >= 0.0)) throw InputError("beta_for_snr needs snr >= 0");
  return 2.0 * sigma * std::sqrt(snr_value / static_cast<double>(n));
}

}  // namespace rankphase
