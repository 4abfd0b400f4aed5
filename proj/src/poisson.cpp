#include "rankphase/poisson.hpp"

#include <math.h>

#include <cmath>
#include <limits>
#include <optional>

#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/model.hpp"

namespace rankphase {

namespace {

void check_means(const MeanMatrix& mu) {
  for (double m : mu.off_diagonal()) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InputError("Poisson means must be positive");
  }
}

void check_pair(const MeanMatrix& a, const MeanMatrix& b) {
  if (a.n() != b.n()) throw InputError("mean matrices differ in size");
  check_means(a);
  check_means(b);
}

}  // namespace

double log_factorial(std::int64_t x) {
  if (x < 0) throw InputError("log_factorial of a negative count");
  if (x < 2) return 0.0;
  int sign = 0;
  return ::lgamma_r(static_cast<double>(x) + 1.0, &sign);
}

double poisson_log_likelihood(const PoissonCounts& x, const MeanMatrix& mu) {
  if (x.n() != mu.n()) throw InputError("poisson_log_likelihood: dimension mismatch");
  check_means(mu);
  const auto counts = x.off_diagonal();
  const auto means = mu.off_diagonal();
  double total = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 0) throw InputError("Poisson counts must be nonnegative");
    total += static_cast<double>(counts[c]) * std::log(means[c]) - means[c] -
             log_factorial(counts[c]);
  }
  return total;
}

RankVector poisson_mle_brute_force(const PoissonCounts& x, const ModelSpec& model,
                                   const RankSpace& space, std::size_t n_max) {
  if (x.n() != model.n() || x.n() != space.n()) {
    throw InputError("poisson_mle_brute_force: dimension mismatch");
  }
  if (x.n() > n_max) {
    throw RefusedError("Poisson MLE enumeration refuses n = " + std::to_string(x.n()) + " > " +
                       std::to_string(n_max));
  }
  std::optional<RankVector> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for_each_rank_vector(x.n(), [&](const RankVector& r) {
    if (!space_contains(space, r)) return;
    const double ll = poisson_log_likelihood(x, build_mean_matrix(model, r));
    if (ll > best_ll) {
      best_ll = ll;
      best = r;
    }
  });
  if (!best) throw std::logic_error("rank space is empty");
  return *best;
}

double bhattacharyya_affinity(const MeanMatrix& mu, const MeanMatrix& mu_tilde) {
  check_pair(mu, mu_tilde);
  const auto a = mu.off_diagonal();
  const auto b = mu_tilde.off_diagonal();
  double exponent = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = std::sqrt(b[c]) - std::sqrt(a[c]);
    exponent += d * d;
  }
  return std::exp(-0.5 * exponent);
}

double bhattacharyya_cell_series(double mu, double mu_tilde) {
  if (!(mu > 0.0) || !(mu_tilde > 0.0)) throw InputError("Poisson means must be positive");
  // sqrt(p(x|mu) p(x|mu~)) = exp(-(mu + mu~)/2) g^x / x!, g = sqrt(mu mu~).
  const double g = std::sqrt(mu * mu_tilde);
  const double half_total = 0.5 * (mu + mu_tilde);
  const auto start = static_cast<std::int64_t>(std::floor(g));
  const double log_start =
      static_cast<double>(start) * std::log(g) - log_factorial(start) - half_total;
  const double start_term = std::exp(log_start);
  const double past_modes = std::max(std::floor(mu), std::floor(mu_tilde));

  double upward = 0.0;
  double term = start_term;
  for (std::int64_t x = start + 1;; ++x) {
    term *= g / static_cast<double>(x);
    upward += term;
    if (term < 1e-16 && static_cast<double>(x) > past_modes) break;
  }
  double downward = 0.0;
  term = start_term;
  for (std::int64_t x = start; x > 0; --x) {
    term *= static_cast<double>(x) / g;
    downward += term;
    if (term == 0.0) break;
  }
  return downward + start_term + upward;
}

double bhattacharyya_affinity_series(const MeanMatrix& mu, const MeanMatrix& mu_tilde) {
  check_pair(mu, mu_tilde);
  const auto a = mu.off_diagonal();
  const auto b = mu_tilde.off_diagonal();
  double product = 1.0;
  for (std::size_t c = 0; c < a.size(); ++c) product *= bhattacharyya_cell_series(a[c], b[c]);
  return product;
}

}  // namespace rankphase
