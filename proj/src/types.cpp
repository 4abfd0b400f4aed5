#include "rankphase/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rankphase/errors.hpp"

namespace rankphase {

RankVector::RankVector(std::vector<int> entries) : entries_(std::move(entries)) {
  const auto n = static_cast<int>(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i] < 1 || entries_[i] > n) {
      throw InputError("rank entry " + std::to_string(i + 1) + " = " +
                       std::to_string(entries_[i]) + " outside [1, " +
                       std::to_string(n) + "]");
    }
  }
}

RankVector RankVector::identity(std::size_t n) {
  std::vector<int> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = static_cast<int>(i + 1);
  return RankVector(std::move(e));
}

std::int64_t RankVector::sum() const {
  std::int64_t s = 0;
  for (int v : entries_) s += v;
  return s;
}

std::int64_t RankVector::sum_of_squares() const {
  std::int64_t s = 0;
  for (int v : entries_) s += static_cast<std::int64_t>(v) * v;
  return s;
}

bool RankVector::is_constant() const {
  return std::adjacent_find(entries_.begin(), entries_.end(),
                            std::not_equal_to<>()) == entries_.end();
}

bool RankVector::is_permutation() const {
  std::vector<char> seen(entries_.size() + 1, 0);
  for (int v : entries_) {
    if (seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return true;
}

std::string RankVector::to_string() const {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out << ',';
    out << entries_[i];
  }
  out << ')';
  return out.str();
}

// Smallest c >= 1 with c^4 >= n.
std::int64_t default_sum_budget(std::size_t n) {
  std::int64_t c = 1;
  const auto target = static_cast<std::int64_t>(n);
  while (c * c * c * c < target) ++c;
  return c;
}

// Smallest c >= 1 with c^2 >= n^3.
std::int64_t default_square_budget(std::size_t n) {
  const auto m = static_cast<std::int64_t>(n);
  const std::int64_t target = m * m * m;
  auto c = static_cast<std::int64_t>(std::sqrt(static_cast<double>(target)));
  while (c > 1 && (c - 1) * (c - 1) >= target) --c;
  while (c * c < target) ++c;
  return std::max<std::int64_t>(c, 1);
}

RankSpace::RankSpace(std::size_t n, std::int64_t c_n, std::optional<std::int64_t> c_n_sq)
    : n_(n), c_n_(c_n), c_n_sq_(c_n_sq) {
  if (n < 2) throw InputError("rank space needs n >= 2");
  if (c_n < 1) throw InputError("sum budget c_n must be >= 1");
  if (c_n_sq) {
    const auto m = static_cast<std::int64_t>(n);
    if (*c_n_sq < 0) throw InputError("sum-of-squares budget must be >= 0");
    if (*c_n_sq >= m * m * m) throw InputError("sum-of-squares budget must be < n^3");
  }
}

RankSpace RankSpace::standard(std::size_t n, std::optional<std::int64_t> c_n) {
  return RankSpace(n, c_n.value_or(default_sum_budget(n)));
}

RankSpace RankSpace::restricted(std::size_t n, std::optional<std::int64_t> c_n,
                                std::optional<std::int64_t> c_n_sq) {
  return RankSpace(n, c_n.value_or(default_sum_budget(n)),
                   c_n_sq.value_or(default_square_budget(n)));
}

std::int64_t RankSpace::identity_sum() const {
  const auto m = static_cast<std::int64_t>(n_);
  return m * (m + 1) / 2;
}

std::int64_t RankSpace::identity_sum_of_squares() const {
  const auto m = static_cast<std::int64_t>(n_);
  return m * (m + 1) * (2 * m + 1) / 6;
}

bool RankSpace::sum_ok(std::int64_t sum) const {
  const std::int64_t d = sum - identity_sum();
  return (d < 0 ? -d : d) <= c_n_;
}

bool RankSpace::sum_of_squares_ok(std::int64_t sum_sq) const {
  if (!c_n_sq_) return true;
  const std::int64_t d = sum_sq - identity_sum_of_squares();
  return (d < 0 ? -d : d) <= *c_n_sq_;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::DifferentialComparison: return "differential";
    case ModelKind::AdditiveCollaboration: return "additive";
    case ModelKind::PoissonSqrtLinear: return "poisson";
  }
  return "unknown";
}

namespace {

std::vector<double> linear_theta(std::size_t n, double alpha, double beta_tilde) {
  std::vector<double> theta(n);
  for (std::size_t k = 0; k < n; ++k) {
    theta[k] = alpha + beta_tilde * static_cast<double>(k + 1);
  }
  return theta;
}

void check_theta(const std::vector<double>& theta) {
  if (theta.size() < 2) throw InputError("theta needs at least 2 entries");
  for (double t : theta) {
    if (!std::isfinite(t)) throw InputError("theta entries must be finite");
  }
}

}  // namespace

ModelSpec::ModelSpec(ModelKind kind, std::vector<double> theta, bool linear, double alpha,
                     double beta_tilde)
    : kind_(kind), theta_(std::move(theta)), linear_(linear), alpha_(alpha),
      beta_tilde_(beta_tilde) {}

ModelSpec ModelSpec::differential(std::vector<double> theta) {
  check_theta(theta);
  return ModelSpec(ModelKind::DifferentialComparison, std::move(theta), false, 0.0, 0.0);
}

ModelSpec ModelSpec::additive(std::vector<double> theta) {
  check_theta(theta);
  return ModelSpec(ModelKind::AdditiveCollaboration, std::move(theta), false, 0.0, 0.0);
}

ModelSpec ModelSpec::differential_linear(std::size_t n, double alpha, double beta_tilde) {
  auto theta = linear_theta(n, alpha, beta_tilde);
  check_theta(theta);
  return ModelSpec(ModelKind::DifferentialComparison, std::move(theta), true, alpha,
                   beta_tilde);
}

ModelSpec ModelSpec::additive_linear(std::size_t n, double alpha, double beta_tilde) {
  auto theta = linear_theta(n, alpha, beta_tilde);
  check_theta(theta);
  return ModelSpec(ModelKind::AdditiveCollaboration, std::move(theta), true, alpha,
                   beta_tilde);
}

ModelSpec ModelSpec::poisson_sqrt_linear(std::size_t n, double alpha, double beta_tilde) {
  auto theta = linear_theta(n, alpha, beta_tilde);
  check_theta(theta);
  const double lo = 2.0 * alpha + beta_tilde * 2.0;
  const double hi = 2.0 * alpha + beta_tilde * 2.0 * static_cast<double>(n);
  if (!(lo > 0.0) || !(hi > 0.0)) {
    throw InputError("Poisson sqrt-linear means must be strictly positive");
  }
  return ModelSpec(ModelKind::PoissonSqrtLinear, std::move(theta), true, alpha, beta_tilde);
}

double ModelSpec::mean(int a, int b) const {
  const double ta = theta_at(a);
  const double tb = theta_at(b);
  switch (kind_) {
    case ModelKind::DifferentialComparison: return ta - tb;
    case ModelKind::AdditiveCollaboration: return ta + tb;
    case ModelKind::PoissonSqrtLinear: return (ta + tb) * (ta + tb);
  }
  return 0.0;
}

double ModelSpec::signal_coordinate(int a, int b) const {
  if (kind_ == ModelKind::PoissonSqrtLinear) return theta_at(a) + theta_at(b);
  return mean(a, b);
}

NoiseSpec NoiseSpec::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError("Gaussian noise needs sigma > 0");
  }
  return NoiseSpec{NoiseFamily::Gaussian, sigma};
}

}  // namespace rankphase
