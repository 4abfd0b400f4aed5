#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankphase {

// Latent positions r(1..n), each in [1, n]. Ties are allowed.
class RankVector {
 public:
  RankVector() = default;
  explicit RankVector(std::vector<int> entries);

  static RankVector identity(std::size_t n);

  std::size_t size() const { return entries_.size(); }
  int operator[](std::size_t i) const { return entries_[i]; }
  std::span<const int> entries() const { return entries_; }

  std::int64_t sum() const;
  std::int64_t sum_of_squares() const;
  bool is_constant() const;
  bool is_permutation() const;
  bool has_tie() const { return !is_permutation(); }

  std::string to_string() const;

  friend auto operator<=>(const RankVector&, const RankVector&) = default;

 private:
  std::vector<int> entries_;
};

// Feasible rank set: |sum r - sum i| <= c_n and, when present,
// |sum r^2 - sum i^2| <= c_n_sq.
class RankSpace {
 public:
  // Throws InputError when c_n < 1, n < 2 or c_n_sq >= n^3.
  RankSpace(std::size_t n, std::int64_t c_n,
            std::optional<std::int64_t> c_n_sq = std::nullopt);

  // Sum-only space with c_n = ceil(n^{1/4}) unless given.
  static RankSpace standard(std::size_t n,
                            std::optional<std::int64_t> c_n = std::nullopt);
  // Sum and sum-of-squares space; defaults c_n = ceil(n^{1/4}),
  // c_n_sq = ceil(n^{3/2}).
  static RankSpace restricted(std::size_t n,
                              std::optional<std::int64_t> c_n = std::nullopt,
                              std::optional<std::int64_t> c_n_sq = std::nullopt);

  std::size_t n() const { return n_; }
  std::int64_t c_n() const { return c_n_; }
  const std::optional<std::int64_t>& c_n_sq() const { return c_n_sq_; }
  bool has_square_budget() const { return c_n_sq_.has_value(); }

  // sum_{i=1}^n i and sum_{i=1}^n i^2.
  std::int64_t identity_sum() const;
  std::int64_t identity_sum_of_squares() const;

  bool sum_ok(std::int64_t sum) const;
  bool sum_of_squares_ok(std::int64_t sum_sq) const;

 private:
  std::size_t n_;
  std::int64_t c_n_;
  std::optional<std::int64_t> c_n_sq_;
};

std::int64_t default_sum_budget(std::size_t n);
std::int64_t default_square_budget(std::size_t n);

// n x n matrix whose diagonal is not stored. Reading (i, i) throws.
template <typename T>
class OffDiagonalMatrix {
 public:
  OffDiagonalMatrix() = default;
  explicit OffDiagonalMatrix(std::size_t n, T fill = T{})
      : n_(n), values_(n == 0 ? 0 : n * (n - 1), fill) {}

  std::size_t n() const { return n_; }

  T& operator()(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return values_[index(i, j)];
  }

  // Off-diagonal entries in row-major order, diagonal skipped.
  std::span<const T> off_diagonal() const { return values_; }

  friend bool operator==(const OffDiagonalMatrix&,
                         const OffDiagonalMatrix&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i == j || i >= n_ || j >= n_) {
      throw std::out_of_range("off-diagonal access (" + std::to_string(i) +
                              ", " + std::to_string(j) + ")");
    }
    return i * (n_ - 1) + (j < i ? j : j - 1);
  }

  std::size_t n_ = 0;
  std::vector<T> values_;
};

using InteractionMatrix = OffDiagonalMatrix<double>;
using MeanMatrix = OffDiagonalMatrix<double>;
using PoissonCounts = OffDiagonalMatrix<std::int64_t>;

enum class ModelKind { DifferentialComparison, AdditiveCollaboration, PoissonSqrtLinear };

std::string to_string(ModelKind kind);

// Mean structure mu_{ab} over latent positions a, b in [1, n].
//   Differential:  mu_ab = theta_a - theta_b
//   Additive:      mu_ab = theta_a + theta_b
//   Poisson:       sqrt(mu_ab) = theta_a + theta_b, theta_k = alpha + beta_tilde k
class ModelSpec {
 public:
  static ModelSpec differential(std::vector<double> theta);
  static ModelSpec additive(std::vector<double> theta);
  static ModelSpec differential_linear(std::size_t n, double alpha, double beta_tilde);
  static ModelSpec additive_linear(std::size_t n, double alpha, double beta_tilde);
  // Throws InputError unless 2 alpha + beta_tilde (a + b) > 0 on [1, n]^2.
  static ModelSpec poisson_sqrt_linear(std::size_t n, double alpha, double beta_tilde);

  ModelKind kind() const { return kind_; }
  std::size_t n() const { return theta_.size(); }
  std::span<const double> theta() const { return theta_; }
  double theta_at(int rank) const { return theta_[static_cast<std::size_t>(rank - 1)]; }
  bool is_linear() const { return linear_; }
  double alpha() const { return alpha_; }
  double beta_tilde() const { return beta_tilde_; }
  bool is_poisson() const { return kind_ == ModelKind::PoissonSqrtLinear; }

  double mean(int a, int b) const;
  // sqrt(mu_ab) for the Poisson model; mu_ab otherwise.
  double signal_coordinate(int a, int b) const;

 private:
  ModelSpec(ModelKind kind, std::vector<double> theta, bool linear, double alpha,
            double beta_tilde);

  ModelKind kind_;
  std::vector<double> theta_;
  bool linear_;
  double alpha_;
  double beta_tilde_;
};

enum class NoiseFamily { Gaussian, Poisson };

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double sigma = 1.0;

  static NoiseSpec gaussian(double sigma);
  static NoiseSpec poisson() { return NoiseSpec{NoiseFamily::Poisson, 0.0}; }
};

}  // namespace rankphase
