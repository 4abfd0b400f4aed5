#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rankphase/types.hpp"

namespace rankphase {

// One score per object.
using ScoreVector = std::vector<double>;

enum class ScoreKind { Comparison, Collaboration };

// S_i = (1/2n) sum_{j != i} (X_ij - X_ji) + mean(theta).
ScoreVector score_comparison(const InteractionMatrix& x, std::span<const double> theta);

// S_i = (sum_{j != i} (X_ij + X_ji) - grand_sum / (n - 1)) / (2 (n - 2)).
ScoreVector score_collaboration(const InteractionMatrix& x);

// Scores that need no ability parameters; used by the profile estimator.
ScoreVector score_adaptive(const InteractionMatrix& x, ScoreKind kind);

// sum_i (S_i - theta_{r(i)})^2, accumulated in index order.
double feature_match_objective(std::span<const double> scores, std::span<const double> theta,
                               const RankVector& r);

// Exact minimizer of feature_match_objective over the rank space.
//
// The per-coordinate minimizer (ties to the smallest position) is returned
// when it is feasible. Otherwise the budgets are repaired exactly: with
// convex per-coordinate costs and only a sum budget, by greedy unit moves;
// in every other case, by a dynamic program over coordinates whose state is
// the partial (sum, sum of squares), pruned by branch and bound against a
// geometrically growing cost ceiling.
RankVector feature_match(std::span<const double> scores, std::span<const double> theta,
                         const RankSpace& space);

// Reference minimizer by enumeration of [n]^n; refuses n > n_max.
RankVector feature_match_exhaustive(std::span<const double> scores,
                                    std::span<const double> theta, const RankSpace& space,
                                    std::size_t n_max = 6);

struct OlsFit {
  double a_hat = 0.0;
  double b_hat = 0.0;
};

// Least squares of S on (1, r). Throws DegenerateFitError for constant r.
OlsFit ols_fit(std::span<const double> scores, const RankVector& r);

// min_{a,b} sum_i (S_i - a - b r(i))^2 through the OLS closed form.
double profile_ls_objective(std::span<const double> scores, const RankVector& r);

// Row-major n x n matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

// Orthogonal projector onto span{1, r}. Throws DegenerateFitError for constant r.
DenseMatrix hat_matrix(const RankVector& r);

// |(I - H_r) S|^2.
double hat_residual_norm_sq(std::span<const double> scores, const RankVector& r);

struct IterationTrace {
  int iterations = 0;
  std::vector<double> objective_path;
  bool converged = false;
  bool nonpositive_slope_seen = false;
  RankVector final_rank;
};

struct ProfileOptions {
  int max_iters = 100;
  double tolerance = 1e-10;
  std::optional<RankVector> init;
};

struct ProfileEstimate {
  RankVector rank;
  OlsFit fit;
  double objective = 0.0;
  IterationTrace trace;
};

// Alternates feature matching against the surrogate a + b k with OLS refits.
// Requires a space with a sum-of-squares budget. The default start ranks
// objects by ascending score, ties by index. Throws DegenerateFitError when
// the scores are all equal.
ProfileEstimate profile_ls_estimate(std::span<const double> scores, const RankSpace& space,
                                    const ProfileOptions& options = {});

// Minimizer of profile_ls_objective over non-constant members of the space,
// by enumeration.
RankVector profile_ls_exhaustive(std::span<const double> scores, const RankSpace& space,
                                 std::size_t n_max = 6);

// sum_{i != j} (X_ij - mu_{r(i) r(j)})^2.
double lse_objective(const InteractionMatrix& x, const ModelSpec& model, const RankVector& r);

// Exact least-squares estimate by enumeration, lexicographic tie-break.
// Throws RefusedError when n > n_max.
RankVector lse_brute_force(const InteractionMatrix& x, const ModelSpec& model,
                           const RankSpace& space, std::size_t n_max = 6);

// Visits every r in [n]^n in lexicographic order.
void for_each_rank_vector(std::size_t n, const std::function<void(const RankVector&)>& visit);

}  // namespace rankphase
