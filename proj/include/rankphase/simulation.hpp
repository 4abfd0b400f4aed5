#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rankphase/types.hpp"

namespace rankphase {

// Stable 64-bit mix of (master seed, grid index, replication index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t grid_index, std::uint64_t rep);

// X = mu(r) + Z with Z i.i.d. N(0, sigma^2), drawn in row-major order.
// sigma == 0 returns the mean matrix exactly.
InteractionMatrix generate_gaussian(const ModelSpec& model, const RankVector& r, double sigma,
                                    std::uint64_t seed);

// Independent Poisson(mu_{r(i) r(j)}) counts.
PoissonCounts generate_poisson(const ModelSpec& model, const RankVector& r, std::uint64_t seed);

// Uniform permutation followed by random +-1 moves that are kept only while
// the result stays inside the space. Defaults to n moves.
RankVector random_feasible_rank(const RankSpace& space, std::uint64_t seed,
                                std::optional<std::size_t> perturbation_steps = std::nullopt);

// min over random pairs (r, r~) in the space of signal_gap / (2 n |r~ - r|^2).
double estimate_beta_squared(const ModelSpec& model, const RankSpace& space, std::size_t pairs,
                             std::uint64_t seed);

enum class Estimator { FeatureMatchOracleTheta, ProfileLsAdaptive, BruteForce };
enum class TrueRankPolicy { Identity, RandomFeasible };

std::string to_string(Estimator estimator);
Estimator parse_estimator(const std::string& name);
ModelKind parse_model_kind(const std::string& name);

struct ExperimentConfig {
  ModelKind model = ModelKind::DifferentialComparison;
  std::size_t n = 100;
  double sigma = 1.0;
  double alpha = 0.0;
  // Exactly one of the two grids is used; snr_grid wins when both are set.
  std::vector<double> snr_grid;
  std::vector<double> beta_grid;
  std::vector<double> q_list{2.0};
  std::size_t reps = 1;
  std::uint64_t master_seed = 1;
  Estimator estimator = Estimator::FeatureMatchOracleTheta;
  std::optional<std::int64_t> c_n;
  std::optional<std::int64_t> c_n_sq;
  TrueRankPolicy true_rank = TrueRankPolicy::Identity;
  bool record_timing = false;

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Sum-only space for feature matching and enumeration, sum and
  // sum-of-squares space for the profile estimator.
  RankSpace space() const;
  std::size_t grid_size() const;
  double grid_snr(std::size_t g) const;
  double grid_beta(std::size_t g) const;
};

struct ResultRow {
  ModelKind model = ModelKind::DifferentialComparison;
  std::size_t n = 0;
  double snr = 0.0;
  double beta = 0.0;
  double sigma = 0.0;
  Estimator estimator = Estimator::FeatureMatchOracleTheta;
  std::size_t grid_index = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<double> q;
  std::vector<double> losses;  // aligned with q
  bool exact_recovery = false;
  int iterations = 0;
  double wall_time_ms = 0.0;
};

// RANK_PHASE_THREADS when set to a positive integer, else hardware concurrency.
std::size_t default_worker_count();

// Rows sorted by (grid index, rep) whatever the worker count.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, std::size_t workers = 0);

enum class Regime { Trivial, Polynomial, Exponential, ExactRecovery };

std::string to_string(Regime regime);

// Trivial: snr <= n^-2; polynomial: <= 1; exponential: <= log n; exact above.
Regime classify_regime(double snr, std::size_t n);

struct LossSummary {
  double q = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std_error = 0.0;
};

struct GridPointSummary {
  std::size_t n = 0;
  double snr = 0.0;
  Regime regime = Regime::Trivial;
  std::size_t reps = 0;
  std::vector<LossSummary> losses;
  double recovery_rate = 0.0;

  const LossSummary* loss_for(double q) const;
};

struct LineFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of y on x; needs at least 3 points.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct SlopeFit {
  std::string regime;  // "exponential" (log loss vs snr) or "polynomial" (log-log)
  double q = 0.0;
  bool ok = false;
  LineFit line;
  std::vector<double> snr_points;
  std::string note;
};

struct RegimeReport {
  std::vector<GridPointSummary> grid;
  std::vector<SlopeFit> fits;
  // (snr / log n, exact recovery rate) per grid point.
  std::vector<std::pair<double, double>> recovery_curve;
  std::vector<std::string> gaps;

  const SlopeFit* fit_for(const std::string& regime, double q) const;
};

// Groups rows by (n, snr), ordered by snr.
std::vector<GridPointSummary> summarize(const std::vector<ResultRow>& rows);

// Slope fits on mean losses: log(mean) vs snr over snr > 1 and log(mean) vs
// log(snr) over the polynomial regime. Points with zero mean cannot enter a
// log fit; fits with fewer than 3 points are reported as gaps.
RegimeReport fit_regimes(const std::vector<ResultRow>& rows);

}  // namespace rankphase
