#include "rankphase/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/model.hpp"
#include "rankphase/poisson.hpp"

namespace rankphase {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t grid_index, std::uint64_t rep) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (grid_index * 0xD6E8FEB86659FD93ULL));
  h = splitmix64(h ^ (rep * 0xA0761D6478BD642FULL));
  return h;
}

InteractionMatrix generate_gaussian(const ModelSpec& model, const RankVector& r, double sigma,
                                    std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InputError("generate_gaussian needs sigma >= 0");
  }
  InteractionMatrix x = build_mean_matrix(model, r);
  if (sigma == 0.0) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) x(i, j) += noise(rng);
    }
  }
  return x;
}

PoissonCounts generate_poisson(const ModelSpec& model, const RankVector& r, std::uint64_t seed) {
  if (!model.is_poisson()) throw InputError("generate_poisson needs a Poisson model");
  const MeanMatrix mu = build_mean_matrix(model, r);
  const std::size_t n = r.size();
  PoissonCounts counts(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      std::poisson_distribution<std::int64_t> draw(mu(i, j));
      counts(i, j) = draw(rng);
    }
  }
  return counts;
}

RankVector random_feasible_rank(const RankSpace& space, std::uint64_t seed,
                                std::optional<std::size_t> perturbation_steps) {
  const std::size_t n = space.n();
  std::mt19937_64 rng(seed);
  std::vector<int> r(n);
  std::iota(r.begin(), r.end(), 1);
  std::shuffle(r.begin(), r.end(), rng);
  std::int64_t sum = space.identity_sum();
  std::int64_t sum_sq = space.identity_sum_of_squares();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::bernoulli_distribution up(0.5);
  const std::size_t steps = perturbation_steps.value_or(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t i = pick(rng);
    const int dir = up(rng) ? 1 : -1;
    const int v = r[i] + dir;
    if (v < 1 || v > static_cast<int>(n)) continue;
    const std::int64_t new_sum = sum + dir;
    const std::int64_t new_sq =
        sum_sq + static_cast<std::int64_t>(v) * v - static_cast<std::int64_t>(r[i]) * r[i];
    if (!space.sum_ok(new_sum) || !space.sum_of_squares_ok(new_sq)) continue;
    r[i] = v;
    sum = new_sum;
    sum_sq = new_sq;
  }
  return RankVector(std::move(r));
}

double estimate_beta_squared(const ModelSpec& model, const RankSpace& space, std::size_t pairs,
                             std::uint64_t seed) {
  if (model.n() != space.n()) throw InputError("estimate_beta_squared: size mismatch");
  double best = std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(space.n());
  for (std::size_t p = 0; p < pairs; ++p) {
    const RankVector r = random_feasible_rank(space, derive_seed(seed, p, 0));
    const RankVector rt = random_feasible_rank(space, derive_seed(seed, p, 1));
    double dist = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = rt[i] - r[i];
      dist += d * d;
    }
    if (dist == 0.0) continue;
    best = std::min(best, signal_gap(model, r, rt) / (2.0 * n * dist));
  }
  return best;
}

std::string to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::FeatureMatchOracleTheta: return "feature_match_oracle_theta";
    case Estimator::ProfileLsAdaptive: return "profile_ls_adaptive";
    case Estimator::BruteForce: return "brute_force";
  }
  return "unknown";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "feature_match_oracle_theta") return Estimator::FeatureMatchOracleTheta;
  if (name == "profile_ls_adaptive") return Estimator::ProfileLsAdaptive;
  if (name == "brute_force") return Estimator::BruteForce;
  throw ConfigError("estimator: unknown value '" + name + "'");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "differential") return ModelKind::DifferentialComparison;
  if (name == "additive") return ModelKind::AdditiveCollaboration;
  if (name == "poisson") return ModelKind::PoissonSqrtLinear;
  throw ConfigError("model: unknown value '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (n < 3) throw ConfigError("n: must be >= 3");
  if (reps < 1) throw ConfigError("reps: must be >= 1");
  if (snr_grid.empty() && beta_grid.empty()) {
    throw ConfigError("snr_grid: one of snr_grid or beta_grid must be non-empty");
  }
  for (double s : snr_grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("snr_grid: values must be > 0");
  }
  if (snr_grid.empty()) {
    for (double b : beta_grid) {
      if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("beta_grid: values must be > 0");
    }
  }
  if (q_list.empty()) throw ConfigError("q_list: must not be empty");
  for (double q : q_list) {
    if (!(q >= 0.0 && q <= 2.0)) throw ConfigError("q_list: values must lie in [0, 2]");
  }
  if (model != ModelKind::PoissonSqrtLinear) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma: must be >= 0");
    if (sigma == 0.0 && !snr_grid.empty()) {
      throw ConfigError("sigma: zero noise needs beta_grid, SNR is unbounded");
    }
  }
  if (model == ModelKind::PoissonSqrtLinear && estimator != Estimator::BruteForce) {
    throw ConfigError("estimator: the Poisson model only supports brute_force");
  }
  if (estimator == Estimator::BruteForce && n > 6) {
    throw ConfigError("estimator: brute_force needs n <= 6");
  }
  if (c_n && *c_n < 1) throw ConfigError("c_n: must be >= 1");
  if (c_n_sq) {
    const auto m = static_cast<std::int64_t>(n);
    if (*c_n_sq < 0 || *c_n_sq >= m * m * m) throw ConfigError("c_n_sq: must lie in [0, n^3)");
  }
}

RankSpace ExperimentConfig::space() const {
  if (estimator == Estimator::ProfileLsAdaptive) return RankSpace::restricted(n, c_n, c_n_sq);
  return RankSpace::standard(n, c_n);
}

std::size_t ExperimentConfig::grid_size() const {
  return snr_grid.empty() ? beta_grid.size() : snr_grid.size();
}

double ExperimentConfig::grid_snr(std::size_t g) const {
  if (!snr_grid.empty()) return snr_grid[g];
  const double b = beta_grid[g];
  const auto nd = static_cast<double>(n);
  if (model == ModelKind::PoissonSqrtLinear) return nd * b * b;
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  return snr(n, b, sigma);
}

double ExperimentConfig::grid_beta(std::size_t g) const {
  if (snr_grid.empty()) return beta_grid[g];
  if (model == ModelKind::PoissonSqrtLinear) {
    return std::sqrt(snr_grid[g] / static_cast<double>(n));
  }
  return beta_for_snr(n, snr_grid[g], sigma);
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("RANK_PHASE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

ModelSpec experiment_model(const ExperimentConfig& config, double beta) {
  switch (config.model) {
    case ModelKind::DifferentialComparison:
      return ModelSpec::differential_linear(config.n, config.alpha, beta);
    case ModelKind::AdditiveCollaboration:
      return ModelSpec::additive_linear(config.n, config.alpha, beta);
    case ModelKind::PoissonSqrtLinear: {
      const auto nd = static_cast<double>(config.n);
      return ModelSpec::poisson_sqrt_linear(config.n, beta * nd * nd, beta);
    }
  }
  throw std::logic_error("unhandled model kind");
}

ResultRow run_replication(const ExperimentConfig& config, const RankSpace& space,
                          std::size_t g, std::size_t rep) {
  const auto started = std::chrono::steady_clock::now();
  ResultRow row;
  row.model = config.model;
  row.n = config.n;
  row.snr = config.grid_snr(g);
  row.beta = config.grid_beta(g);
  row.sigma = config.model == ModelKind::PoissonSqrtLinear ? 0.0 : config.sigma;
  row.estimator = config.estimator;
  row.grid_index = g;
  row.rep = rep;
  row.seed = derive_seed(config.master_seed, g, rep);

  std::mt19937_64 streams(row.seed);
  const std::uint64_t rank_seed = streams();
  const std::uint64_t data_seed = streams();
  const RankVector truth = config.true_rank == TrueRankPolicy::Identity
                               ? RankVector::identity(config.n)
                               : random_feasible_rank(space, rank_seed);
  const ModelSpec model = experiment_model(config, row.beta);
  const ScoreKind kind = config.model == ModelKind::AdditiveCollaboration
                             ? ScoreKind::Collaboration
                             : ScoreKind::Comparison;

  RankVector estimate;
  if (config.model == ModelKind::PoissonSqrtLinear) {
    const PoissonCounts x = generate_poisson(model, truth, data_seed);
    estimate = poisson_mle_brute_force(x, model, space);
  } else {
    const InteractionMatrix x = generate_gaussian(model, truth, config.sigma, data_seed);
    switch (config.estimator) {
      case Estimator::FeatureMatchOracleTheta: {
        const ScoreVector s = kind == ScoreKind::Comparison ? score_comparison(x, model.theta())
                                                            : score_collaboration(x);
        estimate = feature_match(s, model.theta(), space);
        row.iterations = 1;
        break;
      }
      case Estimator::ProfileLsAdaptive: {
        const ScoreVector s = score_adaptive(x, kind);
        ProfileEstimate fit = profile_ls_estimate(s, space);
        row.iterations = fit.trace.iterations;
        estimate = std::move(fit.rank);
        break;
      }
      case Estimator::BruteForce:
        estimate = lse_brute_force(x, model, space);
        break;
    }
  }

  row.q = config.q_list;
  for (double q : config.q_list) row.losses.push_back(loss(q, estimate, truth));
  row.exact_recovery = estimate == truth;
  if (config.record_timing) {
    row.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  }
  return row;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, std::size_t workers) {
  config.validate();
  const RankSpace space = config.space();
  const std::size_t grid = config.grid_size();
  const std::size_t total = grid * config.reps;
  std::vector<ResultRow> rows(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      try {
        rows[t] = run_replication(config, space, t / config.reps, t % config.reps);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };

  const std::size_t count = std::min(workers == 0 ? default_worker_count() : workers,
                                     std::max<std::size_t>(total, 1));
  if (count <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Trivial: return "trivial";
    case Regime::Polynomial: return "polynomial";
    case Regime::Exponential: return "exponential";
    case Regime::ExactRecovery: return "exact";
  }
  return "unknown";
}

Regime classify_regime(double snr_value, std::size_t n) {
  const auto nd = static_cast<double>(n);
  if (snr_value <= 1.0 / (nd * nd)) return Regime::Trivial;
  if (snr_value <= 1.0) return Regime::Polynomial;
  if (snr_value <= std::log(nd)) return Regime::Exponential;
  return Regime::ExactRecovery;
}

const LossSummary* GridPointSummary::loss_for(double q) const {
  for (const auto& l : losses) {
    if (l.q == q) return &l;
  }
  return nullptr;
}

const SlopeFit* RegimeReport::fit_for(const std::string& regime, double q) const {
  for (const auto& f : fits) {
    if (f.regime == regime && f.q == q) return &f;
  }
  return nullptr;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw InputError("fit_line needs at least 3 paired points");
  }
  const auto m = static_cast<double>(x.size());
  const double x_mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - x_mean) * (x[i] - x_mean);
    sxy += (x[i] - x_mean) * (y[i] - y_mean);
    syy += (y[i] - y_mean) * (y[i] - y_mean);
  }
  if (sxx == 0.0) throw InputError("fit_line: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    ssr += e * e;
  }
  fit.slope_se = std::sqrt(ssr / (m - 2.0) / sxx);
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

std::vector<GridPointSummary> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::size_t, double>, std::vector<const ResultRow*>> groups;
  for (const auto& row : rows) groups[{row.n, row.snr}].push_back(&row);

  std::vector<GridPointSummary> out;
  for (const auto& [key, members] : groups) {
    GridPointSummary point;
    point.n = key.first;
    point.snr = key.second;
    point.regime = classify_regime(point.snr, point.n);
    point.reps = members.size();
    std::size_t recovered = 0;
    for (const auto* row : members) recovered += row->exact_recovery ? 1 : 0;
    point.recovery_rate = static_cast<double>(recovered) / static_cast<double>(members.size());
    const auto& qs = members.front()->q;
    for (std::size_t k = 0; k < qs.size(); ++k) {
      std::vector<double> values;
      values.reserve(members.size());
      for (const auto* row : members) {
        if (k < row->losses.size()) values.push_back(row->losses[k]);
      }
      LossSummary s;
      s.q = qs[k];
      const auto m = static_cast<double>(values.size());
      s.mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.std_error = values.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
      std::sort(values.begin(), values.end());
      const std::size_t mid = values.size() / 2;
      s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
      point.losses.push_back(s);
    }
    out.push_back(std::move(point));
  }
  return out;
}

RegimeReport fit_regimes(const std::vector<ResultRow>& rows) {
  RegimeReport report;
  report.grid = summarize(rows);
  for (const auto& point : report.grid) {
    report.recovery_curve.emplace_back(point.snr / std::log(static_cast<double>(point.n)),
                                       point.recovery_rate);
  }
  if (report.grid.empty()) {
    report.gaps.push_back("no result rows");
    return report;
  }

  std::vector<double> qs;
  for (const auto& l : report.grid.front().losses) qs.push_back(l.q);

  for (double q : qs) {
    for (const std::string regime : {"exponential", "polynomial"}) {
      SlopeFit fit;
      fit.regime = regime;
      fit.q = q;
      std::vector<double> x, y;
      std::size_t zero_means = 0;
      for (const auto& point : report.grid) {
        const bool in_regime =
            regime == "exponential"
                ? (point.regime == Regime::Exponential || point.regime == Regime::ExactRecovery)
                : point.regime == Regime::Polynomial;
        if (!in_regime) continue;
        const LossSummary* l = point.loss_for(q);
        if (l == nullptr) continue;
        if (!(l->mean > 0.0)) {
          ++zero_means;
          continue;
        }
        fit.snr_points.push_back(point.snr);
        x.push_back(regime == "exponential" ? point.snr : std::log(point.snr));
        y.push_back(std::log(l->mean));
      }
      if (x.size() >= 3) {
        fit.line = fit_line(x, y);
        fit.ok = true;
      } else {
        fit.note = "only " + std::to_string(x.size()) + " usable grid points";
        if (zero_means) fit.note += " (" + std::to_string(zero_means) + " with zero mean loss)";
        report.gaps.push_back(regime + " fit for q=" + std::to_string(q) + ": " + fit.note);
      }
      report.fits.push_back(std::move(fit));
    }
  }
  return report;
}

}  // namespace rankphase
