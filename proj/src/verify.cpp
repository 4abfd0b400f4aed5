#include "rankphase/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/model.hpp"
#include "rankphase/poisson.hpp"
#include "rankphase/simulation.hpp"

namespace rankphase {

namespace {

const std::vector<std::string>& names() {
  static const std::vector<std::string> list{
      "differential-gap",     "additive-gap",        "poisson-gap",
      "score-comparison",     "score-collaboration", "score-adaptive",
      "hat-matrix",           "pl-consistency",      "bhattacharyya-series",
      "loss-properties",      "signal-condition",    "lse-feature-match-link",
  };
  return list;
}

class Tracker {
 public:
  Tracker(IdentityResult& result) : result_(result) {}

  void record(double deviation, std::uint64_t seed, const std::string& what) {
    ++result_.checks;
    if (!std::isfinite(deviation)) deviation = std::numeric_limits<double>::infinity();
    result_.max_deviation = std::max(result_.max_deviation, deviation);
    if (deviation > result_.tolerance && result_.passed) {
      result_.passed = false;
      result_.failing_seed = seed;
      std::ostringstream msg;
      msg << what << ": deviation " << deviation << " exceeds " << result_.tolerance;
      result_.detail = msg.str();
    }
  }

 private:
  IdentityResult& result_;
};

RankVector uniform_rank(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(1, static_cast<int>(n));
  std::vector<int> r(n);
  for (auto& v : r) v = pick(rng);
  return RankVector(std::move(r));
}

RankVector nonconstant_rank(std::size_t n, std::mt19937_64& rng) {
  for (;;) {
    RankVector r = uniform_rank(n, rng);
    if (!r.is_constant()) return r;
  }
}

RankVector neighbor_of(const RankVector& r, std::mt19937_64& rng) {
  const std::size_t n = r.size();
  std::vector<int> e(r.entries().begin(), r.entries().end());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t i = pick(rng);
  e[i] = e[i] == static_cast<int>(n) ? e[i] - 1 : (e[i] == 1 ? 2 : e[i] + (rng() % 2 ? 1 : -1));
  return RankVector(std::move(e));
}

// A mix of feasible pairs, feasible single-step neighbors and arbitrary pairs.
std::pair<RankVector, RankVector> random_pair(const RankSpace& space, std::mt19937_64& rng,
                                              std::size_t kind) {
  switch (kind % 3) {
    case 0: return {random_feasible_rank(space, rng()), random_feasible_rank(space, rng())};
    case 1: {
      RankVector r = random_feasible_rank(space, rng());
      for (int attempt = 0; attempt < 20; ++attempt) {
        RankVector rt = neighbor_of(r, rng);
        if (space_contains(space, rt)) return {r, rt};
      }
      return {r, random_feasible_rank(space, rng())};
    }
    default: return {uniform_rank(space.n(), rng), uniform_rank(space.n(), rng)};
  }
}

std::vector<double> normal_theta(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> theta(n);
  for (auto& t : theta) t = z(rng);
  return theta;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Context {
  std::uint64_t seed;
  std::size_t index;
  bool corrupt;
  std::uint64_t instance_seed(std::uint64_t k) const { return derive_seed(seed, index, k); }
};

void check_gap(ModelKind kind, const Context& ctx, Tracker& t) {
  std::uint64_t k = 0;
  for (std::size_t n : {5, 20, 100}) {
    const RankSpace space = RankSpace::standard(n);
    for (std::size_t p = 0; p < 1000; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      const double alpha = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
      const double beta = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
      const auto build = [&](double b) {
        switch (kind) {
          case ModelKind::DifferentialComparison:
            return ModelSpec::differential_linear(n, alpha, b);
          case ModelKind::AdditiveCollaboration: return ModelSpec::additive_linear(n, alpha, b);
          case ModelKind::PoissonSqrtLinear: {
            const double nd = static_cast<double>(n);
            return ModelSpec::poisson_sqrt_linear(n, b * nd * nd, b);
          }
        }
        throw std::logic_error("unhandled model kind");
      };
      const ModelSpec model = build(beta);
      const auto [r, rt] = random_pair(space, rng, p);
      const double direct = signal_gap(model, r, rt);
      const double closed =
          signal_gap_closed_form(ctx.corrupt ? build(beta * (1.0 + 1e-6)) : model, r, rt);
      double norm_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm_sq += std::pow(rt[i] - r[i], 2);
      const double scale = 2.0 * static_cast<double>(n) * beta * beta * norm_sq;
      const double dev = scale > 0.0 ? std::abs(direct - closed) / scale : std::abs(direct - closed);
      t.record(dev, s, "n=" + std::to_string(n) + " r=" + r.to_string() + " r~=" + rt.to_string());
    }
  }
}

// Noiseless score identities. With mean matrix mu(r):
//   comparison:            S_i = theta_{r(i)} - mean_j theta_{r(j)} + mean(theta)
//   collaboration:         S_i = theta_{r(i)}
//   adaptive comparison:   S_i = theta_{r(i)} - mean_j theta_{r(j)}
//   adaptive collaboration S_i = theta_{r(i)} + sum_j theta_{r(j)} / (n - 2)
void check_scores(int which, const Context& ctx, Tracker& t) {
  std::uint64_t k = 0;
  for (std::size_t n : {5, 20, 100}) {
    for (std::size_t p = 0; p < 100; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      std::vector<double> theta = normal_theta(n, rng);
      const double offset = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
      for (auto& v : theta) v += offset;
      const RankVector r = uniform_rank(n, rng);
      const double nd = static_cast<double>(n);
      double theta_mean = 0.0, rank_total = 0.0;
      for (double v : theta) theta_mean += v / nd;
      for (std::size_t i = 0; i < n; ++i) rank_total += theta[r[i] - 1];

      std::vector<double> data_theta = theta;
      if (ctx.corrupt && which != 0) data_theta[r[0] - 1] += 0.1;
      std::vector<double> expected(n);
      ScoreVector got;
      if (which == 0) {
        const InteractionMatrix x =
            build_mean_matrix(ModelSpec::differential(data_theta), r);
        std::vector<double> passed = theta;
        if (ctx.corrupt) passed[0] += 0.1;
        got = score_comparison(x, passed);
        for (std::size_t i = 0; i < n; ++i) {
          expected[i] = theta[r[i] - 1] - rank_total / nd + theta_mean;
        }
      } else if (which == 1) {
        got = score_collaboration(build_mean_matrix(ModelSpec::additive(data_theta), r));
        for (std::size_t i = 0; i < n; ++i) expected[i] = theta[r[i] - 1];
      } else {
        const bool comparison = p % 2 == 0;
        const InteractionMatrix x = build_mean_matrix(
            comparison ? ModelSpec::differential(data_theta) : ModelSpec::additive(data_theta), r);
        got = score_adaptive(x, comparison ? ScoreKind::Comparison : ScoreKind::Collaboration);
        for (std::size_t i = 0; i < n; ++i) {
          expected[i] = comparison ? theta[r[i] - 1] - rank_total / nd
                                   : theta[r[i] - 1] + rank_total / (nd - 2.0);
        }
      }
      double dev = 0.0;
      for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(got[i] - expected[i]));
      t.record(dev / std::max(1.0, max_abs(theta)), s,
               "n=" + std::to_string(n) + " r=" + r.to_string());
    }
  }
}

void check_hat(const Context& ctx, Tracker& t) {
  std::uint64_t k = 0;
  for (std::size_t n : {5, 20, 100}) {
    for (std::size_t p = 0; p < 20; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      const RankVector r = nonconstant_rank(n, rng);
      DenseMatrix h = hat_matrix(r);
      if (ctx.corrupt) h(0, 0) += 1e-6;
      double dev = 0.0, trace = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trace += h(i, i);
        double row = 0.0, row_r = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dev = std::max(dev, std::abs(h(i, j) - h(j, i)));
          row += h(i, j);
          row_r += h(i, j) * r[j];
          double sq = 0.0;
          for (std::size_t m = 0; m < n; ++m) sq += h(i, m) * h(m, j);
          dev = std::max(dev, std::abs(sq - h(i, j)));
        }
        dev = std::max(dev, std::abs(row - 1.0));
        dev = std::max(dev, std::abs(row_r - r[i]) / static_cast<double>(n));
      }
      dev = std::max(dev, std::abs(trace - 2.0));
      t.record(dev, s, "n=" + std::to_string(n) + " r=" + r.to_string());
    }
  }
}

void check_pl(const Context& ctx, Tracker& t) {
  std::uint64_t k = 0;
  for (std::size_t n : {5, 20, 100}) {
    for (std::size_t p = 0; p < 100; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      const RankVector r = nonconstant_rank(n, rng);
      std::uniform_real_distribution<double> coef(-1.0, 1.0);
      const double a = coef(rng), b = coef(rng);
      std::normal_distribution<double> z(0.0, 1.0);
      std::vector<double> scores(n);
      for (std::size_t i = 0; i < n; ++i) scores[i] = a + b * r[i] + z(rng);
      const double pl = profile_ls_objective(scores, r);
      if (ctx.corrupt) scores[0] += 1e-3;
      const double hat = hat_residual_norm_sq(scores, r);
      t.record(std::abs(pl - hat) / std::max({std::abs(pl), std::abs(hat), 1e-300}), s,
               "n=" + std::to_string(n) + " r=" + r.to_string());
    }
  }
}

void check_bhattacharyya(const Context& ctx, Tracker& t) {
  std::uniform_real_distribution<double> log_mu(std::log(0.1), std::log(1e4));
  std::uniform_real_distribution<double> log_ratio(std::log(0.5), std::log(2.0));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const std::uint64_t s = ctx.instance_seed(k);
    std::mt19937_64 rng(s);
    const double mu = std::exp(log_mu(rng));
    double mu_tilde = k % 2 ? std::exp(log_mu(rng)) : mu * std::exp(log_ratio(rng));
    mu_tilde = std::clamp(mu_tilde, 0.1, 1e4);
    MeanMatrix a(2, mu), b(2, mu_tilde);
    const double closed = bhattacharyya_affinity(a, b);
    MeanMatrix b_series = b;
    if (ctx.corrupt) b_series(0, 1) *= 1.01;
    const double series = bhattacharyya_affinity_series(a, b_series);
    t.record(std::abs(closed - series), s,
             "mu=" + std::to_string(mu) + " mu~=" + std::to_string(mu_tilde));
  }
}

void check_losses(const Context& ctx, Tracker& t) {
  const double qs[] = {0.25, 0.5, 1.0, 1.5, 2.0};
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const std::uint64_t s = ctx.instance_seed(k);
    std::mt19937_64 rng(s);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
    const RankVector r = uniform_rank(n, rng);
    RankVector r_hat = k % 4 == 0 ? r : (k % 4 == 1 ? neighbor_of(r, rng) : uniform_rank(n, rng));
    const RankVector self = ctx.corrupt ? neighbor_of(r, rng) : r;
    const double nd = static_cast<double>(n);
    double dev = 0.0;
    const double l0 = loss(0.0, r_hat, r);
    dev = std::max(dev, std::max(0.0, -l0) + std::max(0.0, l0 - 1.0));
    dev = std::max(dev, (l0 == 0.0) != (r_hat == r) ? 1.0 : 0.0);
    double prev_norm = 0.0;
    for (double q : qs) {
      const double l = loss(q, r_hat, r);
      dev = std::max(dev, std::max(0.0, -l));
      dev = std::max(dev, std::abs(l - loss(q, r, r_hat)));
      dev = std::max(dev, std::abs(loss(q, r, self)));
      dev = std::max(dev, std::max(0.0, l - std::pow(nd - 1.0, q)));
      // Power means grow with q.
      const double norm = std::pow(l, 1.0 / q);
      dev = std::max(dev, std::max(0.0, prev_norm - norm * (1.0 + 1e-12)));
      prev_norm = norm;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += std::pow(r_hat[i] - r[i], 2);
    dev = std::max(dev, std::abs(loss(2.0, r_hat, r) - sq / nd));
    t.record(dev, s, "r=" + r.to_string() + " r_hat=" + r_hat.to_string());
  }
}

// gap / (2 n b^2 |d|^2) lies in [1 - 2 c_n / n, 1] on the sum-budget space,
// so both the lower signal bound and the entropy bound hold with M = 1.
void check_signal_condition(const Context& ctx, Tracker& t, IdentityResult& result) {
  std::uint64_t k = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t n : {20, 100}) {
    const RankSpace space = RankSpace::standard(n);
    const double nd = static_cast<double>(n);
    const double floor_ratio = 1.0 - 2.0 * static_cast<double>(space.c_n()) / nd;
    for (std::size_t p = 0; p < 1000; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      const double beta = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
      const ModelSpec model = ModelSpec::differential_linear(n, 0.0, beta);
      auto [r, rt] = random_pair(space, rng, p % 2);
      if (ctx.corrupt) {
        std::vector<int> shifted(n);
        for (std::size_t i = 0; i < n; ++i) shifted[i] = std::min(r[i] + 1, static_cast<int>(n));
        rt = RankVector(std::move(shifted));
      }
      double norm_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm_sq += std::pow(rt[i] - r[i], 2);
      if (norm_sq == 0.0) continue;
      const double ratio = signal_gap(model, r, rt) / (2.0 * nd * beta * beta * norm_sq);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      const double dev = std::max(std::max(0.0, ratio - 1.0), std::max(0.0, floor_ratio - ratio));
      t.record(dev, s, "n=" + std::to_string(n) + " ratio=" + std::to_string(ratio));
    }
  }
  if (result.passed) {
    std::ostringstream msg;
    msg << "ratio range [" << lo << ", " << hi << "]";
    result.detail = msg.str();
  }
}

// For the differential model, LSE(r) = C + 2n FM(r) - 2 (sum theta_r - sum theta)^2,
// with FM built on the comparison score. Checked through differences.
void check_lse_link(const Context& ctx, Tracker& t) {
  std::uint64_t k = 0;
  for (std::size_t n : {4, 8, 20}) {
    for (std::size_t p = 0; p < 100; ++p, ++k) {
      const std::uint64_t s = ctx.instance_seed(k);
      std::mt19937_64 rng(s);
      std::vector<double> theta = normal_theta(n, rng);
      const ModelSpec model = ModelSpec::differential(theta);
      const InteractionMatrix x =
          generate_gaussian(model, uniform_rank(n, rng), 1.0, rng());
      std::vector<double> passed = theta;
      if (ctx.corrupt) passed[0] += 0.1;
      const ScoreVector scores = score_comparison(x, passed);
      const RankVector r1 = uniform_rank(n, rng), r2 = uniform_rank(n, rng);
      double theta_total = 0.0;
      for (double v : theta) theta_total += v;
      const auto delta = [&](const RankVector& r) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += theta[r[i] - 1];
        return total - theta_total;
      };
      const double nd = static_cast<double>(n);
      const double l1 = lse_objective(x, model, r1), l2 = lse_objective(x, model, r2);
      const double lhs = l1 - l2;
      const double rhs = 2.0 * nd *
                             (feature_match_objective(scores, theta, r1) -
                              feature_match_objective(scores, theta, r2)) -
                         2.0 * (std::pow(delta(r1), 2) - std::pow(delta(r2), 2));
      t.record(std::abs(lhs - rhs) / std::max(1.0, std::abs(l1) + std::abs(l2)), s,
               "n=" + std::to_string(n) + " r1=" + r1.to_string() + " r2=" + r2.to_string());
    }
  }
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(identities.begin(), identities.end(),
                     [](const IdentityResult& r) { return r.passed; });
}

std::vector<std::string> identity_names() { return names(); }

VerifyReport run_verify(const std::optional<std::string>& inject, std::uint64_t seed) {
  const auto& list = names();
  if (inject && std::find(list.begin(), list.end(), *inject) == list.end()) {
    throw InputError("unknown identity '" + *inject + "'");
  }
  VerifyReport report;
  for (std::size_t idx = 0; idx < list.size(); ++idx) {
    const std::string& name = list[idx];
    IdentityResult result;
    result.name = name;
    const Context ctx{seed, idx, inject && *inject == name};
    if (name == "bhattacharyya-series") {
      result.tolerance = 1e-8;
    } else if (name.rfind("score-", 0) == 0 || name == "loss-properties") {
      result.tolerance = 1e-12;
    } else {
      result.tolerance = 1e-9;
    }
    Tracker t(result);
    if (name == "differential-gap") check_gap(ModelKind::DifferentialComparison, ctx, t);
    else if (name == "additive-gap") check_gap(ModelKind::AdditiveCollaboration, ctx, t);
    else if (name == "poisson-gap") check_gap(ModelKind::PoissonSqrtLinear, ctx, t);
    else if (name == "score-comparison") check_scores(0, ctx, t);
    else if (name == "score-collaboration") check_scores(1, ctx, t);
    else if (name == "score-adaptive") check_scores(2, ctx, t);
    else if (name == "hat-matrix") check_hat(ctx, t);
    else if (name == "pl-consistency") check_pl(ctx, t);
    else if (name == "bhattacharyya-series") check_bhattacharyya(ctx, t);
    else if (name == "loss-properties") check_losses(ctx, t);
    else if (name == "signal-condition") check_signal_condition(ctx, t, result);
    else check_lse_link(ctx, t);
    report.identities.push_back(std::move(result));
  }
  return report;
}

OracleReport run_oracle_check(std::size_t n, std::size_t instances, std::uint64_t seed) {
  if (n < 3 || n > 6) {
    throw InputError("oracle-check needs 3 <= n <= 6, got " + std::to_string(n));
  }
  OracleReport report;
  report.n = n;
  report.instances = instances;
  const std::int64_t default_c = default_sum_budget(n);
  const std::int64_t default_csq = default_square_budget(n);
  const double nd = static_cast<double>(n);

  for (std::size_t k = 0; k < instances; ++k) {
    const std::uint64_t s = derive_seed(seed, n, k);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);

    // Feature matching: theta linear, sorted random or unsorted; scores are
    // noisy theta values at a random point of [n]^n so that the
    // unconstrained optimum often breaks the budgets.
    std::vector<double> theta(n);
    switch (k % 3) {
      case 0: {
        const double a = 2.0 * unit(rng) - 1.0, b = 0.1 + 1.9 * unit(rng);
        for (std::size_t i = 0; i < n; ++i) theta[i] = a + b * static_cast<double>(i + 1);
        break;
      }
      case 1:
        for (auto& v : theta) v = 4.0 * unit(rng) - 2.0;
        std::sort(theta.begin(), theta.end());
        break;
      default:
        for (auto& v : theta) v = z(rng);
    }
    const RankVector anchor = uniform_rank(n, rng);
    const double noise = std::array<double, 3>{0.01, 0.3, 1.0}[rng() % 3];
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = theta[anchor[i] - 1] + noise * z(rng);

    const std::int64_t c = rng() % 2 ? 1 : default_c;
    const std::int64_t csq =
        std::uniform_int_distribution<std::int64_t>(0, default_csq)(rng);
    const RankSpace sum_space(n, c);
    const RankSpace square_space(n, c, csq);
    for (const RankSpace* space : {&sum_space, &square_space}) {
      const RankVector fast = feature_match(scores, theta, *space);
      const RankVector slow = feature_match_exhaustive(scores, theta, *space);
      const double f = feature_match_objective(scores, theta, fast);
      const double e = feature_match_objective(scores, theta, slow);
      const double gap = f - e;
      report.fm_worst_gap = std::max(report.fm_worst_gap, gap);
      const bool match =
          space_contains(*space, fast) && gap <= 1e-12 * (1.0 + std::abs(e));
      if (match) {
        ++(space == &sum_space ? report.fm_matches_sum : report.fm_matches_square);
      } else if (!report.fm_first_mismatch_seed) {
        report.fm_first_mismatch_seed = s;
      }
      if (fast == slow) ++report.fm_identical;
    }

    // Profile iteration on S = b r + noise with r a random permutation and
    // SNR in [4, 10], default square-budget space.
    const RankSpace restricted = RankSpace::restricted(n);
    const RankVector truth = random_feasible_rank(restricted, rng(), 0);
    const double snr_value = 4.0 + 6.0 * unit(rng);
    const double beta = beta_for_snr(n, snr_value, 1.0);
    const double tau = 1.0 / std::sqrt(2.0 * nd);
    std::vector<double> profile_scores(n);
    for (std::size_t i = 0; i < n; ++i) profile_scores[i] = beta * truth[i] + tau * z(rng);
    try {
      const ProfileEstimate est = profile_ls_estimate(profile_scores, restricted);
      const RankVector best = profile_ls_exhaustive(profile_scores, restricted);
      const double best_pl = profile_ls_objective(profile_scores, best);
      const double gap = est.objective - best_pl;
      report.profile_worst_gap = std::max(report.profile_worst_gap, gap);
      if (gap <= 1e-9 * (1.0 + best_pl)) ++report.profile_matches;
    } catch (const DegenerateFitError&) {
      // Counted as a miss.
    }
  }
  return report;
}

}  // namespace rankphase
