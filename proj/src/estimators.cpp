#include "rankphase/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rankphase/errors.hpp"
#include "rankphase/model.hpp"

namespace rankphase {

namespace {

void require_min_size(const InteractionMatrix& x, const char* what) {
  if (x.n() < 3) throw InputError(std::string(what) + " needs n >= 3");
}

void require_same_size(std::span<const double> scores, const RankVector& r, const char* what) {
  if (scores.size() != r.size()) {
    throw InputError(std::string(what) + ": score and rank lengths differ");
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Positions 1..n by ascending score, ties by index.
RankVector rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<int> r(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) r[order[pos]] = static_cast<int>(pos + 1);
  return RankVector(std::move(r));
}

}  // namespace

ScoreVector score_comparison(const InteractionMatrix& x, std::span<const double> theta) {
  require_min_size(x, "score_comparison");
  const std::size_t n = x.n();
  if (theta.size() != n) throw InputError("score_comparison: theta length must equal n");
  const double theta_mean = mean_of(theta);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  ScoreVector s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) acc += x(i, j) - x(j, i);
    }
    s[i] = scale * acc + theta_mean;
  }
  return s;
}

ScoreVector score_collaboration(const InteractionMatrix& x) {
  require_min_size(x, "score_collaboration");
  const std::size_t n = x.n();
  const auto off = x.off_diagonal();
  const double grand = std::accumulate(off.begin(), off.end(), 0.0);
  const double nd = static_cast<double>(n);
  ScoreVector s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) acc += x(i, j) + x(j, i);
    }
    s[i] = (acc - grand / (nd - 1.0)) / (2.0 * (nd - 2.0));
  }
  return s;
}

ScoreVector score_adaptive(const InteractionMatrix& x, ScoreKind kind) {
  require_min_size(x, "score_adaptive");
  const std::size_t n = x.n();
  const double nd = static_cast<double>(n);
  const double scale =
      kind == ScoreKind::Comparison ? 1.0 / (2.0 * nd) : 1.0 / (2.0 * (nd - 2.0));
  const double sign = kind == ScoreKind::Comparison ? -1.0 : 1.0;
  ScoreVector s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) acc += x(i, j) + sign * x(j, i);
    }
    s[i] = scale * acc;
  }
  return s;
}

OlsFit ols_fit(std::span<const double> scores, const RankVector& r) {
  require_same_size(scores, r, "ols_fit");
  if (r.size() < 2 || r.is_constant()) {
    throw DegenerateFitError("ols_fit: rank vector has zero variance");
  }
  const auto n = static_cast<double>(r.size());
  const double r_mean = static_cast<double>(r.sum()) / n;
  const double s_mean = mean_of(scores);
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double dr = r[i] - r_mean;
    cov += dr * (scores[i] - s_mean);
    var += dr * dr;
  }
  OlsFit fit;
  fit.b_hat = cov / var;
  fit.a_hat = s_mean - fit.b_hat * r_mean;
  return fit;
}

double profile_ls_objective(std::span<const double> scores, const RankVector& r) {
  const OlsFit fit = ols_fit(scores, r);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double e = scores[i] - fit.a_hat - fit.b_hat * r[i];
    total += e * e;
  }
  return total;
}

DenseMatrix hat_matrix(const RankVector& r) {
  if (r.size() < 2 || r.is_constant()) {
    throw DegenerateFitError("hat_matrix: rank vector has zero variance");
  }
  const std::size_t n = r.size();
  const double nd = static_cast<double>(n);
  const double r_mean = static_cast<double>(r.sum()) / nd;
  std::vector<double> centered(n);
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = r[i] - r_mean;
    norm_sq += centered[i] * centered[i];
  }
  DenseMatrix h{n, n, std::vector<double>(n * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      h(i, j) = 1.0 / nd + centered[i] * centered[j] / norm_sq;
    }
  }
  return h;
}

double hat_residual_norm_sq(std::span<const double> scores, const RankVector& r) {
  require_same_size(scores, r, "hat_residual_norm_sq");
  const DenseMatrix h = hat_matrix(r);
  double total = 0.0;
  for (std::size_t i = 0; i < h.rows; ++i) {
    double projected = 0.0;
    for (std::size_t j = 0; j < h.cols; ++j) projected += h(i, j) * scores[j];
    const double e = scores[i] - projected;
    total += e * e;
  }
  return total;
}

ProfileEstimate profile_ls_estimate(std::span<const double> scores, const RankSpace& space,
                                    const ProfileOptions& options) {
  const std::size_t n = scores.size();
  if (n != space.n()) throw InputError("profile_ls_estimate: scores and space disagree on n");
  if (n < 3) throw InputError("profile_ls_estimate needs n >= 3");
  if (!space.has_square_budget()) {
    throw InputError("profile_ls_estimate needs a rank space with a sum-of-squares budget");
  }
  if (std::adjacent_find(scores.begin(), scores.end(), std::not_equal_to<>()) == scores.end()) {
    throw DegenerateFitError("profile_ls_estimate: all scores are equal, nothing to rank");
  }

  RankVector r = options.init ? *options.init : rank_order(scores);
  if (r.size() != n || !space_contains(space, r)) {
    throw InputError("profile_ls_estimate: initial rank lies outside the rank space");
  }
  OlsFit fit = ols_fit(scores, r);
  double pl = profile_ls_objective(scores, r);

  IterationTrace trace;
  trace.objective_path.push_back(pl);
  std::vector<double> surrogate(n);
  for (int it = 1; it <= options.max_iters; ++it) {
    double slope = fit.b_hat;
    if (slope <= 0.0) trace.nonpositive_slope_seen = true;
    if (std::abs(slope) < 1e-12) slope = slope < 0.0 ? -1e-12 : 1e-12;
    for (std::size_t k = 0; k < n; ++k) {
      surrogate[k] = fit.a_hat + slope * static_cast<double>(k + 1);
    }
    RankVector next = feature_match(scores, surrogate, space);
    trace.iterations = it;
    if (next.is_constant()) {
      // A constant rank fits no better than the mean; keep the current one.
      trace.converged = true;
      break;
    }
    const double pl_next = profile_ls_objective(scores, next);
    if (pl_next > pl) {
      trace.converged = true;
      break;
    }
    const double decrease = pl - pl_next;
    r = std::move(next);
    fit = ols_fit(scores, r);
    pl = pl_next;
    trace.objective_path.push_back(pl);
    if (decrease < options.tolerance) {
      trace.converged = true;
      break;
    }
  }
  trace.final_rank = r;
  return ProfileEstimate{std::move(r), fit, pl, std::move(trace)};
}

RankVector profile_ls_exhaustive(std::span<const double> scores, const RankSpace& space,
                                 std::size_t n_max) {
  if (scores.size() != space.n()) throw InputError("profile_ls_exhaustive: size mismatch");
  if (scores.size() > n_max) {
    throw RefusedError("exhaustive profile search refuses n = " + std::to_string(scores.size()));
  }
  std::optional<RankVector> best;
  double best_pl = std::numeric_limits<double>::infinity();
  for_each_rank_vector(scores.size(), [&](const RankVector& r) {
    if (r.is_constant() || !space_contains(space, r)) return;
    const double pl = profile_ls_objective(scores, r);
    if (pl < best_pl) {
      best_pl = pl;
      best = r;
    }
  });
  if (!best) throw std::logic_error("no non-constant rank in the space");
  return *best;
}

double lse_objective(const InteractionMatrix& x, const ModelSpec& model, const RankVector& r) {
  if (x.n() != r.size() || model.n() != r.size()) {
    throw InputError("lse_objective: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (i == j) continue;
      const double e = x(i, j) - model.mean(r[i], r[j]);
      total += e * e;
    }
  }
  return total;
}

RankVector lse_brute_force(const InteractionMatrix& x, const ModelSpec& model,
                           const RankSpace& space, std::size_t n_max) {
  if (x.n() != model.n() || x.n() != space.n()) {
    throw InputError("lse_brute_force: dimension mismatch");
  }
  if (x.n() > n_max) {
    throw RefusedError("least-squares enumeration refuses n = " + std::to_string(x.n()) +
                       " > " + std::to_string(n_max));
  }
  std::optional<RankVector> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for_each_rank_vector(x.n(), [&](const RankVector& r) {
    if (!space_contains(space, r)) return;
    const double c = lse_objective(x, model, r);
    if (c < best_cost) {
      best_cost = c;
      best = r;
    }
  });
  if (!best) throw std::logic_error("rank space is empty");
  return *best;
}

void for_each_rank_vector(std::size_t n, const std::function<void(const RankVector&)>& visit) {
  if (n == 0) return;
  std::vector<int> digits(n, 1);
  const int top = static_cast<int>(n);
  for (;;) {
    visit(RankVector(digits));
    std::size_t pos = n;
    while (pos > 0 && digits[pos - 1] == top) {
      digits[pos - 1] = 1;
      --pos;
    }
    if (pos == 0) return;
    ++digits[pos - 1];
  }
}

}  // namespace rankphase
