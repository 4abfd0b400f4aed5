#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/model.hpp"
#include "rankphase/simulation.hpp"

using namespace rankphase;

namespace {

std::vector<double> random_theta(std::size_t n, std::mt19937_64& rng, bool sorted) {
  std::normal_distribution<double> z;
  std::vector<double> theta(n);
  for (auto& t : theta) t = z(rng);
  if (sorted) std::sort(theta.begin(), theta.end());
  return theta;
}

std::vector<int> as_vector(const RankVector& r) { return {r.entries().begin(), r.entries().end()}; }

}  // namespace

TEST_CASE("comparison score examples") {
  const std::vector<double> theta{1, 2, 3};
  const ScoreVector zero = score_comparison(InteractionMatrix(3, 0.0), theta);
  for (double s : zero) CHECK(s == doctest::Approx(2.0));

  const ModelSpec model = ModelSpec::differential({0.4, -1.0, 2.5, 0.1, 3.0});
  const auto th = model.theta();
  const InteractionMatrix id = build_mean_matrix(model, RankVector::identity(5));
  const ScoreVector s = score_comparison(id, th);
  for (std::size_t i = 0; i < 5; ++i) CHECK(s[i] == doctest::Approx(th[i]));

  const RankVector r({2, 2, 5, 1, 4});
  const ScoreVector sr = score_comparison(build_mean_matrix(model, r), th);
  double delta = 0.0;
  for (std::size_t i = 0; i < 5; ++i) delta += th[r[i] - 1] - th[i];
  for (std::size_t i = 0; i < 5; ++i) CHECK(sr[i] == doctest::Approx(th[r[i] - 1] - delta / 5));

  CHECK_THROWS_AS(score_comparison(InteractionMatrix(2, 0.0), std::vector<double>{1, 2}),
                  InputError);
}

TEST_CASE("collaboration score examples") {
  const ScoreVector c = score_collaboration(InteractionMatrix(4, 1.0));
  for (double s : c) CHECK(s == doctest::Approx(0.5));
  for (double s : score_collaboration(InteractionMatrix(4, 0.0))) CHECK(s == 0.0);

  const ModelSpec model = ModelSpec::additive({0.4, -1.0, 2.5, 0.1, 3.0});
  const RankVector r({3, 3, 1, 5, 2});
  const ScoreVector s = score_collaboration(build_mean_matrix(model, r));
  for (std::size_t i = 0; i < 5; ++i) CHECK(s[i] == doctest::Approx(model.theta_at(r[i])));
  CHECK_THROWS_AS(score_collaboration(InteractionMatrix(2, 0.0)), InputError);
}

TEST_CASE("adaptive scores") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  InteractionMatrix x(6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) x(i, j) = z(rng);
  const std::vector<double> theta{1.0, 1.5, 4.0, 5.0, 7.0, 8.5};
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / 6.0;
  const ScoreVector a = score_adaptive(x, ScoreKind::Comparison);
  const ScoreVector c = score_comparison(x, theta);
  for (std::size_t i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(c[i] - mean));

  const ModelSpec lin = ModelSpec::differential_linear(5, 3.0, 0.7);
  const ScoreVector s =
      score_adaptive(build_mean_matrix(lin, RankVector::identity(5)), ScoreKind::Comparison);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s[i] == doctest::Approx(0.7 * static_cast<double>(i + 1) - 0.7 * 3.0));
  }
  for (double v : score_adaptive(InteractionMatrix(4, 0.0), ScoreKind::Collaboration)) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("feature matching examples") {
  const std::vector<double> theta{1, 2, 3, 4};
  const RankSpace space(4, 1);
  const RankVector got = feature_match(std::vector<double>{1.1, 1.2, 3.0, 4.0}, theta, space);
  CHECK(got == RankVector({1, 1, 3, 4}));

  const RankVector r({2, 1, 4, 3});
  std::vector<double> perfect(4);
  for (std::size_t i = 0; i < 4; ++i) perfect[i] = theta[r[i] - 1];
  const RankVector back = feature_match(perfect, theta, space);
  CHECK(back == r);
  CHECK(feature_match_objective(perfect, theta, back) == 0.0);
}

TEST_CASE("feature matching equals enumeration on small instances") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z;
  for (std::size_t n = 3; n <= 6; ++n) {
    for (int trial = 0; trial < 60; ++trial) {
      const auto theta = random_theta(n, rng, trial % 2 == 0);
      std::vector<double> s(n);
      const auto anchor = oracle::random_ranks(n, rng);
      for (std::size_t i = 0; i < n; ++i) s[i] = theta[anchor[i] - 1] + 0.3 * z(rng);
      const std::int64_t c = 1 + static_cast<std::int64_t>(rng() % 2);
      const std::int64_t csq = static_cast<std::int64_t>(rng() % (2 * n));
      for (bool square : {false, true}) {
        const std::optional<std::int64_t> budget =
            square ? std::optional<std::int64_t>(csq) : std::nullopt;
        const RankSpace space(n, c, budget);
        const RankVector got = feature_match(s, theta, space);
        CHECK(space_contains(space, got));
        const auto best = oracle::minimize(n, c, budget, [&](const std::vector<int>& r) {
          return oracle::fm_objective(s, theta, r);
        });
        CHECK(oracle::fm_objective(s, theta, as_vector(got)) == best.value);
      }
    }
  }
}

TEST_CASE("feature matching at larger n admits no improving local move") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 20 + rng() % 40;
    const auto theta = random_theta(n, rng, trial % 3 != 0);
    std::vector<double> s(n);
    for (auto& v : s) v = 0.5 + z(rng);  // skewed so budgets bind
    const bool square = trial % 2;
    const RankSpace space = square ? RankSpace::restricted(n) : RankSpace::standard(n);
    const RankVector got = feature_match(s, theta, space);
    REQUIRE(space_contains(space, got));
    const double base = feature_match_objective(s, theta, got);
    auto r = as_vector(got);
    bool improved = false;
    for (std::size_t i = 0; i < n && !improved; ++i) {
      for (int d : {-1, 1}) {
        r[i] += d;
        if (r[i] >= 1 && r[i] <= static_cast<int>(n) &&
            oracle::feasible(r, space.c_n(), space.c_n_sq())) {
          improved = improved || oracle::fm_objective(s, theta, r) < base - 1e-12;
        }
        r[i] -= d;
      }
      for (std::size_t j = 0; j < n && !square; ++j) {
        if (j == i || r[i] == static_cast<int>(n) || r[j] == 1) continue;
        ++r[i];
        --r[j];
        improved = improved || oracle::fm_objective(s, theta, r) < base - 1e-12;
        --r[i];
        ++r[j];
      }
    }
    CHECK_FALSE(improved);
  }
}

TEST_CASE("feature matching is shift equivariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 20;
    auto theta = random_theta(n, rng, true);
    std::vector<double> s(n);
    for (auto& v : s) v = z(rng);
    const RankSpace space = RankSpace::restricted(n);
    const RankVector before = feature_match(s, theta, space);
    for (auto& v : s) v += 0.5;
    for (auto& v : theta) v += 0.5;
    CHECK(feature_match(s, theta, space) == before);
  }
}

TEST_CASE("ordinary least squares and profile objective") {
  const RankVector r = RankVector::identity(4);
  const std::vector<double> s{1, 2, 2, 3};
  const OlsFit fit = ols_fit(s, r);
  CHECK(fit.b_hat == doctest::Approx(0.6));
  CHECK(fit.a_hat == doctest::Approx(0.5));
  CHECK(profile_ls_objective(s, r) == doctest::Approx(0.2));
  CHECK(hat_residual_norm_sq(s, r) == doctest::Approx(0.2));

  const std::vector<double> linear{5, 8, 11, 14};
  const OlsFit exact = ols_fit(linear, r);
  CHECK(exact.a_hat == doctest::Approx(2.0));
  CHECK(exact.b_hat == doctest::Approx(3.0));
  CHECK(profile_ls_objective(linear, r) == doctest::Approx(0.0));

  const OlsFit flat = ols_fit(std::vector<double>{7, 7, 7, 7}, r);
  CHECK(flat.b_hat == 0.0);
  CHECK(flat.a_hat == doctest::Approx(7.0));

  CHECK_THROWS_AS(ols_fit(s, RankVector({2, 2, 2, 2})), DegenerateFitError);
  CHECK_THROWS_AS(hat_matrix(RankVector({3, 3, 3})), DegenerateFitError);
}

TEST_CASE("profile objective matches normal equations, hat residual and shift invariance") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 30;
    auto r = oracle::random_ranks(n, rng);
    if (std::all_of(r.begin(), r.end(), [&](int v) { return v == r[0]; })) continue;
    std::vector<double> s(n);
    for (auto& v : s) v = z(rng);
    const double pl = profile_ls_objective(s, RankVector(r));
    CHECK(pl == doctest::Approx(oracle::pl_objective(s, r)).epsilon(1e-9));
    CHECK(pl == doctest::Approx(hat_residual_norm_sq(s, RankVector(r))).epsilon(1e-9));
    for (auto& v : s) v += 3.25;
    CHECK(profile_ls_objective(s, RankVector(r)) == doctest::Approx(pl).epsilon(1e-9));
  }
}

TEST_CASE("hat matrix is the projector onto span{1, r}") {
  const RankVector r({1, 4, 2, 2, 5});
  const DenseMatrix h = hat_matrix(r);
  double trace = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    trace += h(i, i);
    double row = 0.0, row_r = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(h(i, j) == doctest::Approx(h(j, i)));
      row += h(i, j);
      row_r += h(i, j) * r[j];
      double sq = 0.0;
      for (std::size_t k = 0; k < 5; ++k) sq += h(i, k) * h(k, j);
      CHECK(std::abs(sq - h(i, j)) <= 1e-10);
    }
    CHECK(row == doctest::Approx(1.0));
    CHECK(row_r == doctest::Approx(r[i]));
  }
  CHECK(trace == doctest::Approx(2.0));
}

TEST_CASE("profile estimate on exactly linear scores") {
  const RankVector truth({3, 1, 4, 2, 5});
  std::vector<double> s(5);
  for (std::size_t i = 0; i < 5; ++i) s[i] = 1.0 + 2.0 * truth[i];
  const ProfileEstimate est = profile_ls_estimate(s, RankSpace::restricted(5));
  CHECK(est.rank == truth);
  CHECK(est.objective == doctest::Approx(0.0));
  CHECK(est.trace.iterations <= 2);
  CHECK(est.trace.converged);
}

TEST_CASE("profile estimate input checks") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK_THROWS_AS(profile_ls_estimate(s, RankSpace::standard(4)), InputError);
  CHECK_THROWS_AS(profile_ls_estimate(std::vector<double>{2, 2, 2, 2}, RankSpace::restricted(4)),
                  DegenerateFitError);
  ProfileOptions bad;
  bad.init = RankVector({1, 1, 1, 1});
  CHECK_THROWS_AS(profile_ls_estimate(s, RankSpace::restricted(4), bad), InputError);
}

TEST_CASE("profile objective path never increases") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 60;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = 0.05 * static_cast<double>(rng() % n) + z(rng);
    const ProfileEstimate est = profile_ls_estimate(s, RankSpace::restricted(n));
    const auto& path = est.trace.objective_path;
    for (std::size_t k = 1; k < path.size(); ++k) CHECK(path[k] <= path[k - 1]);
    CHECK(est.objective == path.back());
    CHECK(space_contains(RankSpace::restricted(n), est.rank));
  }
}

TEST_CASE("profile estimate against exhaustive profile minimum") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(4.0, 10.0);
  int equal = 0, total = 0;
  for (std::size_t n = 4; n <= 6; ++n) {
    const RankSpace space = RankSpace::restricted(n);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> truth(n);
      std::iota(truth.begin(), truth.end(), 1);
      std::shuffle(truth.begin(), truth.end(), rng);
      const double beta = beta_for_snr(n, u(rng), 1.0);
      const double tau = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = beta * truth[i] + tau * z(rng);
      const ProfileEstimate est = profile_ls_estimate(s, space);
      const auto best = oracle::minimize(
          n, space.c_n(), space.c_n_sq(),
          [&](const std::vector<int>& r) { return oracle::pl_objective(s, r); }, true);
      CHECK(est.objective >= best.value - 1e-9);
      CHECK(profile_ls_objective(s, profile_ls_exhaustive(s, space)) ==
            doctest::Approx(best.value));
      ++total;
      if (est.objective <= best.value + 1e-9 * (1.0 + best.value)) ++equal;
    }
  }
  CHECK(static_cast<double>(equal) / total >= 0.9);
}

TEST_CASE("profile estimate started at the truth keeps it at high SNR") {
  const std::size_t n = 50;
  const RankSpace space = RankSpace::restricted(n);
  const double beta = beta_for_snr(n, 3.0 * std::log(50.0), 1.0);
  const ModelSpec model = ModelSpec::differential_linear(n, 0.0, beta);
  int recovered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const RankVector truth = random_feasible_rank(space, 1000 + rep);
    const InteractionMatrix x = generate_gaussian(model, truth, 1.0, 5000 + rep);
    ProfileOptions options;
    options.init = truth;
    const ProfileEstimate est =
        profile_ls_estimate(score_adaptive(x, ScoreKind::Comparison), space, options);
    recovered += est.rank == truth ? 1 : 0;
  }
  CHECK(recovered >= 90);
}

TEST_CASE("profile argmin is unchanged by shifting the scores") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 30;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = 0.3 * static_cast<double>(i % 7) + z(rng);
    const RankSpace space = RankSpace::restricted(n);
    const RankVector before = profile_ls_estimate(s, space).rank;
    for (auto& v : s) v += 10.0;
    CHECK(profile_ls_estimate(s, space).rank == before);
  }
}

TEST_CASE("least-squares enumeration") {
  const ModelSpec model = ModelSpec::differential({0.0, 1.0, 2.5, 4.0, 4.5});
  const RankVector truth({2, 5, 1, 4, 3});
  const InteractionMatrix x = build_mean_matrix(model, truth);
  CHECK(lse_brute_force(x, model, RankSpace::standard(5)) == truth);
  CHECK(lse_objective(x, model, truth) == 0.0);

  const ModelSpec big = ModelSpec::differential_linear(7, 0.0, 1.0);
  CHECK_THROWS_AS(lse_brute_force(InteractionMatrix(7, 0.0), big, RankSpace::standard(7)),
                  RefusedError);
}

TEST_CASE("least squares and the feature matching objective pick the same optimum value") {
  // For the differential model LSE(r) = C + 2n FM(r) - 2 (sum theta_r - sum theta)^2.
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng() % 3;
    const auto theta = random_theta(n, rng, true);
    const ModelSpec model = ModelSpec::differential(theta);
    const RankSpace space = RankSpace::standard(n);
    const InteractionMatrix x =
        generate_gaussian(model, RankVector(oracle::random_ranks(n, rng)), 0.7, rng());
    const ScoreVector s = score_comparison(x, theta);
    const double theta_total = std::accumulate(theta.begin(), theta.end(), 0.0);
    const auto surrogate = oracle::minimize(n, space.c_n(), std::nullopt,
                                            [&](const std::vector<int>& r) {
                                              double d = -theta_total;
                                              for (int v : r) d += theta[v - 1];
                                              return 2.0 * n * oracle::fm_objective(s, theta, r) -
                                                     2.0 * d * d;
                                            });
    const RankVector lse = lse_brute_force(x, model, space);
    CHECK(lse_objective(x, model, lse) ==
          doctest::Approx(lse_objective(x, model, RankVector(surrogate.r))).epsilon(1e-10));
  }
}

TEST_CASE("rank vectors are visited in lexicographic order") {
  std::vector<RankVector> seen;
  for_each_rank_vector(3, [&](const RankVector& r) { seen.push_back(r); });
  CHECK(seen.size() == 27);
  CHECK(std::is_sorted(seen.begin(), seen.end()));
  CHECK(seen.front() == RankVector({1, 1, 1}));
}
