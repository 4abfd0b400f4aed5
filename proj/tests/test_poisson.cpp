#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rankphase/errors.hpp"
#include "rankphase/model.hpp"
#include "rankphase/poisson.hpp"
#include "rankphase/simulation.hpp"

using namespace rankphase;

TEST_CASE("log factorial") {
  CHECK(log_factorial(0) == 0.0);
  CHECK(log_factorial(1) == 0.0);
  CHECK(log_factorial(5) == doctest::Approx(std::log(120.0)).epsilon(1e-13));
  double direct = 0.0;
  for (int k = 2; k <= 170; ++k) direct += std::log(static_cast<double>(k));
  CHECK(std::abs(log_factorial(170) - direct) <= 1e-12 * direct);
  CHECK_THROWS_AS(log_factorial(-1), InputError);
}

TEST_CASE("Poisson log-likelihood") {
  MeanMatrix mu(3);
  double total = 0.0;
  int k = 1;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) total += (mu(i, j) = 0.5 * k++);
  CHECK(poisson_log_likelihood(PoissonCounts(3, 0), mu) == doctest::Approx(-total));

  PoissonCounts x(2, 0);
  x(0, 1) = 2;
  MeanMatrix ones(2, 1.0);
  CHECK(poisson_log_likelihood(x, ones) == doctest::Approx((-1.0 - std::log(2.0)) - 1.0));

  MeanMatrix bad(2, 1.0);
  bad(1, 0) = 0.0;
  CHECK_THROWS_AS(poisson_log_likelihood(x, bad), InputError);
  PoissonCounts negative(2, 0);
  negative(0, 1) = -1;
  CHECK_THROWS_AS(poisson_log_likelihood(negative, ones), InputError);
}

TEST_CASE("log-likelihood ratio does not depend on the factorial term") {
  std::mt19937_64 rng(6);
  const ModelSpec model = ModelSpec::poisson_sqrt_linear(5, 3.0, 0.4);
  for (int trial = 0; trial < 50; ++trial) {
    const RankVector r(oracle::random_ranks(5, rng)), rt(oracle::random_ranks(5, rng));
    const PoissonCounts x = generate_poisson(model, r, rng());
    const MeanMatrix mu = build_mean_matrix(model, r), mut = build_mean_matrix(model, rt);
    double ratio = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        if (i == j) continue;
        ratio += static_cast<double>(x(i, j)) * std::log(mut(i, j) / mu(i, j)) -
                 (mut(i, j) - mu(i, j));
      }
    }
    const double diff = poisson_log_likelihood(x, mut) - poisson_log_likelihood(x, mu);
    CHECK(diff == doctest::Approx(ratio).epsilon(1e-9));
  }
}

TEST_CASE("Poisson MLE ties resolve to the lexicographically smallest feasible rank") {
  const std::size_t n = 4;
  const ModelSpec flat = ModelSpec::poisson_sqrt_linear(n, 2.0, 0.0);
  const RankSpace space = RankSpace::standard(n);
  std::vector<int> first;
  oracle::enumerate(n, [&](const std::vector<int>& r) {
    if (first.empty() && oracle::feasible(r, space.c_n())) first = r;
  });
  CHECK(poisson_mle_brute_force(PoissonCounts(n, 3), flat, space) == RankVector(first));
}

TEST_CASE("Poisson MLE refuses large n") {
  const ModelSpec model = ModelSpec::poisson_sqrt_linear(7, 49.0, 1.0);
  CHECK_THROWS_AS(poisson_mle_brute_force(PoissonCounts(7, 1), model, RankSpace::standard(7)),
                  RefusedError);
}

TEST_CASE("Poisson MLE recovers the truth above the exact recovery threshold") {
  const std::size_t n = 5;
  const double nd = static_cast<double>(n);
  const double beta = std::sqrt(3.0 * std::log(nd) / nd);
  const ModelSpec model = ModelSpec::poisson_sqrt_linear(n, beta * nd * nd, beta);
  const RankSpace space = RankSpace::standard(n);
  int recovered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const RankVector truth = random_feasible_rank(space, 300 + rep);
    const PoissonCounts x = generate_poisson(model, truth, 900 + rep);
    recovered += poisson_mle_brute_force(x, model, space) == truth ? 1 : 0;
  }
  CHECK(recovered >= 90);
}

TEST_CASE("Bhattacharyya affinity") {
  MeanMatrix a(2, 1.0), b(2, 4.0);
  a(1, 0) = 3.0;
  b(1, 0) = 3.0;
  CHECK(bhattacharyya_affinity(a, a) == 1.0);
  CHECK(bhattacharyya_affinity(a, b) == doctest::Approx(std::exp(-0.5)));
  CHECK(bhattacharyya_affinity(a, b) == bhattacharyya_affinity(b, a));
  CHECK(bhattacharyya_cell_series(1.0, 4.0) == doctest::Approx(0.60653065971263342).epsilon(1e-12));
  CHECK(bhattacharyya_cell_series(1.0, 4.0) == doctest::Approx(oracle::bhattacharyya_cell(1.0, 4.0)));
  MeanMatrix zero(2, 1.0);
  zero(0, 1) = 0.0;
  CHECK_THROWS_AS(bhattacharyya_affinity(zero, a), InputError);
  CHECK_THROWS_AS(bhattacharyya_cell_series(-1.0, 2.0), InputError);
}

TEST_CASE("closed form and truncated series agree on [0.1, 1e4]") {
  const double grid[] = {0.1, 0.37, 1.0, 2.5, 9.0, 31.0, 150.0, 999.0, 4000.0, 1e4};
  for (double mu : grid) {
    for (double mt : grid) {
      const double closed = std::exp(-0.5 * std::pow(std::sqrt(mt) - std::sqrt(mu), 2));
      const double series = bhattacharyya_cell_series(mu, mt);
      CHECK(std::abs(series - closed) <= 1e-8);
      CHECK(std::abs(series - oracle::bhattacharyya_cell(mu, mt)) <= 1e-8);
      CHECK(series <= 1.0 + 1e-10);  // log terms near 7e3 leave ~1e-12 rounding
    }
  }
}
