// Runs every acceptance criterion at its stated scale and tolerance and
// prints one PASS/FAIL line per criterion. Exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "rankphase/io.hpp"
#include "rankphase/model.hpp"
#include "rankphase/poisson.hpp"
#include "rankphase/simulation.hpp"
#include "rankphase/verify.hpp"

using namespace rankphase;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

ExperimentConfig recipe(const std::string& name) {
  return load_config(fs::path(RANK_PHASE_CONFIG_DIR) / name);
}

std::vector<GridPointSummary> run_grid(const std::string& name) {
  return summarize(run_experiment(recipe(name)));
}

Outcome identity_suite() {
  Outcome o;
  const VerifyReport report = run_verify();
  for (const auto& id : report.identities) {
    o.require(id.passed, id.name + " max dev " + fmt(id.max_deviation, 3) + " <= " +
                             fmt(id.tolerance, 1) + " over " + std::to_string(id.checks));
  }
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  for (std::size_t n : {4, 5, 6}) {
    const OracleReport r = run_oracle_check(n, 200, 100 + n);
    o.require(r.feature_match_ok(), "n=" + std::to_string(n) + " sum " +
                                        std::to_string(r.fm_matches_sum) + "/200, sum+square " +
                                        std::to_string(r.fm_matches_square) + "/200");
  }
  return o;
}

Outcome exponential_regime() {
  Outcome o;
  const auto rows = run_experiment(recipe("exponential.json"));
  const RegimeReport report = fit_regimes(rows);
  const SlopeFit* fit = report.fit_for("exponential", 2.0);
  const bool ok = fit != nullptr && fit->ok;
  const double slope = ok ? fit->line.slope : NAN;
  o.require(ok && slope >= -1.6 && slope <= -0.6,
            "slope " + fmt(slope) + " (se " + fmt(ok ? fit->line.slope_se : NAN, 2) +
                ", " + std::to_string(ok ? fit->snr_points.size() : 0) + " points) in [-1.6, -0.6]");
  // Mean loss may only rise between neighbours within Monte Carlo noise.
  bool monotone = true;
  for (std::size_t g = 1; g < report.grid.size(); ++g) {
    const LossSummary* prev = report.grid[g - 1].loss_for(2.0);
    const LossSummary* cur = report.grid[g].loss_for(2.0);
    const double rel_se = prev->mean > 0.0 ? prev->std_error / prev->mean : 0.0;
    monotone = monotone && cur->mean <= prev->mean * (1.0 + 3.0 * rel_se);
  }
  o.require(monotone, "mean l2 nonincreasing across the grid");
  return o;
}

Outcome polynomial_regime() {
  Outcome o;
  const RegimeReport report = fit_regimes(run_experiment(recipe("polynomial.json")));
  const SlopeFit* l2 = report.fit_for("polynomial", 2.0);
  const SlopeFit* l1 = report.fit_for("polynomial", 1.0);
  const double s2 = l2 && l2->ok ? l2->line.slope : NAN;
  const double s1 = l1 && l1->ok ? l1->line.slope : NAN;
  o.require(s2 >= -1.4 && s2 <= -0.6, "l2 log-log slope " + fmt(s2) + " in [-1.4, -0.6]");
  o.require(s1 >= -0.8 && s1 <= -0.25, "l1 log-log slope " + fmt(s1) + " in [-0.8, -0.25]");
  return o;
}

Outcome recovery_transition() {
  Outcome o;
  for (const char* name : {"recovery_feature_match.json", "recovery_profile.json"}) {
    const ExperimentConfig config = recipe(name);
    const auto grid = summarize(run_experiment(config));
    const std::string who = to_string(config.estimator);
    o.require(grid.at(1).recovery_rate >= 0.9,
              who + " at 3 log n: " + fmt(grid.at(1).recovery_rate) + " >= 0.9");
    o.require(grid.at(0).recovery_rate <= 0.5,
              who + " at 0.5 log n: " + fmt(grid.at(0).recovery_rate) + " <= 0.5");
  }
  return o;
}

Outcome trivial_regime() {
  Outcome o;
  const auto grid = run_grid("trivial.json");
  const double n = static_cast<double>(grid.at(0).n);
  const double mean = grid.at(0).loss_for(2.0)->mean;
  o.require(grid.at(0).regime == Regime::Trivial, "grid point labelled trivial");
  o.require(mean >= 0.01 * n * n, "mean l2 " + fmt(mean) + " >= 0.01 n^2 = " + fmt(0.01 * n * n));
  return o;
}

Outcome poisson_mle() {
  Outcome o;
  const ExperimentConfig config = recipe("poisson.json");
  const auto grid = summarize(run_experiment(config));
  o.require(grid.at(0).recovery_rate >= 0.8,
            "MLE recovery " + fmt(grid.at(0).recovery_rate) + " >= 0.8");

  // One-sided check of P(LL(r~) >= LL(r)) <= affinity(r, r~) on random pairs.
  const std::size_t n = config.n;
  const double nd = static_cast<double>(n);
  const double beta = config.grid_beta(0);
  const ModelSpec model = ModelSpec::poisson_sqrt_linear(n, beta * nd * nd, beta);
  const RankSpace space = RankSpace::standard(n);
  const int draws = 2000;
  int held = 0;
  double worst_margin = -1.0, largest_bound = 0.0, freq_at_largest = 0.0;
  std::mt19937_64 rng(71);
  for (int pair = 0; pair < 20; ++pair) {
    const RankVector r = random_feasible_rank(space, rng());
    RankVector rt = r;
    while (rt == r) {
      if (pair % 2) {
        rt = random_feasible_rank(space, rng());
      } else {
        std::vector<int> e(r.entries().begin(), r.entries().end());
        const std::size_t i = rng() % n;
        e[i] += e[i] == static_cast<int>(n) ? -1 : (e[i] == 1 ? 1 : (rng() % 2 ? 1 : -1));
        rt = RankVector(e);
      }
    }
    const MeanMatrix mu = build_mean_matrix(model, r), mut = build_mean_matrix(model, rt);
    const double bound = bhattacharyya_affinity(mu, mut);
    int hits = 0;
    for (int d = 0; d < draws; ++d) {
      const PoissonCounts x = generate_poisson(model, r, rng());
      hits += poisson_log_likelihood(x, mut) >= poisson_log_likelihood(x, mu) ? 1 : 0;
    }
    const double freq = static_cast<double>(hits) / draws;
    const double allowance = bound + 3.0 * std::sqrt(bound * (1.0 - bound) / draws);
    held += freq <= allowance ? 1 : 0;
    worst_margin = std::max(worst_margin, freq - allowance);
    if (bound > largest_bound) {
      largest_bound = bound;
      freq_at_largest = freq;
    }
  }
  o.require(held == 20, "Chernoff bound held on " + std::to_string(held) +
                            "/20 pairs (worst freq - allowance " + fmt(worst_margin, 3) +
                            ", largest affinity " + fmt(largest_bound, 3) + " vs frequency " +
                            fmt(freq_at_largest, 3) + ")");
  return o;
}

int run_binary(const std::string& args, const std::string& threads) {
  const std::string cmd = "RANK_PHASE_THREADS=" + threads + " " + RANK_PHASE_BIN + " " + args +
                          " > /dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "rank_phase_acceptance";
  fs::create_directories(dir);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::string max_workers = std::to_string(std::max(hw, 8u));
  for (const char* name : {"minimal.json", "determinism.json", "poisson.json"}) {
    const std::string config = (fs::path(RANK_PHASE_CONFIG_DIR) / name).string();
    std::vector<std::string> outputs;
    for (const std::string& threads : {std::string("1"), max_workers}) {
      for (int pass = 0; pass < 2; ++pass) {
        const fs::path out = dir / (std::string(name) + "." + threads + "." +
                                    std::to_string(pass) + ".csv");
        const int code = run_binary("simulate --config " + config + " --out " + out.string(),
                                    threads);
        outputs.push_back(code == 0 ? read_file(out) : std::string());
      }
    }
    bool same = !outputs[0].empty();
    for (const auto& text : outputs) same = same && text == outputs[0];
    o.require(same, std::string(name) + " byte-identical at 1 and " + max_workers +
                        " workers, twice each");
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "identity suite", 30, identity_suite},
      {2, "oracle equivalence n=4,5,6", 60, oracle_equivalence},
      {3, "exponential regime slope", 600, exponential_regime},
      {4, "polynomial regime slopes", 600, polynomial_regime},
      {5, "exact recovery transition", 300, recovery_transition},
      {6, "trivial regime", 120, trivial_regime},
      {7, "Poisson MLE and Chernoff bound", 120, poisson_mle},
      {8, "determinism across runs and workers", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < c.limit_seconds,
              "runtime " + fmt(secs, 3) + " s < " + fmt(c.limit_seconds, 3) + " s");
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
