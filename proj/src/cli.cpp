#include "rankphase/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/io.hpp"
#include "rankphase/simulation.hpp"
#include "rankphase/verify.hpp"

namespace rankphase {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;
  std::vector<double> snr;
  std::optional<std::int64_t> c_n;
  std::optional<std::int64_t> c_n_sq;
  std::optional<std::size_t> workers;
  bool record_timing = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--reps", o.reps, "Replications per grid point")->check(CLI::PositiveNumber);
  cmd->add_option("--n", o.n, "Number of objects")->check(CLI::Range(3, 1 << 20));
  cmd->add_option("--snr", o.snr, "SNR grid (absolute values)");
  cmd->add_option("--cn", o.c_n, "Sum budget c_n");
  cmd->add_option("--cn-sq", o.c_n_sq, "Sum-of-squares budget");
  cmd->add_option("--workers", o.workers, "Worker threads (default RANK_PHASE_THREADS)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--record-timing", o.record_timing,
                "Record wall time per replication (makes output run-dependent)");
}

ExperimentConfig configure(const std::string& path, const Overrides& o) {
  ExperimentConfig config = load_config(path);
  if (o.seed) config.master_seed = *o.seed;
  if (o.reps) config.reps = *o.reps;
  if (o.n) config.n = *o.n;
  if (!o.snr.empty()) {
    config.snr_grid = o.snr;
    config.beta_grid.clear();
  }
  if (o.c_n) config.c_n = *o.c_n;
  if (o.c_n_sq) config.c_n_sq = *o.c_n_sq;
  if (o.record_timing) config.record_timing = true;
  config.validate();
  return config;
}

std::string results_text(const std::vector<ResultRow>& rows) {
  std::ostringstream csv;
  write_results_csv(csv, rows);
  return csv.str();
}

void print_summary(std::ostream& os, const std::vector<GridPointSummary>& grid) {
  for (const auto& point : grid) {
    os << "n=" << point.n << " snr=" << format_number(point.snr)
       << " regime=" << to_string(point.regime) << " reps=" << point.reps;
    for (const auto& l : point.losses) {
      os << " mean_l" << format_number(l.q) << '=' << l.mean << " median_l"
         << format_number(l.q) << '=' << l.median;
    }
    os << " recovery=" << point.recovery_rate << '\n';
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const Overrides& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = configure(config_path, o);
  const auto rows = run_experiment(config, o.workers.value_or(0));
  const std::string csv = results_text(rows);
  if (out_path.empty()) {
    out << csv;
    print_summary(err, summarize(rows));
  } else {
    write_file(out_path, csv);
    print_summary(out, summarize(rows));
    out << "wrote " << rows.size() * config.q_list.size() << " rows to " << out_path << '\n';
  }
  return kExitOk;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const RegimeReport& report) {
  json doc;
  doc["grid"] = json::array();
  for (const auto& point : report.grid) {
    json p;
    p["n"] = point.n;
    p["snr"] = number_or_null(point.snr);
    p["snr_over_log_n"] = number_or_null(point.snr / std::log(static_cast<double>(point.n)));
    p["regime"] = to_string(point.regime);
    p["reps"] = point.reps;
    p["recovery_rate"] = point.recovery_rate;
    p["losses"] = json::array();
    for (const auto& l : point.losses) {
      p["losses"].push_back({{"q", l.q},
                             {"mean", l.mean},
                             {"median", l.median},
                             {"std_error", l.std_error}});
    }
    doc["grid"].push_back(p);
  }
  doc["fits"] = json::array();
  for (const auto& f : report.fits) {
    json j{{"regime", f.regime}, {"q", f.q}, {"ok", f.ok}, {"snr_points", f.snr_points}};
    j["axes"] = f.regime == "exponential" ? "log(mean loss) vs snr" : "log(mean loss) vs log(snr)";
    if (f.ok) {
      j["slope"] = f.line.slope;
      j["slope_se"] = number_or_null(f.line.slope_se);
      j["intercept"] = f.line.intercept;
      j["r_squared"] = f.line.r_squared;
    } else {
      j["note"] = f.note;
    }
    doc["fits"].push_back(j);
  }
  doc["recovery_curve"] = json::array();
  for (const auto& [x, y] : report.recovery_curve) {
    doc["recovery_curve"].push_back({{"snr_over_log_n", number_or_null(x)}, {"rate", y}});
  }
  doc["gaps"] = report.gaps;
  return doc;
}

std::string summary_csv(const RegimeReport& report) {
  std::ostringstream os;
  os << "n,snr,regime,q,mean_loss,median_loss,std_error,recovery_rate\n";
  for (const auto& point : report.grid) {
    for (const auto& l : point.losses) {
      os << point.n << ',' << format_number(point.snr) << ',' << to_string(point.regime) << ','
         << format_number(l.q) << ',' << format_number(l.mean) << ','
         << format_number(l.median) << ',' << format_number(l.std_error) << ','
         << format_number(point.recovery_rate) << '\n';
    }
  }
  return os.str();
}

std::string fits_csv(const RegimeReport& report) {
  std::ostringstream os;
  os << "regime,q,ok,slope,slope_se,intercept,r_squared,points\n";
  for (const auto& f : report.fits) {
    os << f.regime << ',' << format_number(f.q) << ',' << (f.ok ? 1 : 0) << ','
       << (f.ok ? format_number(f.line.slope) : "") << ','
       << (f.ok ? format_number(f.line.slope_se) : "") << ','
       << (f.ok ? format_number(f.line.intercept) : "") << ','
       << (f.ok ? format_number(f.line.r_squared) : "") << ',' << f.snr_points.size() << '\n';
  }
  return os.str();
}

int cmd_phase_diagram(const std::string& config_path, const std::string& from_results,
                      const std::string& out_dir, const Overrides& o, std::ostream& out) {
  std::vector<ResultRow> rows;
  if (!from_results.empty()) {
    std::ifstream in(from_results, std::ios::binary);
    if (!in) throw InputError("cannot read " + from_results);
    rows = read_results_csv(in);
  } else {
    if (config_path.empty()) throw InputError("phase-diagram needs --config or --from-results");
    const ExperimentConfig config = configure(config_path, o);
    rows = run_experiment(config, o.workers.value_or(0));
  }
  const RegimeReport report = fit_regimes(rows);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "results.csv", results_text(rows));
  write_file(dir / "regimes.json", report_json(report).dump(2));
  write_file(dir / "summary.csv", summary_csv(report));
  write_file(dir / "fits.csv", fits_csv(report));

  print_summary(out, report.grid);
  for (const auto& f : report.fits) {
    out << f.regime << " fit q=" << format_number(f.q) << ": ";
    if (f.ok) {
      out << "slope=" << f.line.slope << " se=" << f.line.slope_se
          << " r2=" << f.line.r_squared << " points=" << f.snr_points.size() << '\n';
    } else {
      out << "not fitted (" << f.note << ")\n";
    }
  }
  out << "wrote results.csv, regimes.json, summary.csv, fits.csv to " << out_dir << '\n';
  return kExitOk;
}

int cmd_estimate(const std::string& input, const std::string& kind_name,
                 const std::string& out_path, std::optional<std::int64_t> c_n,
                 std::optional<std::int64_t> c_n_sq, std::ostream& out) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw InputError("cannot read " + input);
  const InteractionMatrix x = read_matrix_csv(in);
  const ScoreKind kind =
      kind_name == "comparison" ? ScoreKind::Comparison : ScoreKind::Collaboration;
  const ScoreVector scores = score_adaptive(x, kind);
  const RankSpace space = RankSpace::restricted(x.n(), c_n, c_n_sq);
  const ProfileEstimate est = profile_ls_estimate(scores, space);

  std::ostringstream ranks;
  ranks << "index,rank\n";
  for (std::size_t i = 0; i < est.rank.size(); ++i) ranks << i + 1 << ',' << est.rank[i] << '\n';
  if (out_path.empty()) {
    out << ranks.str();
  } else {
    write_file(out_path, ranks.str());
  }
  out << "a_hat=" << format_number(est.fit.a_hat) << '\n'
      << "b_hat=" << format_number(est.fit.b_hat) << '\n'
      << "pl=" << format_number(est.objective) << '\n'
      << "iterations=" << est.trace.iterations << '\n';
  if (est.trace.nonpositive_slope_seen) out << "warning: nonpositive slope during iteration\n";
  return kExitOk;
}

int cmd_oracle_check(std::size_t n, std::size_t instances, std::uint64_t seed,
                     std::ostream& out) {
  const OracleReport r = run_oracle_check(n, instances, seed);
  const auto rate = [&](std::size_t k) {
    return instances ? static_cast<double>(k) / static_cast<double>(instances) : 0.0;
  };
  out << "n=" << n << " instances=" << instances << " seed=" << seed << '\n'
      << "feature_match sum budget: " << r.fm_matches_sum << '/' << instances
      << " (rate " << rate(r.fm_matches_sum) << ")\n"
      << "feature_match sum+square budget: " << r.fm_matches_square << '/' << instances
      << " (rate " << rate(r.fm_matches_square) << ")\n"
      << "feature_match identical vectors: " << r.fm_identical << '/' << 2 * instances << '\n'
      << "feature_match worst objective gap: " << r.fm_worst_gap << '\n'
      << "profile_ls match rate: " << r.profile_match_rate() << " (" << r.profile_matches << '/'
      << instances << ")\n"
      << "profile_ls worst objective gap: " << r.profile_worst_gap << '\n';
  if (!r.feature_match_ok()) {
    out << "FAIL: feature_match disagrees with enumeration, first instance seed "
        << *r.fm_first_mismatch_seed << '\n';
    return kExitFailure;
  }
  out << "PASS\n";
  return kExitOk;
}

int cmd_verify(const std::optional<std::string>& inject, std::uint64_t seed, std::ostream& out) {
  const VerifyReport report = run_verify(inject, seed);
  for (const auto& id : report.identities) {
    out << (id.passed ? "PASS " : "FAIL ") << std::left << std::setw(24) << id.name
        << " max_deviation=" << id.max_deviation << " tolerance=" << id.tolerance
        << " checks=" << id.checks;
    if (!id.passed) out << " seed=" << *id.failing_seed;
    if (!id.detail.empty()) out << " (" << id.detail << ')';
    out << '\n';
  }
  out << (report.passed() ? "all identities hold\n" : "verification failed\n");
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Approximate ranking estimators and phase-diagram experiments", "rank_phase"};
  app.require_subcommand(1);

  std::string config_path, out_path, from_results, input, kind = "comparison";
  Overrides sim_o, pd_o;
  auto* simulate = app.add_subcommand("simulate", "Run a replicated Monte Carlo grid");
  simulate->add_option("--config", config_path, "JSON experiment config")->required();
  simulate->add_option("--out", out_path, "Results CSV (stdout when omitted)");
  add_overrides(simulate, sim_o);

  auto* phase = app.add_subcommand("phase-diagram", "Run a grid and fit the regime slopes");
  phase->add_option("--config", config_path, "JSON experiment config");
  phase->add_option("--from-results", from_results, "Fit an existing results CSV instead");
  phase->add_option("--out", out_path, "Output directory")->required();
  add_overrides(phase, pd_o);

  std::optional<std::int64_t> c_n, c_n_sq;
  auto* estimate = app.add_subcommand("estimate", "Profile least-squares ranking of a matrix");
  estimate->add_option("--input", input, "n x n CSV, blank or NA diagonal")->required();
  estimate->add_option("--kind", kind, "Interaction kind")
      ->check(CLI::IsMember({"comparison", "collaboration"}));
  estimate->add_option("--out", out_path, "Rank CSV (stdout when omitted)");
  estimate->add_option("--cn", c_n, "Sum budget c_n");
  estimate->add_option("--cn-sq", c_n_sq, "Sum-of-squares budget");

  std::size_t oracle_n = 0, instances = 200;
  std::uint64_t seed = 1;
  auto* oracle = app.add_subcommand("oracle-check", "Compare fast solvers with enumeration");
  oracle->add_option("--n", oracle_n, "Number of objects, 3 to 6")->required();
  oracle->add_option("--instances", instances, "Random instances");
  oracle->add_option("--seed", seed, "Seed");

  std::optional<std::string> inject;
  std::uint64_t verify_seed = 20240611;
  auto* verify = app.add_subcommand("verify", "Check the exact identities");
  verify->add_option("--fail-inject", inject, "Corrupt the input of one identity");
  verify->add_option("--seed", verify_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, out_path, sim_o, out, err);
    if (*phase) return cmd_phase_diagram(config_path, from_results, out_path, pd_o, out);
    if (*estimate) return cmd_estimate(input, kind, out_path, c_n, c_n_sq, out);
    if (*oracle) return cmd_oracle_check(oracle_n, instances, seed, out);
    if (*verify) return cmd_verify(inject, verify_seed, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateFitError& e) {
    err << "degenerate fit: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rankphase
