#include "rankphase/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rankphase/errors.hpp"

namespace rankphase {

namespace {

using json = nlohmann::json;

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

bool parse_u64(const std::string& text, std::uint64_t& out) {
  if (text.empty() || text.front() == '-') return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoull(text.c_str(), &end, 10);
  return errno == 0 && end == text.c_str() + text.size();
}

TrueRankPolicy parse_true_rank(const std::string& name) {
  if (name == "identity") return TrueRankPolicy::Identity;
  if (name == "random_feasible") return TrueRankPolicy::RandomFeasible;
  throw ConfigError("true_rank: unknown value '" + name + "'");
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& path) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": wrong type");
  }
}

std::vector<double> get_number_list(const json& obj, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(key + ": expected a list of numbers");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number()) throw ConfigError(key + ": expected a list of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::int64_t get_integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return v.get<std::int64_t>();
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.q.size(); ++k) {
      out << to_string(row.model) << ',' << row.n << ',' << format_number(row.snr) << ','
          << format_number(row.beta) << ',' << format_number(row.sigma) << ','
          << to_string(row.estimator) << ',' << format_number(row.q[k]) << ',' << row.rep << ','
          << row.seed << ',' << format_number(row.losses[k]) << ','
          << (row.exact_recovery ? 1 : 0) << ',' << row.iterations << ','
          << format_number(row.wall_time_ms) << '\n';
    }
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kResultsHeader) {
    throw InputError("results CSV: line 1 is not the expected header");
  }
  std::vector<ResultRow> rows;
  std::vector<double> grid_snrs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    const std::string where = "results CSV line " + std::to_string(line_no);
    if (cells.size() != 13) throw InputError(where + ": expected 13 fields");

    ResultRow row;
    double q = 0.0, value = 0.0, n = 0.0, rep = 0.0, iters = 0.0, recovered = 0.0;
    try {
      row.model = parse_model_kind(cells[0]);
      row.estimator = parse_estimator(cells[5]);
    } catch (const ConfigError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (!parse_double(cells[1], n) || !parse_double(cells[2], row.snr) ||
        !parse_double(cells[3], row.beta) || !parse_double(cells[4], row.sigma) ||
        !parse_double(cells[6], q) || !parse_double(cells[7], rep) ||
        !parse_u64(cells[8], row.seed) || !parse_double(cells[9], value) ||
        !parse_double(cells[10], recovered) || !parse_double(cells[11], iters) ||
        !parse_double(cells[12], row.wall_time_ms)) {
      throw InputError(where + ": unparsable field");
    }
    row.n = static_cast<std::size_t>(n);
    row.rep = static_cast<std::size_t>(rep);
    row.iterations = static_cast<int>(iters);
    row.exact_recovery = recovered != 0.0;

    if (!rows.empty()) {
      ResultRow& last = rows.back();
      if (last.model == row.model && last.n == row.n && last.snr == row.snr &&
          last.beta == row.beta && last.sigma == row.sigma && last.estimator == row.estimator &&
          last.rep == row.rep && last.seed == row.seed) {
        last.q.push_back(q);
        last.losses.push_back(value);
        continue;
      }
    }
    std::size_t g = 0;
    while (g < grid_snrs.size() && grid_snrs[g] != row.snr) ++g;
    if (g == grid_snrs.size()) grid_snrs.push_back(row.snr);
    row.grid_index = g;
    row.q.push_back(q);
    row.losses.push_back(value);
    rows.push_back(std::move(row));
  }
  return rows;
}

InteractionMatrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<std::string>> cells;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    cells.push_back(split_commas(line));
  }
  while (!cells.empty() && (cells.back().empty() ||
                            (cells.back().size() == 1 && cells.back()[0].empty()))) {
    cells.pop_back();
  }
  const std::size_t n = cells.size();
  if (n < 3) throw InputError("matrix CSV: need at least 3 rows, found " + std::to_string(n));
  InteractionMatrix x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cells[i].size() != n) {
      throw InputError("matrix CSV: row " + std::to_string(i + 1) + " has " +
                       std::to_string(cells[i].size()) + " columns, expected " +
                       std::to_string(n) + " (matrix must be square)");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::string& cell = cells[i][j];
      const std::string where =
          "row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1);
      if (i == j) {
        if (!cell.empty() && cell != "NA") {
          throw InputError("matrix CSV: diagonal must be blank or NA at " + where);
        }
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw InputError("matrix CSV: missing or non-numeric value at " + where);
      }
      if (!std::isfinite(v)) throw InputError("matrix CSV: non-finite value at " + where);
      x(i, j) = v;
    }
  }
  return x;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  ExperimentConfig config;
  std::string snr_unit = "absolute";
  for (const auto& [key, value] : doc.items()) {
    if (key == "model") {
      config.model = parse_model_kind(get_field<std::string>(doc, key, key));
    } else if (key == "n") {
      const auto n = get_integer(doc, key, key);
      if (n < 3) throw ConfigError("n: must be >= 3");
      config.n = static_cast<std::size_t>(n);
    } else if (key == "sigma") {
      config.sigma = get_field<double>(doc, key, key);
    } else if (key == "alpha") {
      config.alpha = get_field<double>(doc, key, key);
    } else if (key == "snr_grid") {
      config.snr_grid = get_number_list(doc, key);
    } else if (key == "snr_unit") {
      snr_unit = get_field<std::string>(doc, key, key);
    } else if (key == "beta_grid") {
      config.beta_grid = get_number_list(doc, key);
    } else if (key == "q_list") {
      config.q_list = get_number_list(doc, key);
    } else if (key == "reps") {
      const auto reps = get_integer(doc, key, key);
      if (reps < 1) throw ConfigError("reps: must be >= 1");
      config.reps = static_cast<std::size_t>(reps);
    } else if (key == "seed" || key == "master_seed") {
      if (!value.is_number_unsigned()) throw ConfigError(key + ": expected a nonnegative integer");
      config.master_seed = value.get<std::uint64_t>();
    } else if (key == "estimator") {
      config.estimator = parse_estimator(get_field<std::string>(doc, key, key));
    } else if (key == "space") {
      if (!value.is_object()) throw ConfigError("space: expected an object");
      for (const auto& [sub, ignored] : value.items()) {
        (void)ignored;
        const std::string path = "space." + sub;
        if (sub == "c_n") {
          config.c_n = get_integer(value, sub, path);
        } else if (sub == "c_n_sq") {
          config.c_n_sq = get_integer(value, sub, path);
        } else {
          throw ConfigError(path + ": unknown field");
        }
      }
    } else if (key == "true_rank") {
      config.true_rank = parse_true_rank(get_field<std::string>(doc, key, key));
    } else if (key == "record_timing") {
      config.record_timing = get_field<bool>(doc, key, key);
    } else {
      throw ConfigError(key + ": unknown field");
    }
  }

  const double n = static_cast<double>(config.n);
  double unit = 1.0;
  if (snr_unit == "log_n") {
    unit = std::log(n);
  } else if (snr_unit == "inverse_n_squared") {
    unit = 1.0 / (n * n);
  } else if (snr_unit != "absolute") {
    throw ConfigError("snr_unit: expected absolute, log_n or inverse_n_squared");
  }
  for (double& s : config.snr_grid) s *= unit;

  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace rankphase
