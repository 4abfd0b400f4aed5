#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rankphase/simulation.hpp"
#include "rankphase/types.hpp"

namespace rankphase {

inline constexpr const char* kResultsHeader =
    "model,n,snr,beta,sigma,estimator,q,rep,seed,loss,exact_recovery,iters,wall_time_ms";

// 17 significant digits, so doubles survive a text round trip.
std::string format_number(double value);

// One line per (row, q), header first, trailing newline.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

// Inverse of write_results_csv. Consecutive lines that share everything but
// (q, loss) fold back into one row. Tolerates CRLF. Throws InputError with
// the line number on malformed input.
std::vector<ResultRow> read_results_csv(std::istream& in);

// n x n comma-separated matrix with a blank or NA diagonal. Throws
// InputError naming the first offending row and column (1-based).
InteractionMatrix read_matrix_csv(std::istream& in);

// JSON object with the ExperimentConfig fields. Unknown keys and bad values
// raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes text, adding a final newline when missing.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rankphase
