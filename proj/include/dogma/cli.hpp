#pragma once

#include "dogma/simlab.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dogma::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_abort = 3;
inline constexpr int exit_numeric = 4;

inline constexpr int schema_version = 1;

/// Entry point of the `dogma` executable.
int run(int argc, const char* const* argv);

/// 17 significant digits; "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double v);

std::string records_csv(const std::vector<simlab::ReplicationRecord>& records);
std::string summary_csv(const std::vector<simlab::SummaryRow>& rows);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace dogma::cli
