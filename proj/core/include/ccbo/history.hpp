#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ccbo/driver.hpp"

namespace ccbo {

/// Line-oriented JSON document: a header line (problem, configuration, DoE),
/// one line per iteration, and a closing line with the final incumbent.
/// Wall-clock times are not part of the document so that equal seeds give
/// byte-identical files.
void write_history(const RunHistory& history, std::ostream& out);
void write_history(const RunHistory& history, const std::filesystem::path& path);

/// Throws IoError (unreadable) or ConfigError (malformed).
RunHistory read_history(const std::filesystem::path& path);
RunHistory read_history(std::istream& in);

/// iteration, wall_time_s per record.
void write_timing_csv(const RunHistory& history, const std::filesystem::path& path);

}  // namespace ccbo
