#pragma once

#include <string>
#include <vector>

namespace mcal::io {

/// Writes `content` to `path` via a temp file + rename, so readers never see
/// a partially written file.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Splits a CSV line; empty fields are preserved as empty strings.
std::vector<std::string> split_csv(const std::string& line);

/// Parses a double, throwing std::invalid_argument with context on failure.
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace mcal::io
