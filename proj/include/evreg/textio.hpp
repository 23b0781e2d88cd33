#pragma once

#include <string>

namespace evreg {

/// Whole-file read; throws std::runtime_error naming the path when absent.
std::string read_text_file(const std::string& path);

/// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_text(const std::string& path, const std::string& content);

/// Shortest decimal form that parses back to the same double bitwise
/// ("%.17g" trimmed), with negative zero, infinities, and NaN spelled
/// -0, inf, -inf, nan. Used by every text artifact so reruns are
/// byte-identical.
std::string format_double(double x);

/// Inverse of format_double; throws std::runtime_error on junk.
double parse_double(const std::string& s);

}  // namespace evreg
