#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pseudopanel::textio {

// Shortest representation that parses back to the same double.
std::string format_double(double v);
// Fixed notation with the given number of decimals (report tables).
std::string fixed(double v, int decimals);

double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

std::vector<std::string_view> split_csv(std::string_view line);
std::string_view trim(std::string_view s);

// Writes to a sibling temporary and renames it over the target.
void atomic_write(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace pseudopanel::textio
