#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fifuse::csv {

/// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::vector<std::string> split_line(std::string_view line);
std::string join(const std::vector<std::string>& fields);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Table& table);

}  // namespace fifuse::csv
