#pragma once

#include "rmdp/io.hpp"
#include "rmdp/robust_improve.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace rmdp::cli {

namespace fs = std::filesystem;

enum class Format { csv, json };

Format parse_format(const std::string& name);
const char* extension(Format f);

/// Shortest decimal string that reads back to the same double.
std::string num(double v);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Writes `stem`.csv or `stem`.json (an array of objects; numeric cells stay numbers).
fs::path write_table(const fs::path& stem, const Table& table, Format format);

/// Zeroes wall-clock fields so that repeated runs produce identical bytes.
RunTrace without_timing(RunTrace trace);
ImprovementTrace without_timing(ImprovementTrace trace);

fs::path write_trace(const fs::path& stem, const RunTrace& trace, Format format);
fs::path write_improvement(const fs::path& stem, const ImprovementTrace& trace, Format format);

/// SHA-1 of "blob <size>\0<content>", the object id git assigns to a file.
std::string git_blob_sha1(std::string_view content);
std::string file_sha1(const fs::path& path);

/// Runs tasks 0..n-1 on `jobs` threads. Returns one error message per task, empty on success.
std::vector<std::string> run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& task);

}  // namespace rmdp::cli
