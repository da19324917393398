#include "output.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

namespace rmdp::cli {

Format parse_format(const std::string& name) {
    if (name == "csv") return Format::csv;
    if (name == "json") return Format::json;
    throw std::invalid_argument("format must be csv or json");
}

const char* extension(Format f) { return f == Format::csv ? ".csv" : ".json"; }

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::validation, "cannot write " + path.string());
    return os;
}

Json cell_json(const std::string& c) {
    double v;
    const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
    if (!c.empty() && res.ec == std::errc() && res.ptr == c.data() + c.size()) return v;
    return c;
}

}  // namespace

fs::path write_table(const fs::path& stem, const Table& table, Format format) {
    fs::path path = stem;
    path += extension(format);
    auto os = open_out(path);
    if (format == Format::csv) {
        for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << table.header[i];
        os << '\n';
        for (const auto& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
            os << '\n';
        }
    } else {
        Json arr = Json::array();
        for (const auto& row : table.rows) {
            Json obj = Json::object();
            for (std::size_t i = 0; i < row.size(); ++i) obj[table.header[i]] = cell_json(row[i]);
            arr.push_back(std::move(obj));
        }
        os << arr.dump(1) << '\n';
    }
    return path;
}

RunTrace without_timing(RunTrace trace) {
    for (auto& r : trace.records) r.elapsed_ns = 0;
    trace.wall_ms = 0.0;
    return trace;
}

ImprovementTrace without_timing(ImprovementTrace trace) {
    for (auto& r : trace.records) r.elapsed_ns = 0;
    trace.wall_ms = 0.0;
    return trace;
}

fs::path write_trace(const fs::path& stem, const RunTrace& trace, Format format) {
    fs::path path = stem;
    path += extension(format);
    auto os = open_out(path);
    if (format == Format::csv) {
        write_trace_csv(os, trace);
    } else {
        Json records = Json::array();
        for (const auto& r : trace.records)
            records.push_back({{"iter", r.iter}, {"value", r.value}, {"gap", r.gap}, {"step", r.step},
                               {"elapsed_ns", r.elapsed_ns}});
        os << Json{{"summary", trace_summary(trace)}, {"records", records}}.dump(1) << '\n';
    }
    return path;
}

fs::path write_improvement(const fs::path& stem, const ImprovementTrace& trace, Format format) {
    fs::path path = stem;
    path += extension(format);
    auto os = open_out(path);
    if (format == Format::csv) {
        os << kImprovementCsvHeader << '\n';
        for (const auto& r : trace.records)
            os << r.k << ',' << num(r.critic_value) << ',' << num(r.grad_norm) << ',' << num(r.policy_delta) << ','
               << r.elapsed_ns << '\n';
    } else {
        Json records = Json::array();
        for (const auto& r : trace.records)
            records.push_back({{"k", r.k}, {"critic_value", r.critic_value}, {"grad_norm", r.grad_norm},
                               {"policy_delta", r.policy_delta}, {"elapsed_ns", r.elapsed_ns}});
        os << Json{{"best_k", trace.best_k}, {"running_average", trace.running_average}, {"wall_ms", trace.wall_ms},
                   {"records", records}}
                  .dump(1)
           << '\n';
    }
    return path;
}

std::string git_blob_sha1(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string file_sha1(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::validation, "cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return git_blob_sha1(ss.str());
}

std::vector<std::string> run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (errors[i].empty()) errors[i] = "unknown error";
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return errors;
}

}  // namespace rmdp::cli
