#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace airylab {

// RFC-4180 field quoting: wrap in quotes when the field contains a comma,
// quote, or newline; double embedded quotes.
std::string csv_escape(const std::string& field);

// Deterministic shortest-roundtrip formatting for doubles so identical runs
// produce byte-identical tables.
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void row(const std::vector<std::string>& fields);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

// SHA-256 of a file's bytes, lowercase hex.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const void* data, std::size_t size);

// JSON run manifest: config echo, seed, artifact hashes, wall time (metadata
// only; nothing in result tables may depend on it).
void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                    const std::string& config_json, std::uint64_t seed,
                    const std::vector<std::filesystem::path>& artifacts,
                    double wall_seconds);

} // namespace airylab
