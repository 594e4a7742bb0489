#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace kia::io {

// Files written by this library are a single-line JSON header, a newline,
// then a little-endian IEEE-754 f64 payload.
struct HeaderFile {
    nlohmann::json header;
    std::vector<double> payload;
};

void append_f64_le(std::string& out, std::span<const double> values);
std::string encode_header_file(const nlohmann::json& header, std::span<const double> payload);
void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Parses header and payload; throws LoadError (Header / Truncated / Shape).
HeaderFile decode_header_file(const std::string& bytes);

// Reads exactly `count` doubles starting at `offset` of the payload.
std::vector<double> take(const std::vector<double>& payload, std::size_t& offset, std::size_t count);

}  // namespace kia::io
