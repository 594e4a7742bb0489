#include "kia/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kia/errors.hpp"

namespace kia::io {

void append_f64_le(std::string& out, std::span<const double> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * 8);
    char* dst = out.data() + start;
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            *dst++ = static_cast<char>(bits & 0xFFu);
            bits >>= 8;
        }
    }
}

std::string encode_header_file(const nlohmann::json& header, std::span<const double> payload) {
    std::string out = header.dump();
    out.push_back('\n');
    append_f64_le(out, payload);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError(LoadError::Kind::Io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

HeaderFile decode_header_file(const std::string& bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw LoadError(LoadError::Kind::Header, "missing header line");
    HeaderFile out;
    try {
        out.header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(LoadError::Kind::Header, std::string("malformed header: ") + e.what());
    }
    if (!out.header.is_object()) throw LoadError(LoadError::Kind::Header, "header is not a JSON object");
    const std::size_t body = bytes.size() - nl - 1;
    if (body % 8 != 0) {
        throw LoadError(LoadError::Kind::Truncated,
                        "payload length " + std::to_string(body) + " is not a multiple of 8 bytes");
    }
    out.payload.resize(body / 8);
    const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
    for (std::size_t i = 0; i < out.payload.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | src[i * 8 + static_cast<std::size_t>(b)];
        out.payload[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::vector<double> take(const std::vector<double>& payload, std::size_t& offset, std::size_t count) {
    if (offset + count > payload.size()) {
        throw LoadError(LoadError::Kind::Truncated, "payload holds " + std::to_string(payload.size()) +
                                                        " values, header requires at least " +
                                                        std::to_string(offset + count));
    }
    std::vector<double> out(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                            payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
    offset += count;
    return out;
}

}  // namespace kia::io
