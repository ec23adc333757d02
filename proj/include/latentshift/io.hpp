#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latentshift/errors.hpp"
#include "latentshift/matrix.hpp"

namespace latentshift::io {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path.string());
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed: " + path.string());
    }
    return content;
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    return fnv1a64(read_file(path));
}

/// Write-to-temp then atomic rename, so a failed stage never leaves a partial
/// artifact under the final name.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot create file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            fs::remove(tmp);
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("rename failed for " + path.string() + ": " + ec.message());
    }
}

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        throw NumericError("format_double failed");
    }
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        return std::nullopt;
    }
    return v;
}

// Little-endian binary encoding, independent of host order.

inline void put_u8(std::string& out, std::uint8_t v) {
    out.push_back(static_cast<char>(v));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

inline void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

/// Sequential little-endian reader with bounds checking; truncated input
/// surfaces as CheckpointError rather than UB.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string str() {
        const std::uint32_t len = u32();
        auto s = take(len);
        return std::string(s);
    }

    bool exhausted() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view take(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw CheckpointError("truncated data: wanted " + std::to_string(n) + " bytes, " +
                                  std::to_string(data_.size() - pos_) + " left");
        }
        std::string_view s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

/// Row-major 64-bit little-endian matrix blob with a dims header.
inline void put_matrix(std::string& out, const Matrix& m) {
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.values()) put_f64(out, v);
}

inline Matrix read_matrix(ByteReader& r) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 28)) {
        throw CheckpointError("matrix blob implausibly large: " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    Matrix m(rows, cols);
    for (double& v : m.values()) v = r.f64();
    return m;
}

} // namespace latentshift::io
