#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <vector>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "langfam/error.hpp"

namespace langfam {

inline constexpr std::uint64_t fnv1a64_offset = 14695981039346656037ULL;

/// 64-bit FNV-1a. Stable across platforms; used for content hashes and digests.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = fnv1a64_offset) noexcept {
    for (const char c : bytes) {
        state ^= static_cast<unsigned char>(c);
        state *= 1099511628211ULL;
    }
    return state;
}

inline std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf, 16);
}

inline std::string digest_hex(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double value) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

inline std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

inline std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.empty()) throw Error(ErrorCode::IoFailure, "empty output path");
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot rename into " + path.string() + ": " + ec.message());
}

}  // namespace langfam

#include <cmath>
#include <random>

namespace langfam {

/// mt19937_64 with portable derived distributions (the std:: distributions
/// are implementation-defined, so seeded outputs would differ across
/// standard libraries).
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, bound), by rejection.
    std::uint64_t index(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = 0;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * u2);
        return r * std::cos(two_pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace langfam
