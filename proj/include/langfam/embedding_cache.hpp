#pragma once

// Included from embedding.hpp after EmbeddingVector/ProviderIdentity are declared.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/error.hpp"
#include "langfam/util.hpp"

namespace langfam {

/// Per-provider vector store keyed by content hash.
///
/// File layout (all integers little-endian):
///
///     magic      8 bytes  "LFEMBC01"
///     id_len     u32      length of the identity JSON
///     identity   id_len   {"name","model","dim"}
///     dim        u32
///     count      u64      committed record count
///     records    count x (u64 content hash, dim x f64)
///
/// Appends write records first and patch `count` last; a reader only trusts
/// `count` records, so an interrupted append loses nothing already committed.
class EmbeddingCache {
public:
    static constexpr std::string_view magic = "LFEMBC01";

    explicit EmbeddingCache(ProviderIdentity identity) : identity_(std::move(identity)) {}

    [[nodiscard]] const ProviderIdentity& identity() const noexcept { return identity_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] const EmbeddingVector* find(const std::string& content_hash) const {
        const auto it = entries_.find(parse_hash(content_hash));
        return it == entries_.end() ? nullptr : &it->second;
    }

    void insert(const std::string& content_hash, const EmbeddingVector& v) {
        if (v.dim() != identity_.dim)
            throw Error(ErrorCode::DimensionMismatch, "cache dim " + std::to_string(identity_.dim) + ", vector dim " +
                                                          std::to_string(v.dim()));
        const auto key = parse_hash(content_hash);
        if (entries_.emplace(key, v).second) unsaved_.push_back(key);
    }

    /// Entries in insertion-independent (hash) order.
    [[nodiscard]] const std::map<std::uint64_t, EmbeddingVector>& entries() const noexcept { return entries_; }

    /// Rewrites the whole file atomically.
    void save(const std::filesystem::path& path) {
        std::string bytes = header_bytes(entries_.size());
        for (const auto& [key, v] : entries_) append_record(bytes, key, v);
        write_file_atomic(path, bytes);
        unsaved_.clear();
    }

    /// Appends entries inserted since the last load/save, creating the file if needed.
    void flush(const std::filesystem::path& path) {
        if (!std::filesystem::exists(path)) {
            save(path);
            return;
        }
        std::fstream file(path, std::ios::binary | std::ios::in | std::ios::out);
        if (!file) throw Error(ErrorCode::IoFailure, "cannot open cache " + path.string());
        const auto header = read_header(file, path);
        if (header.identity != identity_)
            throw Error(ErrorCode::CacheMismatch, "cache file " + path.string() + " belongs to " + header.identity.key());
        if (unsaved_.empty()) return;
        const auto record_size = 8 + 8 * static_cast<std::streamoff>(identity_.dim);
        file.seekp(header.records_offset + static_cast<std::streamoff>(header.count) * record_size);
        std::string bytes;
        for (const auto key : unsaved_) append_record(bytes, key, entries_.at(key));
        file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        file.flush();
        std::string count_bytes;
        put_u64(count_bytes, header.count + unsaved_.size());
        file.seekp(header.count_offset);
        file.write(count_bytes.data(), 8);
        file.flush();
        if (!file) throw Error(ErrorCode::IoFailure, "append to " + path.string() + " failed");
        unsaved_.clear();
    }

    static EmbeddingCache load(const std::filesystem::path& path) {
        std::ifstream file(path, std::ios::binary);
        if (!file) throw Error(ErrorCode::IoFailure, "cannot open cache " + path.string());
        const auto header = read_header(file, path);
        EmbeddingCache cache(header.identity);
        std::vector<char> record(8 + 8 * header.identity.dim);
        for (std::uint64_t r = 0; r < header.count; ++r) {
            if (!file.read(record.data(), static_cast<std::streamsize>(record.size())))
                throw Error(ErrorCode::IoFailure, "cache " + path.string() + " truncated at record " + std::to_string(r));
            const auto key = get_u64(record.data());
            std::vector<double> values(header.identity.dim);
            for (std::size_t i = 0; i < values.size(); ++i)
                values[i] = std::bit_cast<double>(get_u64(record.data() + 8 + 8 * i));
            cache.entries_.emplace(key, EmbeddingVector(std::move(values)));
        }
        return cache;
    }

    /// Loads `path` when it exists (identity must match), otherwise starts empty.
    static EmbeddingCache open(const std::filesystem::path& path, const ProviderIdentity& identity) {
        if (path.empty() || !std::filesystem::exists(path)) return EmbeddingCache(identity);
        auto cache = load(path);
        if (cache.identity() != identity)
            throw Error(ErrorCode::CacheMismatch,
                        "cache " + path.string() + " holds " + cache.identity().key() + ", requested " + identity.key());
        return cache;
    }

    static bool looks_like_cache(const std::filesystem::path& path) {
        std::ifstream file(path, std::ios::binary);
        std::array<char, 8> head{};
        return file.read(head.data(), 8) && std::string_view(head.data(), 8) == magic;
    }

private:
    struct Header {
        ProviderIdentity identity;
        std::uint64_t count = 0;
        std::streamoff count_offset = 0;
        std::streamoff records_offset = 0;
    };

    static std::uint64_t parse_hash(const std::string& hex) {
        if (hex.size() != 16) throw Error(ErrorCode::InvalidConfig, "content hash must be 16 hex digits: '" + hex + "'");
        std::uint64_t value = 0;
        for (const char c : hex) {
            value <<= 4;
            if (c >= '0' && c <= '9') value |= static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f') value |= static_cast<std::uint64_t>(c - 'a' + 10);
            else throw Error(ErrorCode::InvalidConfig, "content hash must be lowercase hex: '" + hex + "'");
        }
        return value;
    }

    static void put_u32(std::string& out, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    static void put_u64(std::string& out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    static std::uint32_t get_u32(const char* p) {
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    static std::uint64_t get_u64(const char* p) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }

    static void append_record(std::string& out, std::uint64_t key, const EmbeddingVector& v) {
        put_u64(out, key);
        for (const double x : v.values) put_u64(out, std::bit_cast<std::uint64_t>(x));
    }

    [[nodiscard]] std::string header_bytes(std::uint64_t count) const {
        const auto id = nlohmann::json{{"name", identity_.name}, {"model", identity_.model}, {"dim", identity_.dim}}.dump();
        std::string out(magic);
        put_u32(out, static_cast<std::uint32_t>(id.size()));
        out += id;
        put_u32(out, static_cast<std::uint32_t>(identity_.dim));
        put_u64(out, count);
        return out;
    }

    static Header read_header(std::istream& in, const std::filesystem::path& path) {
        const auto fail = [&](const std::string& what) {
            return Error(ErrorCode::IoFailure, "cache " + path.string() + ": " + what);
        };
        std::array<char, 8> head{};
        if (!in.read(head.data(), 8) || std::string_view(head.data(), 8) != magic) throw fail("bad magic");
        std::array<char, 8> buf{};
        if (!in.read(buf.data(), 4)) throw fail("truncated header");
        const auto id_len = get_u32(buf.data());
        if (id_len > (1U << 20)) throw fail("identity too long");
        std::string id(id_len, '\0');
        if (!in.read(id.data(), id_len)) throw fail("truncated identity");
        Header header;
        try {
            const auto doc = nlohmann::json::parse(id);
            header.identity = {doc.at("name").get<std::string>(), doc.at("model").get<std::string>(),
                               doc.at("dim").get<std::size_t>()};
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("identity: ") + e.what());
        }
        if (!in.read(buf.data(), 4)) throw fail("truncated header");
        if (get_u32(buf.data()) != header.identity.dim) throw fail("dim disagrees with identity");
        header.count_offset = static_cast<std::streamoff>(8 + 4 + id_len + 4);
        if (!in.read(buf.data(), 8)) throw fail("truncated header");
        header.count = get_u64(buf.data());
        header.records_offset = header.count_offset + 8;
        return header;
    }

    ProviderIdentity identity_;
    std::map<std::uint64_t, EmbeddingVector> entries_;
    std::vector<std::uint64_t> unsaved_;
};

}  // namespace langfam
