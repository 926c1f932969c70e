#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/embedding.hpp"
#include "langfam/error.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

namespace langfam {

/// (1 + cos(a, b)) / 2. Dot products accumulate left to right so results are
/// reproducible bit for bit.
inline double normalized_cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.empty()) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional vectors");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero-norm vector");
    const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    const double s = 0.5 + 0.5 * cosine;
    return std::clamp(s, 0.0, 1.0);
}

inline double normalized_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    return normalized_cosine(a.span(), b.span());
}

/// Symmetric language-by-language similarity table, row-major.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;

    SimilarityMatrix(std::vector<std::string> languages, std::vector<double> values, std::string provider = {})
        : languages_(std::move(languages)), values_(std::move(values)), provider_(std::move(provider)) {
        const auto n = languages_.size();
        if (values_.size() != n * n)
            throw Error(ErrorCode::DimensionMismatch, "matrix needs " + std::to_string(n * n) + " values");
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double v = at(i, j);
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw Error(ErrorCode::InvariantViolation, "similarity outside [0,1] at " + languages_[i] + "," +
                                                                   languages_[j]);
                if (v != at(j, i))
                    throw Error(ErrorCode::InvariantViolation, "matrix not symmetric at " + languages_[i] + "," +
                                                                   languages_[j]);
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return languages_.size(); }
    [[nodiscard]] std::span<const std::string> languages() const noexcept { return languages_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] const std::string& provider() const noexcept { return provider_; }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values_[i * languages_.size() + j]; }

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const {
        const auto key = ascii_lower(name);
        for (std::size_t i = 0; i < languages_.size(); ++i) {
            if (ascii_lower(languages_[i]) == key) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t require(std::string_view name) const {
        if (const auto i = index_of(name)) return *i;
        throw Error(ErrorCode::UnknownLanguage, "language '" + std::string(name) + "' is not in the matrix");
    }

    [[nodiscard]] double between(std::string_view a, std::string_view b) const { return at(require(a), require(b)); }

    /// Rows and columns restricted to `names`, in that order.
    [[nodiscard]] SimilarityMatrix subset(std::span<const std::string> names) const {
        std::vector<std::size_t> idx;
        for (const auto& name : names) idx.push_back(require(name));
        std::vector<double> values;
        values.reserve(idx.size() * idx.size());
        std::vector<std::string> langs;
        for (const auto i : idx) {
            langs.push_back(languages_[i]);
            for (const auto j : idx) values.push_back(at(i, j));
        }
        return SimilarityMatrix(std::move(langs), std::move(values), provider_);
    }

    friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

private:
    std::vector<std::string> languages_;
    std::vector<double> values_;
    std::string provider_;
};

/// Pairwise normalized cosine over aggregate vectors. Upper triangle is
/// computed once and mirrored; the diagonal is exactly 1.
inline SimilarityMatrix build_similarity_matrix(std::span<const LanguageEmbedding> embeddings,
                                                std::string provider = {}) {
    const auto n = embeddings.size();
    if (n < 2) throw Error(ErrorCode::DegenerateInput, "similarity matrix needs at least 2 languages");
    const auto dim = embeddings.front().aggregate.dim();
    std::vector<std::string> names;
    for (const auto& e : embeddings) {
        if (e.aggregate.dim() != dim)
            throw Error(ErrorCode::DimensionMismatch, e.language + " has dim " + std::to_string(e.aggregate.dim()));
        bool nonzero = false;
        for (const double x : e.aggregate.values) nonzero = nonzero || x != 0.0;
        if (!nonzero) throw Error(ErrorCode::ZeroVector, e.language + " has a zero aggregate vector");
        names.push_back(e.language);
    }
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        values[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = normalized_cosine(embeddings[i].aggregate, embeddings[j].aggregate);
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    return SimilarityMatrix(std::move(names), std::move(values), std::move(provider));
}

struct GroupStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::size_t pairs = 0;
};

struct SimilarityStats {
    /// Non-reference languages in registry order; mean over other
    /// non-reference languages.
    std::vector<std::pair<std::string, double>> mean_similarity;
    /// Similarity of each non-reference language to the reference language.
    std::optional<std::vector<std::pair<std::string, double>>> reference_column;
    std::optional<double> reference_mean;
    std::string centroid_language;
    std::map<std::string, GroupStats> groups;

    [[nodiscard]] double mean_of(std::string_view language) const {
        for (const auto& [name, value] : mean_similarity) {
            if (ascii_lower(name) == ascii_lower(language)) return value;
        }
        throw Error(ErrorCode::UnknownLanguage, "no mean similarity for '" + std::string(language) + "'");
    }
};

namespace detail {

/// Matrix indices in registry order; every matrix language must be registered.
inline std::vector<std::size_t> registry_order(const SimilarityMatrix& matrix, const LanguageRegistry& registry) {
    std::vector<std::pair<std::size_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        const auto r = registry.index_of(matrix.languages()[i]);
        if (!r) throw Error(ErrorCode::UnknownLanguage, "'" + matrix.languages()[i] + "' is not in the registry");
        ranked.emplace_back(*r, i);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> order;
    for (const auto& [r, i] : ranked) order.push_back(i);
    return order;
}

inline bool is_reference(const LanguageRegistry& registry, std::string_view name) {
    return registry.language(name).is_reference;
}

}  // namespace detail

/// Mean and population sd of pairwise similarities among `members`.
inline GroupStats group_stats(const SimilarityMatrix& matrix, std::span<const std::string> members) {
    std::vector<double> pairs;
    for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) pairs.push_back(matrix.between(members[a], members[b]));
    }
    GroupStats g;
    g.pairs = pairs.size();
    if (pairs.empty()) return g;
    double sum = 0.0;
    for (const double p : pairs) sum += p;
    g.mean = sum / static_cast<double>(pairs.size());
    double ss = 0.0;
    for (const double p : pairs) ss += (p - g.mean) * (p - g.mean);
    g.stddev = std::sqrt(ss / static_cast<double>(pairs.size()));
    return g;
}

/// Similarities to the reference language, registry order.
inline std::vector<std::pair<std::string, double>> reference_column(const SimilarityMatrix& matrix,
                                                                    const LanguageRegistry& registry) {
    const auto* reference = registry.reference();
    if (reference == nullptr) throw Error(ErrorCode::ReferenceLanguageMissing, "registry has no reference language");
    const auto ref = matrix.index_of(reference->name);
    if (!ref) throw Error(ErrorCode::ReferenceLanguageMissing, reference->name + " is not in the matrix");
    std::vector<std::pair<std::string, double>> column;
    for (const auto i : detail::registry_order(matrix, registry)) {
        if (i == *ref) continue;
        column.emplace_back(matrix.languages()[i], matrix.at(i, *ref));
    }
    return column;
}

/// Centrality statistics. Groups default to resource tiers when `groups` is empty.
inline SimilarityStats similarity_stats(const SimilarityMatrix& matrix, const LanguageRegistry& registry,
                                        const std::map<std::string, std::vector<std::string>>& groups = {}) {
    SimilarityStats stats;
    const auto order = detail::registry_order(matrix, registry);
    std::vector<std::size_t> programming;
    for (const auto i : order) {
        if (!detail::is_reference(registry, matrix.languages()[i])) programming.push_back(i);
    }
    double best = -1.0;
    for (const auto i : programming) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto j : programming) {
            if (j == i) continue;
            sum += matrix.at(i, j);
            ++count;
        }
        const double mean = count == 0 ? 0.0 : sum / static_cast<double>(count);
        stats.mean_similarity.emplace_back(matrix.languages()[i], mean);
        if (mean > best) {
            best = mean;
            stats.centroid_language = matrix.languages()[i];
        }
    }
    const auto* reference = registry.reference();
    if (reference != nullptr && matrix.index_of(reference->name)) {
        stats.reference_column = reference_column(matrix, registry);
        double sum = 0.0;
        for (const auto& [name, value] : *stats.reference_column) sum += value;
        if (!stats.reference_column->empty())
            stats.reference_mean = sum / static_cast<double>(stats.reference_column->size());
    }
    if (groups.empty()) {
        std::map<std::string, std::vector<std::string>> tiers;
        for (const auto i : programming) {
            const auto& name = matrix.languages()[i];
            tiers[std::string(to_string(registry.language(name).tier))].push_back(name);
        }
        for (const auto& [tier, members] : tiers) stats.groups[tier] = group_stats(matrix, members);
    } else {
        for (const auto& [group, members] : groups) stats.groups[group] = group_stats(matrix, members);
    }
    return stats;
}

namespace detail {

inline std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (const char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

}  // namespace detail

/// CSV with a header row and a leading name column; values at full precision.
/// Optional `# key=value` comment lines precede the header.
inline std::string to_csv(const SimilarityMatrix& matrix, std::string_view manifest_digest = {}) {
    std::string out;
    if (!manifest_digest.empty()) out += "# manifest=" + std::string(manifest_digest) + "\n";
    if (!matrix.provider().empty()) out += "# provider=" + matrix.provider() + "\n";
    out += "language";
    for (const auto& name : matrix.languages()) out += "," + detail::csv_field(name);
    out += "\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out += detail::csv_field(matrix.languages()[i]);
        for (std::size_t j = 0; j < matrix.size(); ++j) out += "," + format_double(matrix.at(i, j));
        out += "\n";
    }
    return out;
}

inline SimilarityMatrix matrix_from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string provider;
    std::vector<std::string> header;
    std::vector<std::string> names;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto eq = line.find("provider=");
            if (eq != std::string::npos) provider = line.substr(eq + 9);
            continue;
        }
        auto fields = detail::split_csv_line(line);
        if (header.empty()) {
            header = std::move(fields);
            continue;
        }
        if (fields.size() != header.size())
            throw Error(ErrorCode::MalformedRecord, "matrix row '" + fields.front() + "' has " +
                                                        std::to_string(fields.size()) + " fields, header has " +
                                                        std::to_string(header.size()));
        names.push_back(fields.front());
        if (names.size() > header.size() - 1 || names.back() != header[names.size()])
            throw Error(ErrorCode::MalformedRecord, "matrix row order must match the header");
        for (std::size_t f = 1; f < fields.size(); ++f) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(fields[f], &used));
                if (used != fields[f].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw Error(ErrorCode::MalformedRecord, "bad number '" + fields[f] + "' in row " + names.back());
            }
        }
    }
    if (header.size() < 2 || names.size() != header.size() - 1)
        throw Error(ErrorCode::MalformedRecord, "matrix CSV is not square");
    return SimilarityMatrix(std::move(names), std::move(values), std::move(provider));
}

inline nlohmann::json to_json(const SimilarityMatrix& matrix, const SimilarityStats* stats = nullptr,
                              std::string_view manifest_digest = {}) {
    nlohmann::json doc;
    if (!manifest_digest.empty()) doc["manifest"] = std::string(manifest_digest);
    doc["provider"] = matrix.provider();
    doc["languages"] = std::vector<std::string>(matrix.languages().begin(), matrix.languages().end());
    doc["values"] = nlohmann::json::array();
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < matrix.size(); ++j) row.push_back(matrix.at(i, j));
        doc["values"].push_back(row);
    }
    if (stats != nullptr) {
        nlohmann::json s;
        s["centroid_language"] = stats->centroid_language;
        s["mean_similarity"] = nlohmann::json::object();
        for (const auto& [name, v] : stats->mean_similarity) s["mean_similarity"][name] = v;
        if (stats->reference_column) {
            s["reference_column"] = nlohmann::json::object();
            for (const auto& [name, v] : *stats->reference_column) s["reference_column"][name] = v;
        }
        if (stats->reference_mean) s["reference_mean"] = *stats->reference_mean;
        s["groups"] = nlohmann::json::object();
        for (const auto& [group, g] : stats->groups)
            s["groups"][group] = {{"mean", g.mean}, {"stddev", g.stddev}, {"pairs", g.pairs}};
        doc["stats"] = std::move(s);
    }
    return doc;
}

}  // namespace langfam
