#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "langfam/embedding.hpp"
#include "langfam/error.hpp"
#include "langfam/similarity.hpp"

namespace langfam {

enum class DissimilaritySource { OneMinusSimilarity, EuclideanOnEmbeddings };

constexpr std::string_view to_string(DissimilaritySource source) noexcept {
    return source == DissimilaritySource::OneMinusSimilarity ? "one-minus-sim" : "euclidean";
}

inline DissimilaritySource parse_dissimilarity(std::string_view text) {
    if (text == "one-minus-sim" || text == "one_minus_similarity") return DissimilaritySource::OneMinusSimilarity;
    if (text == "euclidean" || text == "euclidean_on_embeddings") return DissimilaritySource::EuclideanOnEmbeddings;
    throw Error(ErrorCode::InvalidConfig, "unknown dissimilarity mode '" + std::string(text) + "'");
}

/// Symmetric, non-negative, zero diagonal.
struct DissimilarityMatrix {
    std::vector<std::string> languages;
    std::vector<double> values;  // row-major
    DissimilaritySource source = DissimilaritySource::OneMinusSimilarity;

    [[nodiscard]] std::size_t size() const noexcept { return languages.size(); }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * languages.size() + j]; }

    void check() const {
        const auto n = languages.size();
        if (values.size() != n * n) throw Error(ErrorCode::DimensionMismatch, "dissimilarity matrix is not square");
        for (std::size_t i = 0; i < n; ++i) {
            if (at(i, i) != 0.0) throw Error(ErrorCode::InvariantViolation, "nonzero self-dissimilarity");
            for (std::size_t j = 0; j < n; ++j) {
                const double v = at(i, j);
                if (!std::isfinite(v) || v < 0.0 || v != at(j, i))
                    throw Error(ErrorCode::InvariantViolation, "dissimilarity must be symmetric and non-negative");
            }
        }
    }
};

/// d = 1 - s.
inline DissimilarityMatrix to_dissimilarity(const SimilarityMatrix& matrix) {
    DissimilarityMatrix d;
    d.languages.assign(matrix.languages().begin(), matrix.languages().end());
    d.source = DissimilaritySource::OneMinusSimilarity;
    const auto n = matrix.size();
    d.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 1.0 - matrix.at(i, j);
            d.values[i * n + j] = v;
            d.values[j * n + i] = v;
        }
    }
    return d;
}

/// Pairwise Euclidean distances between aggregate vectors.
inline DissimilarityMatrix euclidean_dissimilarity(std::span<const LanguageEmbedding> embeddings) {
    DissimilarityMatrix d;
    d.source = DissimilaritySource::EuclideanOnEmbeddings;
    const auto n = embeddings.size();
    for (const auto& e : embeddings) d.languages.push_back(e.language);
    d.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = embeddings[i].aggregate.values;
            const auto& b = embeddings[j].aggregate.values;
            if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "aggregate dims differ");
            double ss = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) ss += (a[c] - b[c]) * (a[c] - b[c]);
            d.values[i * n + j] = d.values[j * n + i] = std::sqrt(ss);
        }
    }
    return d;
}

/// Restricts `embeddings` to `names` (in that order) before computing distances.
inline DissimilarityMatrix euclidean_dissimilarity(std::span<const LanguageEmbedding> embeddings,
                                                   std::span<const std::string> names) {
    std::vector<LanguageEmbedding> picked;
    for (const auto& name : names) {
        const auto it = std::find_if(embeddings.begin(), embeddings.end(),
                                     [&](const auto& e) { return ascii_lower(e.language) == ascii_lower(name); });
        if (it == embeddings.end()) throw Error(ErrorCode::UnknownLanguage, "no embedding for '" + name + "'");
        picked.push_back(*it);
    }
    return euclidean_dissimilarity(picked);
}

/// One agglomeration step. Leaves are nodes 0..n-1; merge t creates node n+t.
/// left < right.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;

    friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
    std::vector<std::string> leaves;
    std::vector<Merge> merges;

    [[nodiscard]] std::size_t leaf_count() const noexcept { return leaves.size(); }

    friend bool operator==(const Dendrogram&, const Dendrogram&) = default;
};

inline constexpr double tie_epsilon = 1e-12;

/// Throws InvariantViolation unless the merge list is a well-formed binary
/// tree with non-decreasing heights.
inline void check_dendrogram(const Dendrogram& dendrogram) {
    const auto n = dendrogram.leaves.size();
    if (n < 2 || dendrogram.merges.size() != n - 1)
        throw Error(ErrorCode::InvariantViolation, "dendrogram needs exactly n-1 merges");
    std::vector<bool> used(2 * n - 1, false);
    std::vector<std::size_t> sizes(2 * n - 1, 1);
    double previous = 0.0;
    for (std::size_t t = 0; t < dendrogram.merges.size(); ++t) {
        const auto& m = dendrogram.merges[t];
        if (m.left >= n + t || m.right >= n + t || m.left >= m.right || used[m.left] || used[m.right])
            throw Error(ErrorCode::InvariantViolation, "merge " + std::to_string(t) + " references an invalid node");
        used[m.left] = used[m.right] = true;
        sizes[n + t] = sizes[m.left] + sizes[m.right];
        if (m.size != sizes[n + t]) throw Error(ErrorCode::InvariantViolation, "merge size mismatch");
        if (!(m.height >= previous - tie_epsilon * std::max(1.0, previous)))
            throw Error(ErrorCode::InvariantViolation, "merge heights decrease at step " + std::to_string(t));
        previous = std::max(previous, m.height);
    }
}

/// Ward's minimum-variance agglomeration with the Lance-Williams update on
/// squared dissimilarities:
///
///   d(i+j, k)^2 = [(ni+nk) d(i,k)^2 + (nj+nk) d(j,k)^2 - nk d(i,j)^2] / (ni+nj+nk)
///
/// Merge height is d(i,j). Ties (within tie_epsilon on d^2) go to the lowest
/// (slot i, slot j) pair; a merged cluster keeps the lower slot.
inline Dendrogram ward_linkage(const DissimilarityMatrix& d) {
    const auto n = d.size();
    if (n < 2) throw Error(ErrorCode::DegenerateInput, "Ward linkage needs at least 2 leaves");
    d.check();

    std::vector<double> dist2(n * n);
    for (std::size_t i = 0; i < n * n; ++i) dist2[i] = d.values[i] * d.values[i];
    std::vector<bool> active(n, true);
    std::vector<std::size_t> node(n);
    std::vector<std::size_t> size(n, 1);
    std::iota(node.begin(), node.end(), std::size_t{0});

    Dendrogram out;
    out.leaves = d.languages;
    out.merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0;
        std::size_t bj = 0;
        double best = 0.0;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = dist2[i * n + j];
                if (!found || v < best - tie_epsilon) {
                    best = v;
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        const double ni = static_cast<double>(size[bi]);
        const double nj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double nk = static_cast<double>(size[k]);
            const double updated =
                ((ni + nk) * dist2[bi * n + k] + (nj + nk) * dist2[bj * n + k] - nk * best) / (ni + nj + nk);
            dist2[bi * n + k] = dist2[k * n + bi] = std::max(updated, 0.0);
        }
        const auto left = std::min(node[bi], node[bj]);
        const auto right = std::max(node[bi], node[bj]);
        size[bi] += size[bj];
        out.merges.push_back({left, right, std::sqrt(best), size[bi]});
        node[bi] = n + step;
        active[bj] = false;
    }
    check_dendrogram(out);
    return out;
}

/// Flat clustering: labels are 0..k-1, numbered by first appearance in leaf order.
struct Partition {
    std::vector<std::string> languages;
    std::vector<std::size_t> labels;
    std::size_t k = 0;

    [[nodiscard]] std::vector<std::vector<std::string>> members() const {
        std::vector<std::vector<std::string>> out(k);
        for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(languages[i]);
        return out;
    }

    [[nodiscard]] std::size_t label_of(std::string_view language) const {
        for (std::size_t i = 0; i < languages.size(); ++i) {
            if (languages[i] == language) return labels[i];
        }
        throw Error(ErrorCode::UnknownLanguage, "'" + std::string(language) + "' is not partitioned");
    }

    friend bool operator==(const Partition&, const Partition&) = default;
};

inline Partition canonical_partition(std::vector<std::string> languages, std::span<const std::size_t> raw_labels) {
    Partition p;
    p.languages = std::move(languages);
    std::map<std::size_t, std::size_t> relabel;
    for (const auto raw : raw_labels) {
        const auto it = relabel.try_emplace(raw, relabel.size()).first;
        p.labels.push_back(it->second);
    }
    p.k = relabel.size();
    return p;
}

/// Applies the first n-k merges.
inline Partition cut_dendrogram(const Dendrogram& dendrogram, std::size_t k) {
    const auto n = dendrogram.leaf_count();
    if (k < 1 || k > n)
        throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t t = 0; t < n - k; ++t) {
        const auto& m = dendrogram.merges[t];
        parent[root(m.left)] = n + t;
        parent[root(m.right)] = n + t;
    }
    std::vector<std::size_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = root(i);
    return canonical_partition(dendrogram.leaves, raw);
}

/// Ward objective of a partition: sum over clusters C of
/// (1 / (2|C|)) * sum over ordered pairs (a, b) in C of d(a, b)^2.
inline double within_dispersion(const DissimilarityMatrix& d, const Partition& partition) {
    if (partition.labels.size() != d.size())
        throw Error(ErrorCode::DimensionMismatch, "partition does not cover the dissimilarity matrix");
    std::vector<double> sums(partition.k, 0.0);
    std::vector<std::size_t> counts(partition.k, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        ++counts[partition.labels[i]];
        for (std::size_t j = i + 1; j < d.size(); ++j) {
            if (partition.labels[i] == partition.labels[j]) sums[partition.labels[i]] += d.at(i, j) * d.at(i, j);
        }
    }
    double w = 0.0;
    for (std::size_t c = 0; c < partition.k; ++c) {
        if (counts[c] > 0) w += sums[c] / static_cast<double>(counts[c]);
    }
    return w;
}

struct ElbowResult {
    std::size_t k = 0;
    std::map<std::size_t, double> dispersion;  // W(k)
    std::map<std::size_t, double> knee_score;  // W(k-1) - 2W(k) + W(k+1)
};

/// Knee of the dispersion curve: the k in [max(k_min, 2), k_max] maximizing
/// the discrete second difference. Near-ties go to the smaller k.
inline ElbowResult elbow_k(const Dendrogram& dendrogram, const DissimilarityMatrix& d, std::size_t k_min,
                           std::size_t k_max) {
    const auto n = dendrogram.leaf_count();
    if (d.size() != n) throw Error(ErrorCode::DimensionMismatch, "dendrogram and dissimilarity sizes differ");
    if (k_min < 1 || k_max > n - 1 || n < 3)
        throw Error(ErrorCode::InvalidK, "elbow range must satisfy 1 <= k_min < k_max <= " + std::to_string(n - 1));
    if (k_min >= k_max)
        throw Error(ErrorCode::RangeTooNarrow,
                    "elbow range [" + std::to_string(k_min) + ", " + std::to_string(k_max) + "] has no knee candidate");
    ElbowResult result;
    for (std::size_t k = std::max<std::size_t>(k_min, 2) - 1; k <= k_max + 1; ++k)
        result.dispersion[k] = within_dispersion(d, cut_dendrogram(dendrogram, k));
    double best = 0.0;
    bool found = false;
    for (std::size_t k = std::max<std::size_t>(k_min, 2); k <= k_max; ++k) {
        const double score = result.dispersion[k - 1] - 2.0 * result.dispersion[k] + result.dispersion[k + 1];
        result.knee_score[k] = score;
        if (!found || score > best + tie_epsilon) {
            best = score;
            result.k = k;
            found = true;
        }
    }
    return result;
}

struct SilhouetteResult {
    double overall = 0.0;
    std::vector<double> per_item;  // same order as the partition
};

/// s(i) = (b - a) / max(a, b); members of singleton clusters score 0.
inline SilhouetteResult silhouette_score(const DissimilarityMatrix& d, const Partition& partition) {
    const auto n = d.size();
    if (partition.labels.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "partition does not cover the dissimilarity matrix");
    if (partition.k < 2) throw Error(ErrorCode::SingleCluster, "silhouette needs at least 2 clusters");
    std::vector<std::size_t> counts(partition.k, 0);
    for (const auto label : partition.labels) ++counts[label];
    SilhouetteResult result;
    result.per_item.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = partition.labels[i];
        if (counts[own] <= 1) continue;
        std::vector<double> sums(partition.k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[partition.labels[j]] += d.at(i, j);
        }
        const double a = sums[own] / static_cast<double>(counts[own] - 1);
        double b = 0.0;
        bool have_b = false;
        for (std::size_t c = 0; c < partition.k; ++c) {
            if (c == own || counts[c] == 0) continue;
            const double mean = sums[c] / static_cast<double>(counts[c]);
            if (!have_b || mean < b) b = mean;
            have_b = true;
        }
        const double denom = std::max(a, b);
        result.per_item[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    double sum = 0.0;
    for (const double s : result.per_item) sum += s;
    result.overall = sum / static_cast<double>(n);
    return result;
}

/// Hubert-Arabie adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "labelings differ in length");
    const auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows;
    std::map<std::size_t, double> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0;
    for (const auto& [cell, count] : table) index += choose2(count);
    double sum_rows = 0.0;
    for (const auto& [r, count] : rows) sum_rows += choose2(count);
    double sum_cols = 0.0;
    for (const auto& [c, count] : cols) sum_cols += choose2(count);
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

struct ClusterOptions {
    DissimilaritySource dissimilarity = DissimilaritySource::OneMinusSimilarity;
    std::optional<std::size_t> k;  // forced cluster count; elbow otherwise
    std::size_t k_min = 2;
    std::optional<std::size_t> k_max;  // defaults to n - 1
};

struct ClusteringResult {
    std::size_t k = 0;
    Partition partition;
    std::optional<double> silhouette;  // absent when k == 1
    std::vector<double> silhouette_per_language;
    std::vector<std::vector<std::string>> per_cluster;
    std::optional<ElbowResult> elbow;
};

struct ClusteringOutcome {
    DissimilarityMatrix dissimilarity;
    Dendrogram dendrogram;
    ClusteringResult result;
};

/// to_dissimilarity -> ward_linkage -> elbow_k (unless k is forced) ->
/// cut_dendrogram -> silhouette_score. Euclidean mode needs `embeddings`.
inline ClusteringOutcome cluster_languages(const SimilarityMatrix& matrix, const ClusterOptions& options,
                                           std::span<const LanguageEmbedding> embeddings = {}) {
    ClusteringOutcome out;
    if (options.dissimilarity == DissimilaritySource::OneMinusSimilarity) {
        out.dissimilarity = to_dissimilarity(matrix);
    } else {
        if (embeddings.empty())
            throw Error(ErrorCode::InvalidConfig, "euclidean dissimilarity needs language embeddings");
        out.dissimilarity = euclidean_dissimilarity(embeddings, matrix.languages());
    }
    out.dendrogram = ward_linkage(out.dissimilarity);
    const auto n = matrix.size();
    auto& result = out.result;
    if (options.k) {
        result.k = *options.k;
    } else {
        const auto k_max = options.k_max.value_or(n - 1);
        result.elbow = elbow_k(out.dendrogram, out.dissimilarity, options.k_min, k_max);
        result.k = result.elbow->k;
    }
    result.partition = cut_dendrogram(out.dendrogram, result.k);
    result.per_cluster = result.partition.members();
    if (result.partition.k >= 2) {
        const auto s = silhouette_score(out.dissimilarity, result.partition);
        result.silhouette = s.overall;
        result.silhouette_per_language = s.per_item;
    }
    return out;
}

}  // namespace langfam
