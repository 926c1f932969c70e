#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/corpus.hpp"
#include "langfam/error.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

namespace langfam {

/// Dense embedding. Dimension is fixed per run; all components finite.
struct EmbeddingVector {
    std::vector<double> values;

    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {}
    EmbeddingVector(std::initializer_list<double> v) : values(v) {}

    [[nodiscard]] std::size_t dim() const noexcept { return values.size(); }
    [[nodiscard]] std::span<const double> span() const noexcept { return values; }

    [[nodiscard]] bool finite() const noexcept {
        return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
    }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct ProviderIdentity {
    std::string name;
    std::string model;
    std::size_t dim = 0;

    [[nodiscard]] std::string key() const { return name + "/" + model + "/" + std::to_string(dim); }

    friend bool operator==(const ProviderIdentity&, const ProviderIdentity&) = default;
};

/// Backend turning texts into vectors. Implementations must be pure per input:
/// the vector for a text never depends on the other texts in the batch.
/// Transport failures are reported as Error(ProviderUnavailable) and retried.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    [[nodiscard]] virtual ProviderIdentity identity() const = 0;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

/// Offline deterministic embedder: bag of character trigrams (Unicode code
/// points) folded into `dim` buckets by seeded signed hashing, L2-normalized.
class LocalNgramEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t default_dim = 256;
    static constexpr std::uint64_t default_seed = 0x6c616e6766616dULL;

    explicit LocalNgramEmbedder(std::size_t dim = default_dim, std::uint64_t seed = default_seed)
        : dim_(dim), seed_(seed) {
        if (dim_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dim must be positive");
    }

    [[nodiscard]] ProviderIdentity identity() const override {
        return {"local", "char3-hash-s" + to_hex(seed_), dim_};
    }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(embed_one(text));
        return out;
    }

    [[nodiscard]] EmbeddingVector embed_one(std::string_view text) const {
        const auto points = split_code_points(text);
        std::vector<double> bucket(dim_, 0.0);
        const auto add_gram = [&](std::size_t first, std::size_t count) {
            std::uint64_t state = fnv1a64_offset ^ seed_;
            for (std::size_t i = first; i < first + count; ++i) state = fnv1a64(points[i], state);
            state ^= state >> 33;
            state *= 0xff51afd7ed558ccdULL;
            state ^= state >> 33;
            const auto index = static_cast<std::size_t>(state % dim_);
            bucket[index] += (state >> 63) != 0 ? -1.0 : 1.0;
        };
        if (points.size() < 3) {
            if (!points.empty()) add_gram(0, points.size());
        } else {
            for (std::size_t i = 0; i + 3 <= points.size(); ++i) add_gram(i, 3);
        }
        double norm = 0.0;
        for (const double x : bucket) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& x : bucket) x /= norm;
        }
        return EmbeddingVector(std::move(bucket));
    }

private:
    static std::vector<std::string_view> split_code_points(std::string_view text) {
        std::vector<std::string_view> points;
        points.reserve(text.size());
        std::size_t i = 0;
        while (i < text.size()) {
            const auto lead = static_cast<unsigned char>(text[i]);
            std::size_t len = 1;
            if (lead >= 0xF0) len = 4;
            else if (lead >= 0xE0) len = 3;
            else if (lead >= 0xC0) len = 2;
            len = std::min(len, text.size() - i);
            points.push_back(text.substr(i, len));
            i += len;
        }
        return points;
    }

    std::size_t dim_;
    std::uint64_t seed_;
};

class EmbeddingCache;

struct EmbedOptions {
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 1;
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    /// Injectable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct EmbedStats {
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t requested_texts = 0;
};

}  // namespace langfam

#include "langfam/embedding_cache.hpp"

namespace langfam {

namespace detail {

inline void check_vector(const EmbeddingVector& v, std::size_t dim, std::string_view what) {
    if (v.dim() != dim)
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected dim " + std::to_string(dim) +
                                                      ", got " + std::to_string(v.dim()));
    if (!v.finite()) throw Error(ErrorCode::NonFiniteValue, std::string(what) + ": non-finite component");
}

}  // namespace detail

/// Embeds every sample, consulting and filling `cache`. Identical normalized
/// texts are requested once. Returns vectors aligned with `samples`.
inline std::vector<EmbeddingVector> embed_samples(EmbeddingProvider& provider, std::span<const CodeSample> samples,
                                                  const EmbedOptions& options, EmbeddingCache* cache,
                                                  EmbedStats* stats = nullptr) {
    const auto identity = provider.identity();
    if (cache != nullptr && cache->identity() != identity)
        throw Error(ErrorCode::CacheMismatch,
                    "cache holds " + cache->identity().key() + ", provider is " + identity.key());
    if (options.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");

    EmbedStats local_stats;
    std::unordered_map<std::string, EmbeddingVector> resolved;
    std::vector<std::string> pending_hashes;
    std::vector<std::string> pending_texts;
    std::unordered_map<std::string, std::vector<std::string>> ids_by_hash;
    for (const auto& sample : samples) {
        ids_by_hash[sample.content_hash].push_back(sample.id());
        if (resolved.count(sample.content_hash) != 0) continue;
        if (cache != nullptr) {
            if (const auto* hit = cache->find(sample.content_hash)) {
                resolved.emplace(sample.content_hash, *hit);
                ++local_stats.cache_hits;
                continue;
            }
        }
        if (ids_by_hash[sample.content_hash].size() == 1) {
            pending_hashes.push_back(sample.content_hash);
            pending_texts.push_back(sample.text);
        }
    }

    struct Batch {
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Batch> batches;
    for (std::size_t b = 0; b < pending_texts.size(); b += options.batch_size)
        batches.push_back({b, std::min(b + options.batch_size, pending_texts.size())});

    const auto sleep = options.sleep ? options.sleep
                                     : std::function<void(std::chrono::milliseconds)>(
                                           [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });

    // Returns vectors, or nullopt once retries are exhausted. Non-transport
    // errors propagate immediately.
    const auto run_batch = [&](const Batch& batch) -> std::optional<std::vector<EmbeddingVector>> {
        const std::span<const std::string> texts(pending_texts.data() + batch.begin, batch.end - batch.begin);
        auto backoff = options.initial_backoff;
        for (std::size_t attempt = 0;; ++attempt) {
            try {
                auto vectors = provider.embed(texts);
                if (vectors.size() != texts.size())
                    throw Error(ErrorCode::ProviderUnavailable, "provider returned " + std::to_string(vectors.size()) +
                                                                    " vectors for " + std::to_string(texts.size()) +
                                                                    " inputs");
                for (const auto& v : vectors) detail::check_vector(v, identity.dim, "provider output");
                return vectors;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ProviderUnavailable) throw;
                if (attempt >= options.max_retries) return std::nullopt;
                sleep(backoff);
                backoff *= 2;
            }
        }
    };

    std::vector<std::string> failed_ids;
    std::size_t succeeded_batches = 0;
    const std::size_t wave = std::max<std::size_t>(1, options.max_in_flight);
    for (std::size_t first = 0; first < batches.size(); first += wave) {
        const std::size_t last = std::min(first + wave, batches.size());
        std::vector<std::optional<std::vector<EmbeddingVector>>> results(last - first);
        if (last - first == 1) {
            results[0] = run_batch(batches[first]);
        } else {
            std::vector<std::future<std::optional<std::vector<EmbeddingVector>>>> futures;
            for (std::size_t b = first; b < last; ++b)
                futures.push_back(std::async(std::launch::async, run_batch, batches[b]));
            for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
        }
        local_stats.provider_calls += last - first;
        // Serialized cache writes, in batch order.
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& batch = batches[first + i];
            if (!results[i]) {
                for (std::size_t t = batch.begin; t < batch.end; ++t) {
                    const auto& ids = ids_by_hash[pending_hashes[t]];
                    failed_ids.insert(failed_ids.end(), ids.begin(), ids.end());
                }
                continue;
            }
            ++succeeded_batches;
            for (std::size_t t = batch.begin; t < batch.end; ++t) {
                auto& v = (*results[i])[t - batch.begin];
                if (cache != nullptr) cache->insert(pending_hashes[t], v);
                resolved.emplace(pending_hashes[t], std::move(v));
            }
        }
    }
    local_stats.requested_texts = pending_texts.size();
    if (stats != nullptr) *stats = local_stats;

    if (!failed_ids.empty()) {
        if (succeeded_batches == 0)
            throw Error(ErrorCode::ProviderUnavailable,
                        "provider " + identity.key() + " failed for all " + std::to_string(batches.size()) + " batches");
        throw PartialFailureError(failed_ids, std::to_string(failed_ids.size()) + " samples failed to embed");
    }

    std::vector<EmbeddingVector> out;
    out.reserve(samples.size());
    for (const auto& sample : samples) out.push_back(resolved.at(sample.content_hash));
    return out;
}

/// Component-wise arithmetic mean.
inline EmbeddingVector feature_centroid(std::span<const EmbeddingVector> vectors) {
    if (vectors.empty()) throw Error(ErrorCode::EmptyInput, "centroid of no vectors");
    const std::size_t dim = vectors.front().dim();
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional vector");
    std::vector<double> sum(dim, 0.0);
    for (const auto& v : vectors) {
        if (v.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "centroid inputs differ in dimension");
        for (std::size_t i = 0; i < dim; ++i) sum[i] += v.values[i];
    }
    const double n = static_cast<double>(vectors.size());
    for (double& x : sum) x /= n;
    return EmbeddingVector(std::move(sum));
}

using CentroidMap = std::map<std::string, EmbeddingVector, FeatureIdLess>;

enum class Aggregation { Mean, Concat };

inline Aggregation parse_aggregation(std::string_view text) {
    if (text == "mean") return Aggregation::Mean;
    if (text == "concat") return Aggregation::Concat;
    throw Error(ErrorCode::InvalidConfig, "unknown aggregation '" + std::string(text) + "'");
}

/// Language vector from its feature centroids: unweighted mean by default,
/// or concatenation in feature-id order.
inline EmbeddingVector aggregate_language_embedding(const CentroidMap& centroids,
                                                    Aggregation mode = Aggregation::Mean) {
    if (centroids.empty()) throw Error(ErrorCode::EmptyInput, "no feature centroids to aggregate");
    std::vector<EmbeddingVector> ordered;
    ordered.reserve(centroids.size());
    for (const auto& [feature, v] : centroids) ordered.push_back(v);
    if (mode == Aggregation::Mean) return feature_centroid(ordered);
    const std::size_t dim = ordered.front().dim();
    std::vector<double> out;
    out.reserve(dim * ordered.size());
    for (const auto& v : ordered) {
        if (v.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "centroids differ in dimension");
        out.insert(out.end(), v.values.begin(), v.values.end());
    }
    return EmbeddingVector(std::move(out));
}

struct LanguageEmbedding {
    std::string language;
    CentroidMap feature_centroids;
    EmbeddingVector aggregate;
};

struct EmbeddingRun {
    std::vector<LanguageEmbedding> languages;  // registry order
    ProviderIdentity provider;
    std::vector<std::string> notes;  // asymmetry report
    EmbedStats stats;
};

/// Corpus -> per-feature centroids -> aggregated language vectors, one per
/// registry language that has samples.
inline EmbeddingRun build_language_embeddings(const Corpus& corpus, EmbeddingProvider& provider,
                                              const LanguageRegistry& registry, EmbeddingCache* cache,
                                              const EmbedOptions& options = {},
                                              Aggregation mode = Aggregation::Mean) {
    EmbeddingRun run;
    run.provider = provider.identity();
    const auto vectors = embed_samples(provider, corpus.samples(), options, cache, &run.stats);

    std::map<std::string, std::map<std::string, std::vector<EmbeddingVector>, FeatureIdLess>> grouped;
    const auto samples = corpus.samples();
    for (std::size_t i = 0; i < samples.size(); ++i)
        grouped[samples[i].language][samples[i].feature].push_back(vectors[i]);

    for (const auto& language : registry.languages()) {
        const auto it = grouped.find(language.name);
        if (it == grouped.end()) continue;
        LanguageEmbedding embedding;
        embedding.language = language.name;
        for (const auto& [feature, vs] : it->second) embedding.feature_centroids.emplace(feature, feature_centroid(vs));
        embedding.aggregate = aggregate_language_embedding(embedding.feature_centroids, mode);
        std::vector<std::string> missing;
        for (const auto& feature : registry.features()) {
            if (embedding.feature_centroids.count(feature.id) == 0) missing.push_back(feature.id);
        }
        if (!missing.empty()) {
            std::string note = language.name + " lacks samples for";
            for (const auto& id : missing) note += " " + id;
            note += "; its aggregate averages " + std::to_string(embedding.feature_centroids.size()) + " features";
            run.notes.push_back(std::move(note));
        }
        run.languages.push_back(std::move(embedding));
    }
    return run;
}

inline nlohmann::json to_json(const EmbeddingRun& run) {
    nlohmann::json doc;
    doc["provider"] = {{"name", run.provider.name}, {"model", run.provider.model}, {"dim", run.provider.dim}};
    doc["languages"] = nlohmann::json::array();
    for (const auto& language : run.languages) {
        nlohmann::json entry;
        entry["name"] = language.language;
        entry["aggregate"] = language.aggregate.values;
        entry["centroids"] = nlohmann::json::object();
        for (const auto& [feature, v] : language.feature_centroids) entry["centroids"][feature] = v.values;
        doc["languages"].push_back(std::move(entry));
    }
    doc["notes"] = run.notes;
    return doc;
}

/// Inverse of to_json; centroid order follows feature ids.
inline EmbeddingRun embedding_run_from_json(const nlohmann::json& doc) {
    try {
        EmbeddingRun run;
        const auto& p = doc.at("provider");
        run.provider = {p.at("name").get<std::string>(), p.at("model").get<std::string>(), p.at("dim").get<std::size_t>()};
        for (const auto& entry : doc.at("languages")) {
            LanguageEmbedding language;
            language.language = entry.at("name").get<std::string>();
            language.aggregate = EmbeddingVector(entry.at("aggregate").get<std::vector<double>>());
            if (entry.contains("centroids")) {
                for (const auto& [feature, values] : entry["centroids"].items())
                    language.feature_centroids.emplace(feature, EmbeddingVector(values.get<std::vector<double>>()));
            }
            run.languages.push_back(std::move(language));
        }
        if (doc.contains("notes")) run.notes = doc["notes"].get<std::vector<std::string>>();
        return run;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("embeddings document: ") + e.what());
    }
}

}  // namespace langfam
