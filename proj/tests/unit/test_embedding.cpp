#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <mutex>
#include <set>

#include "fixtures.hpp"
#include "langfam/embedding.hpp"

using namespace langfam;

namespace {

std::vector<CodeSample> make_samples(std::size_t n, std::size_t distinct) {
    std::vector<CodeSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        CodeSample s;
        s.language = "Go";
        s.feature = "F1";
        s.sample_index = i;
        s.text = "func f" + std::to_string(i % distinct) + "() { return " + std::to_string(i % distinct) + " }";
        s.content_hash = content_hash(s.text);
        out.push_back(s);
    }
    return out;
}

bool bit_equal(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.dim() == b.dim() && std::memcmp(a.values.data(), b.values.data(), a.dim() * sizeof(double)) == 0;
}

/// Wraps the local embedder; fails chosen calls with ProviderUnavailable.
class FlakyProvider : public EmbeddingProvider {
public:
    explicit FlakyProvider(std::function<bool(std::size_t call, std::span<const std::string>)> fail)
        : fail_(std::move(fail)) {}
    ProviderIdentity identity() const override { return inner_.identity(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::size_t call;
        {
            std::lock_guard lock(mu_);
            call = calls_++;
        }
        if (fail_(call, texts)) throw Error(ErrorCode::ProviderUnavailable, "simulated outage");
        return inner_.embed(texts);
    }
    std::size_t calls() const { return calls_; }

private:
    LocalNgramEmbedder inner_{16};
    std::function<bool(std::size_t, std::span<const std::string>)> fail_;
    std::mutex mu_;
    std::size_t calls_ = 0;
};

class BadProvider : public EmbeddingProvider {
public:
    explicit BadProvider(std::vector<double> v) : v_(std::move(v)) {}
    ProviderIdentity identity() const override { return {"bad", "m", 2}; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        return std::vector<EmbeddingVector>(texts.size(), EmbeddingVector(v_));
    }

private:
    std::vector<double> v_;
};

const auto no_sleep = [](std::chrono::milliseconds) {};

}  // namespace

TEST(LocalEmbedder, DeterministicNormalizedAndSeeded) {
    LocalNgramEmbedder a(64, 1), b(64, 1), c(64, 2);
    const auto va = a.embed_one("for (int i = 0; i < n; ++i) {}");
    const auto vb = b.embed_one("for (int i = 0; i < n; ++i) {}");
    EXPECT_TRUE(bit_equal(va, vb));
    double norm = 0;
    for (double x : va.values) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_FALSE(bit_equal(va, c.embed_one("for (int i = 0; i < n; ++i) {}")));
    EXPECT_NE(a.identity(), c.identity());
    EXPECT_EQ(a.identity().dim, 64u);
}

TEST(LocalEmbedder, SimilarTextsAreCloser) {
    LocalNgramEmbedder e(256);
    const auto x = e.embed_one("for i in range(10): print(i)");
    const auto y = e.embed_one("for j in range(20): print(j)");
    const auto z = e.embed_one("SELECT name FROM users WHERE id = 7");
    auto dot = [](const EmbeddingVector& p, const EmbeddingVector& q) {
        double s = 0;
        for (std::size_t i = 0; i < p.dim(); ++i) s += p.values[i] * q.values[i];
        return s;
    };
    EXPECT_GT(dot(x, y), dot(x, z));
}

TEST(LocalEmbedder, MultibyteCharactersAreOneUnit) {
    LocalNgramEmbedder e(32);
    const auto v = e.embed_one("λ→λ");
    EXPECT_TRUE(v.finite());
    EXPECT_THROW(LocalNgramEmbedder(0), Error);
}

TEST(EmbedSamples, BatchingInvariance) {
    const auto samples = make_samples(150, 150);
    LocalNgramEmbedder e(48);
    EmbedOptions one;
    one.batch_size = 1;
    EmbedOptions many;
    many.batch_size = 64;
    EmbedOptions parallel;
    parallel.batch_size = 7;
    parallel.max_in_flight = 4;
    const auto a = embed_samples(e, samples, one, nullptr);
    const auto b = embed_samples(e, samples, many, nullptr);
    const auto c = embed_samples(e, samples, parallel, nullptr);
    ASSERT_EQ(a.size(), samples.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(bit_equal(a[i], b[i]));
        EXPECT_TRUE(bit_equal(a[i], c[i]));
    }
}

TEST(EmbedSamples, DeduplicatesAndUsesCache) {
    const auto samples = make_samples(40, 10);
    LocalNgramEmbedder e(16);
    EmbeddingCache cache(e.identity());
    EmbedStats stats;
    EmbedOptions opts;
    opts.batch_size = 4;
    (void)embed_samples(e, samples, opts, &cache, &stats);
    EXPECT_EQ(stats.requested_texts, 10u);
    EXPECT_EQ(stats.provider_calls, 3u);
    EXPECT_EQ(cache.size(), 10u);
    (void)embed_samples(e, samples, opts, &cache, &stats);
    EXPECT_EQ(stats.requested_texts, 0u);
    EXPECT_EQ(stats.provider_calls, 0u);
    EXPECT_EQ(stats.cache_hits, 10u);
}

TEST(EmbedSamples, RetriesTransientFailures) {
    const auto samples = make_samples(10, 10);
    FlakyProvider p([](std::size_t call, auto) { return call < 2; });
    std::vector<std::chrono::milliseconds> waits;
    EmbedOptions opts;
    opts.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d); };
    const auto out = embed_samples(p, samples, opts, nullptr);
    EXPECT_EQ(out.size(), 10u);
    ASSERT_EQ(waits.size(), 2u);
    EXPECT_EQ(waits[1], 2 * waits[0]);
}

TEST(EmbedSamples, TotalOutageIsProviderUnavailable) {
    const auto samples = make_samples(10, 10);
    FlakyProvider p([](auto, auto) { return true; });
    EmbedOptions opts;
    opts.sleep = no_sleep;
    opts.max_retries = 2;
    try {
        (void)embed_samples(p, samples, opts, nullptr);
        FAIL();
    } catch (const PartialFailureError&) {
        FAIL() << "expected a total failure";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
    }
    EXPECT_EQ(p.calls(), 3u);
}

TEST(EmbedSamples, PartialFailureNamesSamplesAndKeepsCache) {
    const auto samples = make_samples(8, 8);
    const std::string poisoned = samples[5].text;
    FlakyProvider p([&](auto, std::span<const std::string> texts) {
        return std::find(texts.begin(), texts.end(), poisoned) != texts.end();
    });
    EmbedOptions opts;
    opts.sleep = no_sleep;
    opts.batch_size = 2;
    EmbeddingCache cache(p.identity());
    try {
        (void)embed_samples(p, samples, opts, &cache);
        FAIL();
    } catch (const PartialFailureError& e) {
        EXPECT_EQ(e.code(), ErrorCode::PartialFailure);
        const std::set<std::string> failed(e.failed().begin(), e.failed().end());
        EXPECT_EQ(failed, (std::set<std::string>{"Go/F1/4", "Go/F1/5"}));
    }
    EXPECT_EQ(cache.size(), 6u);
}

TEST(EmbedSamples, ValidatesProviderOutput) {
    const auto samples = make_samples(2, 2);
    BadProvider wrong_dim({1.0, 2.0, 3.0});
    BadProvider non_finite({1.0, std::numeric_limits<double>::quiet_NaN()});
    try {
        (void)embed_samples(wrong_dim, samples, {}, nullptr);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    try {
        (void)embed_samples(non_finite, samples, {}, nullptr);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
    }
}

TEST(EmbedSamples, CacheIdentityMustMatch) {
    LocalNgramEmbedder e(16);
    EmbeddingCache cache(ProviderIdentity{"other", "m", 16});
    const auto samples = make_samples(1, 1);
    try {
        (void)embed_samples(e, samples, {}, &cache);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::CacheMismatch);
    }
}

TEST(Cache, SaveLoadIsBitExact) {
    const auto path = std::filesystem::temp_directory_path() / "langfam_cache_roundtrip.bin";
    std::filesystem::remove(path);
    EmbeddingCache cache(ProviderIdentity{"p", "m", 3});
    cache.insert(content_hash("a"), EmbeddingVector({0.1, -0.0, 1e-308}));
    cache.insert(content_hash("b"), EmbeddingVector({std::nextafter(1.0, 2.0), -3.5, 0.30000000000000004}));
    cache.save(path);
    EXPECT_TRUE(EmbeddingCache::looks_like_cache(path));
    const auto loaded = EmbeddingCache::load(path);
    EXPECT_EQ(loaded.identity(), cache.identity());
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_TRUE(bit_equal(*loaded.find(content_hash("a")), *cache.find(content_hash("a"))));
    EXPECT_TRUE(bit_equal(*loaded.find(content_hash("b")), *cache.find(content_hash("b"))));
    EXPECT_TRUE(std::signbit(loaded.find(content_hash("a"))->values[1]));
    std::filesystem::remove(path);
}

TEST(Cache, FlushAppendsAndOpenChecksIdentity) {
    const auto path = std::filesystem::temp_directory_path() / "langfam_cache_flush.bin";
    std::filesystem::remove(path);
    const ProviderIdentity id{"p", "m", 2};
    auto cache = EmbeddingCache::open(path, id);
    cache.insert(content_hash("a"), EmbeddingVector({1.0, 2.0}));
    cache.flush(path);
    const auto size_one = std::filesystem::file_size(path);
    auto reopened = EmbeddingCache::open(path, id);
    EXPECT_EQ(reopened.size(), 1u);
    reopened.insert(content_hash("b"), EmbeddingVector({3.0, 4.0}));
    reopened.insert(content_hash("a"), EmbeddingVector({9.0, 9.0}));  // already present, ignored
    reopened.flush(path);
    EXPECT_EQ(std::filesystem::file_size(path), size_one + 8 + 16);
    const auto loaded = EmbeddingCache::load(path);
    EXPECT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded.find(content_hash("a"))->values[0], 1.0);
    try {
        (void)EmbeddingCache::open(path, ProviderIdentity{"p", "m2", 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CacheMismatch);
    }
    EXPECT_THROW(reopened.insert(content_hash("c"), EmbeddingVector({1.0})), Error);
    std::filesystem::remove(path);
}

TEST(Cache, TruncatedFileIsRejected) {
    const auto path = std::filesystem::temp_directory_path() / "langfam_cache_trunc.bin";
    EmbeddingCache cache(ProviderIdentity{"p", "m", 2});
    cache.insert(content_hash("a"), EmbeddingVector({1.0, 2.0}));
    cache.save(path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    EXPECT_THROW(EmbeddingCache::load(path), Error);
    std::filesystem::remove(path);
}

TEST(Aggregate, CentroidAndModes) {
    const std::vector<EmbeddingVector> vs{EmbeddingVector({1.0, 0.0}), EmbeddingVector({0.0, 1.0}),
                                          EmbeddingVector({2.0, 2.0})};
    const auto c = feature_centroid(vs);
    EXPECT_DOUBLE_EQ(c.values[0], 1.0);
    EXPECT_DOUBLE_EQ(c.values[1], 1.0);
    EXPECT_THROW(feature_centroid(std::span<const EmbeddingVector>{}), Error);

    CentroidMap centroids;
    centroids.emplace("F10", EmbeddingVector({3.0, 3.0}));
    centroids.emplace("F2", EmbeddingVector({1.0, 1.0}));
    const auto mean = aggregate_language_embedding(centroids, Aggregation::Mean);
    EXPECT_DOUBLE_EQ(mean.values[0], 2.0);
    const auto concat = aggregate_language_embedding(centroids, Aggregation::Concat);
    EXPECT_EQ(concat.values, (std::vector<double>{1.0, 1.0, 3.0, 3.0}));
    EXPECT_EQ(parse_aggregation("concat"), Aggregation::Concat);
    EXPECT_THROW(parse_aggregation("max"), Error);
}

TEST(LanguageEmbeddings, BuildNotesMissingFeaturesAndRoundTrips) {
    const auto registry = load_registry(std::string_view(R"({"languages": ["Go", "C", "Zig"], "features": ["F1", "F2"]})"));
    auto corpus = fixture::balanced_corpus(registry, 2, [](const CodeSample& s) {
        return s.language == "Zig" || (s.language == "C" && s.feature == "F2");
    });
    LocalNgramEmbedder e(32);
    const auto run = build_language_embeddings(corpus, e, registry, nullptr);
    ASSERT_EQ(run.languages.size(), 2u);
    EXPECT_EQ(run.languages[0].language, "Go");
    EXPECT_EQ(run.languages[1].feature_centroids.size(), 1u);
    ASSERT_EQ(run.notes.size(), 1u);
    EXPECT_NE(run.notes[0].find("C lacks samples for F2"), std::string::npos);

    const auto back = embedding_run_from_json(nlohmann::json::parse(to_json(run).dump()));
    EXPECT_EQ(back.provider, run.provider);
    ASSERT_EQ(back.languages.size(), 2u);
    EXPECT_TRUE(bit_equal(back.languages[0].aggregate, run.languages[0].aggregate));
    EXPECT_EQ(back.notes, run.notes);
}
