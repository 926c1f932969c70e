#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "langfam/similarity.hpp"
#include "oracles.hpp"

using namespace langfam;

namespace {

LanguageEmbedding embedding(std::string name, std::vector<double> v) {
    LanguageEmbedding e;
    e.language = std::move(name);
    e.aggregate = EmbeddingVector(std::move(v));
    return e;
}

}  // namespace

TEST(NormalizedCosine, KnownValues) {
    const std::vector<double> x{1, 0}, y{0, 1}, z{-1, 0}, w{1, 1};
    EXPECT_DOUBLE_EQ(normalized_cosine(x, x), 1.0);
    EXPECT_DOUBLE_EQ(normalized_cosine(x, y), 0.5);
    EXPECT_DOUBLE_EQ(normalized_cosine(x, z), 0.0);
    EXPECT_NEAR(normalized_cosine(x, w), 0.5 + 0.5 / std::sqrt(2.0), 1e-15);
}

TEST(NormalizedCosine, MatchesOracleOnRandomVectors) {
    DeterministicRng rng(11);
    for (int t = 0; t < 500; ++t) {
        const std::size_t dim = 2 + rng.index(30);
        std::vector<double> a(dim), b(dim);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        EXPECT_NEAR(normalized_cosine(a, b), oracle::normalized_cosine(a, b), 1e-12);
    }
}

TEST(NormalizedCosine, Errors) {
    const std::vector<double> a{1, 2}, b{1, 2, 3}, zero{0, 0};
    try {
        (void)normalized_cosine(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    try {
        (void)normalized_cosine(a, zero);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    }
}

TEST(Matrix, BuildIsSymmetricWithUnitDiagonal) {
    const std::vector<LanguageEmbedding> es{embedding("A", {1, 2, 3}), embedding("B", {-1, 0.5, 2}),
                                            embedding("C", {0.3, -4, 1})};
    const auto m = build_similarity_matrix(es, "p");
    ASSERT_EQ(m.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(m.at(i, i), 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(m.at(i, j), m.at(j, i));
            EXPECT_NEAR(m.at(i, j), oracle::normalized_cosine(es[i].aggregate.values, es[j].aggregate.values), 1e-12);
        }
    }
    EXPECT_EQ(m.between("a", "c"), m.at(0, 2));
    EXPECT_EQ(m.provider(), "p");
}

TEST(Matrix, ConstructorValidates) {
    EXPECT_THROW(SimilarityMatrix({"A", "B"}, {1, 0.5, 0.4, 1}), Error);
    EXPECT_THROW(SimilarityMatrix({"A", "B"}, {1, 1.5, 1.5, 1}), Error);
    EXPECT_THROW(SimilarityMatrix({"A", "B"}, {1, 0.5, 0.5}), Error);
    try {
        SimilarityMatrix m({"A"}, {1.0});
        (void)m.require("B");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownLanguage);
    }
}

TEST(Matrix, SubsetKeepsRequestedOrder) {
    const auto m = fixture::centrality_matrix();
    const std::vector<std::string> names{"Go", "Java", "English"};
    const auto s = m.subset(names);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.languages()[0], "Go");
    EXPECT_EQ(s.at(0, 1), m.between("Go", "Java"));
    EXPECT_EQ(s.at(2, 0), m.between("English", "Go"));
}

TEST(Matrix, CsvRoundTripIsExact) {
    const auto m = fixture::centrality_matrix();
    const auto text = to_csv(m, "abc123");
    EXPECT_EQ(text.rfind("# manifest=abc123\n# provider=fixture\nlanguage,", 0), 0u);
    EXPECT_NE(text.find("Visual Basic"), std::string::npos);
    const auto back = matrix_from_csv(text);
    ASSERT_EQ(back.size(), m.size());
    for (std::size_t i = 0; i < m.values().size(); ++i) EXPECT_EQ(back.values()[i], m.values()[i]);
    EXPECT_EQ(back.provider(), "fixture");
    EXPECT_THROW(matrix_from_csv("language,A,B\nA,1,0.5\n"), Error);
    EXPECT_THROW(matrix_from_csv("language,A\nA,x\n"), Error);
}

TEST(Stats, MeansCentroidAndReferenceColumn) {
    const auto m = fixture::centrality_matrix();
    const auto registry = default_registry();
    const auto stats = similarity_stats(m, registry);
    ASSERT_EQ(stats.mean_similarity.size(), 19u);
    for (const auto& [name, mean] : fixture::programming_means()) EXPECT_NEAR(stats.mean_of(name), mean, 1e-12) << name;
    EXPECT_EQ(stats.centroid_language, "Go");
    ASSERT_TRUE(stats.reference_column.has_value());
    EXPECT_EQ(stats.reference_column->size(), 19u);
    ASSERT_TRUE(stats.reference_mean.has_value());
    EXPECT_NEAR(*stats.reference_mean, 0.088, 1e-12);
    EXPECT_THROW((void)stats.mean_of("English"), Error);
    EXPECT_EQ(stats.groups.size(), 2u);
    EXPECT_EQ(stats.groups.at("high").pairs, 36u);
}

TEST(Stats, GroupStatsPopulationSd) {
    const auto m = SimilarityMatrix({"A", "B", "C"}, {1, 0.2, 0.4, 0.2, 1, 0.6, 0.4, 0.6, 1});
    const std::vector<std::string> all{"A", "B", "C"};
    const auto g = group_stats(m, all);
    EXPECT_EQ(g.pairs, 3u);
    EXPECT_NEAR(g.mean, 0.4, 1e-15);
    EXPECT_NEAR(g.stddev, std::sqrt((0.04 + 0.0 + 0.04) / 3), 1e-15);
}

TEST(Stats, CentroidTieGoesToRegistryOrder) {
    const auto registry = load_registry(std::string_view(R"({"languages": ["B", "A", "C"]})"));
    const auto m = SimilarityMatrix({"A", "B", "C"}, {1, 0.5, 0.5, 0.5, 1, 0.5, 0.5, 0.5, 1});
    EXPECT_EQ(similarity_stats(m, registry).centroid_language, "B");
}

TEST(Stats, MissingReference) {
    const auto registry = load_registry(std::string_view(R"({"languages": ["A", "B"]})"));
    const auto m = SimilarityMatrix({"A", "B"}, {1, 0.5, 0.5, 1});
    EXPECT_FALSE(similarity_stats(m, registry).reference_column.has_value());
    try {
        (void)reference_column(m, registry);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ReferenceLanguageMissing);
    }
}

TEST(Stats, JsonCarriesStats) {
    const auto m = fixture::centrality_matrix();
    const auto stats = similarity_stats(m, default_registry());
    const auto doc = to_json(m, &stats, "d1");
    EXPECT_EQ(doc["manifest"], "d1");
    EXPECT_EQ(doc["stats"]["centroid_language"], "Go");
    EXPECT_EQ(doc["values"].size(), 20u);
}
