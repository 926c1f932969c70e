#include <gtest/gtest.h>

#include "langfam/taxonomy.hpp"

using namespace langfam;

TEST(Taxonomy, CatalogHasTwentyOneOrderedFeatures) {
    const auto& catalog = feature_catalog();
    ASSERT_EQ(catalog.size(), feature_count);
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        EXPECT_EQ(catalog[i].id, "F" + std::to_string(i + 1));
        EXPECT_FALSE(catalog[i].name.empty());
        EXPECT_FALSE(catalog[i].description.empty());
    }
    EXPECT_EQ(find_feature("F3").name, "Loop: For");
    EXPECT_EQ(find_feature("F21").name, "Functional Programming: Filter");
    EXPECT_EQ(find_feature("F13").group, FeatureGroup::DataStructures);
}

TEST(Taxonomy, FeatureOrderIsNumeric) {
    FeatureIdLess less;
    EXPECT_TRUE(less("F2", "F10"));
    EXPECT_FALSE(less("F10", "F2"));
    EXPECT_EQ(feature_ordinal("F17"), 17);
    EXPECT_EQ(feature_ordinal("F0"), 0);
    EXPECT_EQ(feature_ordinal("x1"), 0);
}

TEST(Taxonomy, UnknownFeatureThrows) {
    try {
        (void)find_feature("F22");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownFeature);
    }
}

TEST(Taxonomy, DefaultRegistry) {
    const auto r = default_registry();
    EXPECT_EQ(r.size(), 20u);
    EXPECT_EQ(r.features().size(), 21u);
    ASSERT_NE(r.reference(), nullptr);
    EXPECT_EQ(r.reference()->name, "English");
    EXPECT_EQ(r.languages().front().name, "C++");
    EXPECT_EQ(r.language("kotlin").name, "Kotlin");
    EXPECT_EQ(r.language("Go").tier, ResourceTier::High);
    EXPECT_EQ(r.language("Haskell").tier, ResourceTier::Low);
    EXPECT_EQ(*r.index_of("visual basic"), 16u);
}

TEST(Taxonomy, RegistryRejectsDuplicatesCaseInsensitively) {
    try {
        LanguageRegistry({{"Go", ResourceTier::High}, {"go", ResourceTier::Low}}, feature_catalog());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateLanguage);
    }
}

TEST(Taxonomy, RegistryRejectsTwoReferences) {
    try {
        LanguageRegistry({{"English", ResourceTier::Reference, true}, {"French", ResourceTier::Reference, true}},
                         feature_catalog());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MultipleReferenceLanguages);
    }
}

TEST(Taxonomy, UnknownLanguageThrows) {
    const auto r = default_registry();
    try {
        (void)r.language("COBOL");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownLanguage);
    }
}

TEST(Taxonomy, LoadRegistryFromJson) {
    const auto r = load_registry(std::string_view(R"({"languages": [{"name": "Go", "tier": "high"}, "Zig",
        {"name": "English", "reference": true}], "features": ["F1", "F3"]})"));
    EXPECT_EQ(r.size(), 3u);
    EXPECT_EQ(r.language("Zig").tier, ResourceTier::Low);
    EXPECT_TRUE(r.language("English").is_reference);
    EXPECT_EQ(r.features().size(), 2u);
    EXPECT_TRUE(r.has_feature("F3"));
    EXPECT_FALSE(r.has_feature("F2"));
}

TEST(Taxonomy, LoadRegistryRejectsBadInput) {
    for (const char* text : {"{}", "[1,2]", "not json", R"({"languages": [{"tier": "high"}]})",
                             R"({"languages": ["Go"], "features": ["F99"]})"}) {
        EXPECT_THROW(load_registry(std::string_view(text)), Error) << text;
    }
}

TEST(Taxonomy, DigestTracksContent) {
    const auto a = default_registry();
    const auto b = default_registry();
    EXPECT_EQ(a.digest(), b.digest());
    const auto c = load_registry(std::string_view(R"({"languages": ["Go"]})"));
    EXPECT_NE(a.digest(), c.digest());
}
