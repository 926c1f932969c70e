#pragma once

// Similarity matrices that encode values stated in the text of the source
// study, plus helpers for generated corpora.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "langfam/langfam.hpp"

namespace fixture {

/// Mean similarity of every programming language to the others. Go, Java,
/// Fortran and Haskell carry the published values; the rest are placeholders
/// strictly below Java.
inline const std::vector<std::pair<std::string, double>>& programming_means() {
    static const std::vector<std::pair<std::string, double>> means{
        {"C++", 0.33},     {"Java", 0.38},    {"JavaScript", 0.36}, {"Kotlin", 0.34},      {"Python", 0.32},
        {"Rust", 0.35},    {"Haskell", 0.17}, {"C", 0.31},          {"Go", 0.39},          {"Swift", 0.33},
        {"AppleScript", 0.24}, {"Fortran", 0.23}, {"Dart", 0.35},   {"Ruby", 0.29},        {"Raku", 0.26},
        {"PHP", 0.31},     {"Visual Basic", 0.25}, {"Pascal", 0.27}, {"Scala", 0.30},
    };
    return means;
}

/// Similarity to English. The ten curriculum languages descend in the
/// published Near-to-Far order; Haskell and Fortran sit at 0.03, Visual Basic
/// is the closest, and the column averages to 0.088.
inline const std::vector<std::pair<std::string, double>>& english_column() {
    static const std::vector<std::pair<std::string, double>> column{
        {"C++", 0.06},     {"Java", 0.08},    {"JavaScript", 0.11}, {"Kotlin", 0.12},    {"Python", 0.17},
        {"Rust", 0.09},    {"Haskell", 0.03}, {"C", 0.04},          {"Go", 0.10},        {"Swift", 0.14},
        {"AppleScript", 0.20}, {"Fortran", 0.03}, {"Dart", 0.06},   {"Ruby", 0.05},      {"Raku", 0.04},
        {"PHP", 0.05},     {"Visual Basic", 0.22}, {"Pascal", 0.042}, {"Scala", 0.04},
    };
    return column;
}

inline const std::vector<std::string>& near_to_far() {
    static const std::vector<std::string> order{"AppleScript", "Python", "Swift", "Kotlin", "JavaScript",
                                                "Go",          "Rust",   "Java",  "C++",    "Haskell"};
    return order;
}

/// 20 x 20 matrix in registry order. Programming-language entries are
/// s_ij = a_i + a_j with a_i solved so each row mean over the other 18
/// languages equals programming_means().
inline langfam::SimilarityMatrix centrality_matrix() {
    const auto& means = programming_means();
    const std::size_t m = means.size();
    double total = 0.0;
    for (const auto& [name, mean] : means) total += mean;
    std::vector<double> a(m);
    for (std::size_t i = 0; i < m; ++i)
        a[i] = ((static_cast<double>(m) - 1) * means[i].second - total / 2) / (static_cast<double>(m) - 2);
    const std::size_t n = m + 1;
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) values[i * n + j] = values[j * n + i] = a[i] + a[j];
        values[i * n + m] = values[m * n + i] = english_column()[i].second;
    }
    std::vector<std::string> names;
    for (const auto& [name, mean] : means) names.push_back(name);
    names.push_back("English");
    return {names, values, "fixture"};
}

/// Registry mirroring the transfer experiment: Java and Python are the only
/// high-resource sources.
inline langfam::LanguageRegistry transfer_registry() {
    using T = langfam::ResourceTier;
    return langfam::LanguageRegistry({{"Java", T::High},
                                      {"Python", T::High},
                                      {"Kotlin", T::Low},
                                      {"Haskell", T::Low},
                                      {"Swift", T::Low},
                                      {"AppleScript", T::Low},
                                      {"English", T::Reference, true}},
                                     langfam::feature_catalog());
}

inline langfam::SimilarityMatrix transfer_matrix() {
    const std::vector<std::string> names{"Java", "Python", "Kotlin", "Haskell", "Swift", "AppleScript", "English"};
    const std::vector<std::vector<double>> upper{
        {1.0, 0.55, 0.71, 0.40, 0.62, 0.33, 0.08},
        {0.0, 1.0, 0.52, 0.44, 0.50, 0.58, 0.17},
        {0.0, 0.0, 1.0, 0.38, 0.66, 0.30, 0.12},
        {0.0, 0.0, 0.0, 1.0, 0.35, 0.20, 0.03},
        {0.0, 0.0, 0.0, 0.0, 1.0, 0.31, 0.14},
        {0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.20},
        {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0},
    };
    const std::size_t n = names.size();
    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) values[i * n + j] = values[j * n + i] = upper[i][j];
    return {names, values, "fixture"};
}

/// Distinct snippet for every (language, feature, index).
inline std::string snippet(const std::string& language, const std::string& feature, std::size_t index) {
    return "// " + language + " " + feature + " #" + std::to_string(index) + "\nvalue_" + std::to_string(index) +
           " = compute(" + std::to_string(index * 7 + 3) + ");";
}

/// Balanced corpus: every registry language x feature cell holds `per_cell` samples.
/// `drop` removes matching samples before they are added.
inline langfam::Corpus balanced_corpus(const langfam::LanguageRegistry& registry, std::size_t per_cell,
                                       const std::function<bool(const langfam::CodeSample&)>& drop = {}) {
    langfam::Corpus corpus;
    for (const auto& language : registry.languages()) {
        for (const auto& feature : registry.features()) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                langfam::CodeSample s;
                s.language = language.name;
                s.feature = feature.id;
                s.text = snippet(language.name, feature.id, i);
                s.content_hash = langfam::content_hash(s.text);
                s.sample_index = i;
                if (drop && drop(s)) continue;
                corpus.add(std::move(s), i);
            }
        }
    }
    return corpus;
}

}  // namespace fixture
