#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "langfam/corpus.hpp"
#include "langfam/embedding.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

// Planted-structure fixtures: synthetic embeddings and corpora whose family
// structure is known in advance, for pipeline tests and demos.

namespace langfam::synthetic {

struct Family {
    std::string name;
    std::vector<std::string> members;
};

/// Six families over the 19 default programming languages.
inline std::vector<Family> default_families() {
    return {
        {"c-family", {"C", "C++", "Java", "Swift"}},
        {"multi-paradigm", {"Rust", "JavaScript", "Dart", "Go", "Kotlin", "PHP"}},
        {"scripting", {"Visual Basic", "Python", "AppleScript"}},
        {"ruby-raku", {"Ruby", "Raku"}},
        {"fortran-pascal", {"Fortran", "Pascal"}},
        {"functional", {"Haskell", "Scala"}},
    };
}

/// Language -> family index.
inline std::map<std::string, std::size_t> family_labels(const std::vector<Family>& families) {
    std::map<std::string, std::size_t> labels;
    for (std::size_t f = 0; f < families.size(); ++f) {
        for (const auto& m : families[f].members) labels[m] = f;
    }
    return labels;
}

struct PlantedEmbeddings {
    std::vector<LanguageEmbedding> languages;
    std::vector<std::size_t> labels;  // family index per language, same order
};

/// Family f sits on basis vector e_f; members add isotropic Gaussian noise
/// whose expected norm is `spread`. Inter-family centre distance is sqrt(2).
inline PlantedEmbeddings planted_embeddings(const std::vector<Family>& families, std::uint64_t seed,
                                            std::size_t dim = 32, double spread = 0.05) {
    if (dim < families.size()) throw Error(ErrorCode::InvalidConfig, "dim must be at least the family count");
    DeterministicRng rng(seed);
    PlantedEmbeddings out;
    const double sigma = spread / std::sqrt(static_cast<double>(dim));
    for (std::size_t f = 0; f < families.size(); ++f) {
        for (const auto& member : families[f].members) {
            std::vector<double> v(dim, 0.0);
            v[f] = 1.0;
            for (auto& x : v) x += sigma * rng.normal();
            LanguageEmbedding e;
            e.language = member;
            e.aggregate = EmbeddingVector(v);
            e.feature_centroids.emplace("F1", e.aggregate);
            out.languages.push_back(std::move(e));
            out.labels.push_back(f);
        }
    }
    return out;
}

namespace detail {

inline std::string random_word(DeterministicRng& rng, std::size_t min_len, std::size_t max_len) {
    static constexpr std::string_view letters = "abcdefghijklmnopqrstuvwxyz";
    const auto len = min_len + static_cast<std::size_t>(rng.index(max_len - min_len + 1));
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(letters[rng.index(letters.size())]);
    return w;
}

inline std::vector<std::string> vocabulary(std::uint64_t seed, std::size_t size) {
    DeterministicRng rng(seed);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < size; ++i) words.push_back(random_word(rng, 4, 8));
    return words;
}

}  // namespace detail

struct PlantedCorpusOptions {
    std::size_t samples_per_cell = 3;
    std::size_t family_tokens = 14;
    std::size_t language_tokens = 3;
    std::size_t feature_tokens = 3;
    std::uint64_t seed = 7;
};

/// Feature-aligned corpus over `registry` whose snippets share a vocabulary
/// within each family. Languages outside every family (e.g. the reference
/// language) get a private vocabulary. Records come back as JSONL lines.
inline std::vector<std::string> planted_corpus_lines(const LanguageRegistry& registry,
                                                     const std::vector<Family>& families,
                                                     const PlantedCorpusOptions& options = {}) {
    const auto labels = family_labels(families);
    std::vector<std::vector<std::string>> family_vocab;
    for (std::size_t f = 0; f < families.size(); ++f)
        family_vocab.push_back(detail::vocabulary(options.seed * 1000003ULL + f + 1, 40));
    std::vector<std::string> lines;
    DeterministicRng rng(options.seed);
    for (const auto& language : registry.languages()) {
        const auto own_vocab = detail::vocabulary(fnv1a64(language.name, options.seed), 12);
        const auto fam = labels.find(language.name);
        const auto& shared_vocab =
            fam != labels.end() ? family_vocab[fam->second] : detail::vocabulary(fnv1a64(language.name + "#", options.seed), 40);
        for (const auto& feature : registry.features()) {
            const auto feature_vocab = detail::vocabulary(fnv1a64(feature.id, options.seed), 6);
            for (std::size_t s = 0; s < options.samples_per_cell; ++s) {
                std::vector<std::string> tokens;
                for (std::size_t t = 0; t < options.family_tokens; ++t)
                    tokens.push_back(shared_vocab[rng.index(shared_vocab.size())]);
                for (std::size_t t = 0; t < options.language_tokens; ++t)
                    tokens.push_back(own_vocab[rng.index(own_vocab.size())]);
                for (std::size_t t = 0; t < options.feature_tokens; ++t)
                    tokens.push_back(feature_vocab[rng.index(feature_vocab.size())]);
                rng.shuffle(tokens);
                std::string text;
                for (std::size_t t = 0; t < tokens.size(); ++t) {
                    text += tokens[t];
                    text += (t % 5 == 4) ? "\n" : " ";
                }
                CodeSample sample;
                sample.language = language.name;
                sample.feature = feature.id;
                sample.text = text;
                lines.push_back(to_record_line(sample));
            }
        }
    }
    return lines;
}

}  // namespace langfam::synthetic
