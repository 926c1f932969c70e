#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/error.hpp"
#include "langfam/similarity.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

namespace langfam {

struct RankedLanguage {
    std::string language;
    double score = 0.0;

    friend bool operator==(const RankedLanguage&, const RankedLanguage&) = default;
};

namespace detail {

/// Stable descending sort by score; equal scores keep registry order.
inline void sort_by_score(std::vector<RankedLanguage>& ranked, const LanguageRegistry& registry) {
    const auto rank = [&](const RankedLanguage& r) { return registry.index_of(r.language).value_or(registry.size()); };
    std::stable_sort(ranked.begin(), ranked.end(), [&](const RankedLanguage& a, const RankedLanguage& b) {
        if (a.score != b.score) return a.score > b.score;
        return rank(a) < rank(b);
    });
}

inline std::string canonical_name(const SimilarityMatrix& matrix, std::string_view name) {
    return matrix.languages()[matrix.require(name)];
}

}  // namespace detail

struct TransferRecommendation {
    std::string target;
    std::vector<RankedLanguage> ranked_sources;  // high tier only, descending
    std::string chosen;
};

/// Ranks high-resource languages by similarity to `target`.
inline TransferRecommendation recommend_transfer_source(std::string_view target, const SimilarityMatrix& matrix,
                                                        const LanguageRegistry& registry) {
    TransferRecommendation plan;
    plan.target = detail::canonical_name(matrix, target);
    const auto t = matrix.require(target);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (i == t) continue;
        const auto& name = matrix.languages()[i];
        const auto idx = registry.index_of(name);
        if (!idx || registry.languages()[*idx].tier != ResourceTier::High) continue;
        plan.ranked_sources.push_back({name, matrix.at(t, i)});
    }
    if (plan.ranked_sources.empty())
        throw Error(ErrorCode::NoHighResourceLanguages, "no high-resource candidate for " + plan.target);
    detail::sort_by_score(plan.ranked_sources, registry);
    plan.chosen = plan.ranked_sources.front().language;
    return plan;
}

enum class CurriculumPolicy { NearToFar, FarToNear, Random };

constexpr std::string_view to_string(CurriculumPolicy policy) noexcept {
    switch (policy) {
        case CurriculumPolicy::NearToFar: return "near-to-far";
        case CurriculumPolicy::FarToNear: return "far-to-near";
        case CurriculumPolicy::Random: return "random";
    }
    return "unknown";
}

inline CurriculumPolicy parse_policy(std::string_view text) {
    if (text == "near-to-far") return CurriculumPolicy::NearToFar;
    if (text == "far-to-near") return CurriculumPolicy::FarToNear;
    if (text == "random") return CurriculumPolicy::Random;
    throw Error(ErrorCode::InvalidConfig, "unknown curriculum policy '" + std::string(text) + "'");
}

struct CurriculumStage {
    std::string language;
    double similarity_to_base = 0.0;
    std::string notes;  // free-form, for a training harness (e.g. "reset optimizer state")
};

struct CurriculumPlan {
    std::string base;
    CurriculumPolicy policy = CurriculumPolicy::NearToFar;
    std::optional<std::uint64_t> seed;
    std::vector<CurriculumStage> stages;

    [[nodiscard]] std::vector<std::string> order() const {
        std::vector<std::string> out;
        for (const auto& s : stages) out.push_back(s.language);
        return out;
    }
};

/// Orders `languages` by similarity to `base`. An empty `languages` means every
/// matrix language except the base.
inline CurriculumPlan curriculum_order(std::string_view base, std::span<const std::string> languages,
                                       const SimilarityMatrix& matrix, const LanguageRegistry& registry,
                                       CurriculumPolicy policy, std::optional<std::uint64_t> seed = std::nullopt) {
    CurriculumPlan plan;
    plan.base = detail::canonical_name(matrix, base);
    plan.policy = policy;
    const auto b = matrix.require(base);
    if (policy == CurriculumPolicy::Random && !seed)
        throw Error(ErrorCode::MissingSeed, "random curriculum requires an explicit seed");
    if (policy == CurriculumPolicy::Random) plan.seed = seed;

    std::vector<std::string> selected;
    if (languages.empty()) {
        for (std::size_t i = 0; i < matrix.size(); ++i) {
            if (i != b) selected.push_back(matrix.languages()[i]);
        }
    } else {
        for (const auto& name : languages) {
            const auto canonical = detail::canonical_name(matrix, name);
            if (std::find(selected.begin(), selected.end(), canonical) != selected.end())
                throw Error(ErrorCode::InvalidConfig, "'" + canonical + "' listed twice in the curriculum");
            selected.push_back(canonical);
        }
    }
    // Registry order first, so ties and the random start are deterministic.
    const auto rank = [&](const std::string& n) { return registry.index_of(n).value_or(registry.size()); };
    std::stable_sort(selected.begin(), selected.end(),
                     [&](const std::string& x, const std::string& y) { return rank(x) < rank(y); });

    std::vector<RankedLanguage> ranked;
    for (const auto& name : selected) ranked.push_back({name, matrix.at(b, matrix.require(name))});
    switch (policy) {
        case CurriculumPolicy::NearToFar:
            detail::sort_by_score(ranked, registry);
            break;
        case CurriculumPolicy::FarToNear:
            std::stable_sort(ranked.begin(), ranked.end(), [&](const RankedLanguage& x, const RankedLanguage& y) {
                if (x.score != y.score) return x.score < y.score;
                return rank(x.language) < rank(y.language);
            });
            break;
        case CurriculumPolicy::Random:
            {
                DeterministicRng rng(*seed);
                rng.shuffle(ranked);
            }
            break;
    }
    for (const auto& r : ranked) plan.stages.push_back({r.language, r.score, {}});
    return plan;
}

enum class PivotScoring { Centrality, TargetMean, Betweenness };

constexpr std::string_view to_string(PivotScoring scoring) noexcept {
    switch (scoring) {
        case PivotScoring::Centrality: return "centrality";
        case PivotScoring::TargetMean: return "target-mean";
        case PivotScoring::Betweenness: return "betweenness";
    }
    return "unknown";
}

inline PivotScoring parse_scoring(std::string_view text) {
    if (text == "centrality") return PivotScoring::Centrality;
    if (text == "target-mean") return PivotScoring::TargetMean;
    if (text == "betweenness") return PivotScoring::Betweenness;
    throw Error(ErrorCode::InvalidConfig, "unknown pivot scoring '" + std::string(text) + "'");
}

struct PivotOptions {
    bool exclude_source = true;
    bool exclude_targets = true;
    /// Restricts candidates; empty means every non-reference matrix language.
    std::vector<std::string> candidates;
};

struct PivotRanking {
    std::string source;
    std::vector<std::string> targets;
    PivotScoring scoring = PivotScoring::Centrality;
    std::vector<RankedLanguage> ranked_pivots;
};

/// Scores candidate pivots:
///   centrality  - mean similarity to all other non-reference languages
///   target-mean - mean similarity to the targets
///   betweenness - min(sim(pivot, source), mean sim(pivot, targets))
inline PivotRanking rank_pivots(std::string_view source, std::span<const std::string> targets,
                                const SimilarityMatrix& matrix, const LanguageRegistry& registry,
                                PivotScoring scoring, const PivotOptions& options = {}) {
    PivotRanking ranking;
    ranking.source = detail::canonical_name(matrix, source);
    ranking.scoring = scoring;
    const auto s = matrix.require(source);
    std::vector<std::size_t> target_idx;
    for (const auto& t : targets) {
        target_idx.push_back(matrix.require(t));
        ranking.targets.push_back(matrix.languages()[target_idx.back()]);
    }
    if (target_idx.empty() && scoring != PivotScoring::Centrality)
        throw Error(ErrorCode::EmptyInput, "target-based pivot scoring needs at least one target");

    const auto is_ref = [&](std::size_t i) {
        const auto idx = registry.index_of(matrix.languages()[i]);
        return idx && registry.languages()[*idx].is_reference;
    };
    std::vector<std::size_t> pool;
    if (options.candidates.empty()) {
        for (std::size_t i = 0; i < matrix.size(); ++i) {
            if (!is_ref(i)) pool.push_back(i);
        }
    } else {
        for (const auto& c : options.candidates) pool.push_back(matrix.require(c));
    }
    std::vector<std::size_t> candidates;
    for (const auto i : pool) {
        if (options.exclude_source && i == s) continue;
        if (options.exclude_targets && std::find(target_idx.begin(), target_idx.end(), i) != target_idx.end())
            continue;
        candidates.push_back(i);
    }
    if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no pivot candidates remain");

    const auto target_mean = [&](std::size_t p) {
        double sum = 0.0;
        for (const auto t : target_idx) sum += matrix.at(p, t);
        return sum / static_cast<double>(target_idx.size());
    };
    for (const auto p : candidates) {
        double score = 0.0;
        switch (scoring) {
            case PivotScoring::Centrality: {
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t j = 0; j < matrix.size(); ++j) {
                    if (j == p || is_ref(j)) continue;
                    sum += matrix.at(p, j);
                    ++count;
                }
                score = count == 0 ? 0.0 : sum / static_cast<double>(count);
                break;
            }
            case PivotScoring::TargetMean:
                score = target_mean(p);
                break;
            case PivotScoring::Betweenness:
                score = std::min(matrix.at(p, s), target_mean(p));
                break;
        }
        ranking.ranked_pivots.push_back({matrix.languages()[p], score});
    }
    detail::sort_by_score(ranking.ranked_pivots, registry);
    return ranking;
}

inline nlohmann::json to_json(const TransferRecommendation& plan) {
    nlohmann::json doc{{"kind", "transfer"}, {"target", plan.target}, {"chosen", plan.chosen}};
    doc["ranked_sources"] = nlohmann::json::array();
    for (const auto& r : plan.ranked_sources) doc["ranked_sources"].push_back({{"language", r.language}, {"similarity", r.score}});
    return doc;
}

inline nlohmann::json to_json(const CurriculumPlan& plan) {
    nlohmann::json doc{{"kind", "curriculum"}, {"base", plan.base}, {"policy", std::string(to_string(plan.policy))}};
    if (plan.seed) doc["seed"] = *plan.seed;
    doc["stages"] = nlohmann::json::array();
    for (const auto& s : plan.stages)
        doc["stages"].push_back({{"language", s.language}, {"similarity_to_base", s.similarity_to_base}, {"notes", s.notes}});
    return doc;
}

inline nlohmann::json to_json(const PivotRanking& ranking) {
    nlohmann::json doc{{"kind", "pivots"},
                       {"source", ranking.source},
                       {"targets", ranking.targets},
                       {"scoring", std::string(to_string(ranking.scoring))}};
    doc["ranked_pivots"] = nlohmann::json::array();
    for (const auto& r : ranking.ranked_pivots) doc["ranked_pivots"].push_back({{"language", r.language}, {"score", r.score}});
    return doc;
}

/// Plain-text table for terminals.
inline std::string format_table(std::string_view title, std::span<const RankedLanguage> rows,
                                std::string_view value_header) {
    std::size_t width = 8;
    for (const auto& r : rows) width = std::max(width, r.language.size());
    std::string out(title);
    out += "\n";
    const auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    out += pad("#", 4) + pad("language", width + 2) + std::string(value_header) + "\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        out += pad(std::to_string(i + 1), 4) + pad(rows[i].language, width + 2) + format_fixed(rows[i].score, 4) + "\n";
    return out;
}

}  // namespace langfam
