#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/error.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/text.hpp"

namespace langfam {

struct CodeSample {
    std::string language;  // canonical registry spelling
    std::string feature;   // "F1".."F21"
    std::string text;      // normalized
    std::size_t sample_index = 0;
    std::string content_hash;
    nlohmann::json meta = nlohmann::json::object();

    [[nodiscard]] std::string id() const {
        return language + "/" + feature + "/" + std::to_string(sample_index);
    }
};

struct CellKey {
    std::string language;
    std::string feature;

    friend bool operator==(const CellKey&, const CellKey&) = default;
    friend bool operator<(const CellKey& a, const CellKey& b) {
        if (a.language != b.language) return a.language < b.language;
        return FeatureIdLess{}(a.feature, b.feature);
    }
};

/// Immutable-after-ingest set of samples indexed by (language, feature).
class Corpus {
public:
    /// Adds a sample; assigns the next free index in its cell when `explicit_index` is empty.
    void add(CodeSample sample, std::optional<std::size_t> explicit_index = std::nullopt) {
        CellKey key{sample.language, sample.feature};
        auto& used = indices_[key];
        if (explicit_index) {
            if (!used.insert(*explicit_index).second)
                throw Error(ErrorCode::MalformedRecord, "duplicate sample_index " + std::to_string(*explicit_index) +
                                                            " in cell " + key.language + "/" + key.feature);
            sample.sample_index = *explicit_index;
        } else {
            std::size_t next = used.empty() ? 0 : *used.rbegin() + 1;
            used.insert(next);
            sample.sample_index = next;
        }
        samples_.push_back(std::move(sample));
    }

    /// Appends every sample of `other`, keeping its indices when free.
    void merge(const Corpus& other) {
        for (const auto& sample : other.samples_) {
            CellKey key{sample.language, sample.feature};
            if (indices_[key].count(sample.sample_index) == 0) {
                add(sample, sample.sample_index);
            } else {
                add(sample);
            }
        }
    }

    [[nodiscard]] std::span<const CodeSample> samples() const noexcept { return samples_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

    [[nodiscard]] std::size_t cell_count(const CellKey& key) const {
        const auto it = indices_.find(key);
        return it == indices_.end() ? 0 : it->second.size();
    }

    /// Order-insensitive digest over (language, feature, content hash) triples.
    [[nodiscard]] std::string digest() const {
        std::vector<std::string> keys;
        keys.reserve(samples_.size());
        for (const auto& s : samples_) keys.push_back(s.language + '\x1f' + s.feature + '\x1f' + s.content_hash);
        std::sort(keys.begin(), keys.end());
        std::uint64_t state = fnv1a64_offset;
        for (const auto& k : keys) state = fnv1a64(k + '\n', state);
        return to_hex(state);
    }

private:
    std::vector<CodeSample> samples_;
    std::map<CellKey, std::set<std::size_t>> indices_;
};

struct RecordIssue {
    std::size_t line = 0;  // 1-based
    ErrorCode code = ErrorCode::MalformedRecord;
    std::string message;
};

struct IngestReport {
    Corpus corpus;
    std::vector<RecordIssue> issues;
};

enum class IngestPolicy {
    Strict,   // first bad record throws
    Lenient,  // bad records are skipped and reported
};

namespace detail {

inline CodeSample parse_record(std::string_view line, std::size_t line_no, const LanguageRegistry& registry,
                               std::optional<std::size_t>& explicit_index) {
    const auto where = "line " + std::to_string(line_no);
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
    if (!record.is_object()) throw Error(ErrorCode::MalformedRecord, where + ": record is not an object");
    for (const char* field : {"language", "feature", "text"}) {
        if (!record.contains(field) || !record[field].is_string())
            throw Error(ErrorCode::MalformedRecord, where + ": missing string field '" + field + "'");
    }
    const auto language_name = record["language"].get<std::string>();
    const auto idx = registry.index_of(language_name);
    if (!idx) throw Error(ErrorCode::UnknownLanguage, where + ": unknown language '" + language_name + "'");
    const auto feature_id = record["feature"].get<std::string>();
    const int ordinal = feature_ordinal(feature_id);
    const std::string canonical_feature = ordinal > 0 ? "F" + std::to_string(ordinal) : feature_id;
    if (!registry.has_feature(canonical_feature) || canonical_feature.size() != feature_id.size())
        throw Error(ErrorCode::UnknownFeature, where + ": unknown feature '" + feature_id + "'");

    const auto raw = record["text"].get<std::string>();
    if (is_blank(raw)) throw Error(ErrorCode::MalformedRecord, where + ": empty text");

    CodeSample sample;
    sample.language = registry.languages()[*idx].name;
    sample.feature = canonical_feature;
    sample.text = normalize_snippet(raw);
    sample.content_hash = digest_hex(sample.text);
    if (record.contains("meta")) {
        if (!record["meta"].is_object()) throw Error(ErrorCode::MalformedRecord, where + ": 'meta' must be an object");
        sample.meta = record["meta"];
        if (sample.meta.contains("sample_index")) {
            const auto& v = sample.meta["sample_index"];
            if (!v.is_number_unsigned()) throw Error(ErrorCode::MalformedRecord, where + ": bad sample_index");
            explicit_index = v.get<std::size_t>();
        }
    }
    return sample;
}

}  // namespace detail

/// Reads newline-delimited JSON records {language, feature, text, meta?}.
/// Blank lines are skipped.
inline IngestReport ingest_corpus(std::istream& in, const LanguageRegistry& registry,
                                  IngestPolicy policy = IngestPolicy::Strict) {
    IngestReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) continue;
        try {
            std::optional<std::size_t> explicit_index;
            auto sample = detail::parse_record(line, line_no, registry, explicit_index);
            try {
                report.corpus.add(std::move(sample), explicit_index);
            } catch (const Error& e) {
                throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
            }
        } catch (const Error& e) {
            if (policy == IngestPolicy::Strict) throw;
            report.issues.push_back({line_no, e.code(), e.what()});
        }
    }
    return report;
}

inline IngestReport ingest_corpus_file(const std::filesystem::path& path, const LanguageRegistry& registry,
                                       IngestPolicy policy = IngestPolicy::Strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open corpus " + path.string());
    return ingest_corpus(in, registry, policy);
}

/// Ingests shards concurrently and merges them in the given order.
inline IngestReport ingest_shards(std::span<const std::filesystem::path> shards, const LanguageRegistry& registry,
                                  IngestPolicy policy = IngestPolicy::Strict) {
    std::vector<std::future<IngestReport>> pending;
    pending.reserve(shards.size());
    for (const auto& shard : shards) {
        pending.push_back(std::async(std::launch::async, [&registry, policy, shard] {
            return ingest_corpus_file(shard, registry, policy);
        }));
    }
    IngestReport merged;
    for (auto& part : pending) {
        auto report = part.get();
        merged.corpus.merge(report.corpus);
        merged.issues.insert(merged.issues.end(), report.issues.begin(), report.issues.end());
    }
    return merged;
}

inline std::string to_record_line(const CodeSample& sample) {
    nlohmann::json record{{"language", sample.language}, {"feature", sample.feature}, {"text", sample.text}};
    if (!sample.meta.empty()) record["meta"] = sample.meta;
    return record.dump();
}

namespace detail {

inline std::string join_names(std::span<const LanguageId> languages) {
    std::string out;
    for (std::size_t i = 0; i < languages.size(); ++i) {
        if (i > 0) {
            if (languages.size() > 2) out += ",";
            out += " ";
            if (i + 1 == languages.size()) out += "and ";
        }
        out += languages[i].name;
    }
    return out;
}

}  // namespace detail

/// Generation prompt for one feature across the given programming languages.
inline std::string render_generation_prompt(const LinguisticFeature& feature, std::span<const LanguageId> languages,
                                            std::size_t samples_per_language) {
    if (languages.empty()) throw Error(ErrorCode::EmptyInput, "prompt needs at least one language");
    if (samples_per_language == 0) throw Error(ErrorCode::InvalidConfig, "samples_per_language must be >= 1");
    const auto n = std::to_string(samples_per_language);
    const std::string unit = samples_per_language == 1 ? "code snippet" : "code snippets";
    std::string prompt;
    prompt += "Produce code exemplars for " + feature.name + " in " + detail::join_names(languages) + ".\n";
    prompt += "# " + feature.name + ": " + feature.description + "\n";
    prompt += "# You must strictly adhere to the following rules:\n";
    prompt += "1) Generate " + n + " " + unit + " for each language;\n";
    prompt += "2) These " + n + " " + unit +
              " must not only conform to the feature specification but should also be maximally diversified;\n";
    prompt += "3) Ensure semantic consistency across code snippets in different languages, meaning they should "
              "implement the same functionality.\n";
    return prompt;
}

inline std::string render_generation_prompt(std::string_view feature_id, std::span<const LanguageId> languages,
                                            std::size_t samples_per_language) {
    return render_generation_prompt(find_feature(feature_id), languages, samples_per_language);
}

/// Prompt for the reference natural language: plain-English descriptions of
/// the same tasks the code snippets implement.
inline std::string render_reference_prompt(const LinguisticFeature& feature, const LanguageId& reference,
                                           std::size_t samples_per_language) {
    if (samples_per_language == 0) throw Error(ErrorCode::InvalidConfig, "samples_per_language must be >= 1");
    const auto n = std::to_string(samples_per_language);
    std::string prompt;
    prompt += "Produce " + reference.name + " task descriptions for " + feature.name + ".\n";
    prompt += "# " + feature.name + ": " + feature.description + "\n";
    prompt += "# You must strictly adhere to the following rules:\n";
    prompt += "1) Generate " + n + " descriptions written in plain " + reference.name + ", without any code;\n";
    prompt += "2) These " + n +
              " descriptions must not only conform to the feature specification but should also be maximally "
              "diversified;\n";
    prompt += "3) Each description must state the same functionality as the corresponding code snippet generated "
              "for the programming languages.\n";
    return prompt;
}

struct CellViolation {
    enum class Kind { Missing, Underfull, Overfull };
    CellKey cell;
    Kind kind = Kind::Missing;
    std::size_t count = 0;
    std::size_t expected = 0;
};

constexpr std::string_view to_string(CellViolation::Kind kind) noexcept {
    switch (kind) {
        case CellViolation::Kind::Missing: return "missing";
        case CellViolation::Kind::Underfull: return "underfull";
        case CellViolation::Kind::Overfull: return "overfull";
    }
    return "unknown";
}

struct CellSummary {
    std::size_t count = 0;
    double duplicate_rate = 0.0;
};

struct CorpusManifest {
    std::map<CellKey, CellSummary> cells;
    std::size_t total = 0;
    std::size_t programming_total = 0;  // excludes the reference language
    double duplicate_rate = 0.0;        // over the whole corpus
};

struct DuplicateWarning {
    CellKey cell;
    double duplicate_rate = 0.0;
};

struct ValidationResult {
    CorpusManifest manifest;
    std::vector<CellViolation> violations;
    std::vector<DuplicateWarning> duplicate_warnings;

    [[nodiscard]] bool passed() const noexcept { return violations.empty(); }
};

namespace detail {

/// Samples whose hash occurs more than once in the group.
inline std::size_t duplicated_samples(const std::vector<const std::string*>& hashes) {
    std::map<std::string_view, std::size_t> counts;
    for (const auto* h : hashes) ++counts[*h];
    std::size_t dup = 0;
    for (const auto& [hash, count] : counts) {
        if (count > 1) dup += count;
    }
    return dup;
}

inline std::map<CellKey, std::vector<const std::string*>> hashes_by_cell(const Corpus& corpus) {
    std::map<CellKey, std::vector<const std::string*>> cells;
    for (const auto& s : corpus.samples()) cells[{s.language, s.feature}].push_back(&s.content_hash);
    return cells;
}

}  // namespace detail

inline constexpr double default_duplicate_threshold = 0.05;

/// Checks that every registry (language, feature) cell holds exactly
/// `expected_per_cell` samples. Violations are data, not exceptions.
inline ValidationResult validate_corpus(const Corpus& corpus, const LanguageRegistry& registry,
                                        std::size_t expected_per_cell,
                                        double duplicate_threshold = default_duplicate_threshold) {
    ValidationResult result;
    const auto by_cell = detail::hashes_by_cell(corpus);
    std::size_t duplicated_total = 0;
    for (const auto& language : registry.languages()) {
        for (const auto& feature : registry.features()) {
            CellKey key{language.name, feature.id};
            CellSummary summary;
            if (const auto it = by_cell.find(key); it != by_cell.end()) {
                summary.count = it->second.size();
                const auto dup = detail::duplicated_samples(it->second);
                duplicated_total += dup;
                summary.duplicate_rate = static_cast<double>(dup) / static_cast<double>(summary.count);
            }
            result.manifest.total += summary.count;
            if (!language.is_reference) result.manifest.programming_total += summary.count;
            if (summary.count != expected_per_cell) {
                auto kind = summary.count == 0                 ? CellViolation::Kind::Missing
                            : summary.count < expected_per_cell ? CellViolation::Kind::Underfull
                                                                : CellViolation::Kind::Overfull;
                result.violations.push_back({key, kind, summary.count, expected_per_cell});
            }
            if (summary.count > 0 && summary.duplicate_rate > duplicate_threshold)
                result.duplicate_warnings.push_back({key, summary.duplicate_rate});
            result.manifest.cells.emplace(std::move(key), summary);
        }
    }
    if (result.manifest.total > 0)
        result.manifest.duplicate_rate =
            static_cast<double>(duplicated_total) / static_cast<double>(result.manifest.total);
    return result;
}

struct LengthSummary {
    std::size_t min = 0;
    std::size_t max = 0;
    double mean = 0.0;
    std::size_t median = 0;
    std::size_t p90 = 0;
};

struct CorpusStats {
    std::vector<std::pair<std::string, std::size_t>> per_language;  // registry order
    std::vector<std::pair<std::string, std::size_t>> per_feature;   // registry order
    std::size_t total = 0;
    LengthSummary length_bytes;
    std::map<CellKey, double> duplicate_rates;  // non-empty cells only
};

inline CorpusStats corpus_stats(const Corpus& corpus, const LanguageRegistry& registry) {
    CorpusStats stats;
    std::map<std::string, std::size_t> lang_counts;
    std::map<std::string, std::size_t> feat_counts;
    std::vector<std::size_t> lengths;
    lengths.reserve(corpus.size());
    for (const auto& s : corpus.samples()) {
        ++lang_counts[s.language];
        ++feat_counts[s.feature];
        lengths.push_back(s.text.size());
    }
    for (const auto& language : registry.languages()) stats.per_language.emplace_back(language.name, lang_counts[language.name]);
    for (const auto& feature : registry.features()) stats.per_feature.emplace_back(feature.id, feat_counts[feature.id]);
    stats.total = corpus.size();
    if (!lengths.empty()) {
        std::sort(lengths.begin(), lengths.end());
        stats.length_bytes.min = lengths.front();
        stats.length_bytes.max = lengths.back();
        double sum = 0.0;
        for (const auto l : lengths) sum += static_cast<double>(l);
        stats.length_bytes.mean = sum / static_cast<double>(lengths.size());
        stats.length_bytes.median = lengths[(lengths.size() - 1) / 2];
        stats.length_bytes.p90 = lengths[(lengths.size() * 9 + 9) / 10 - 1];
    }
    for (const auto& [key, hashes] : detail::hashes_by_cell(corpus)) {
        stats.duplicate_rates[key] =
            static_cast<double>(detail::duplicated_samples(hashes)) / static_cast<double>(hashes.size());
    }
    return stats;
}

}  // namespace langfam
