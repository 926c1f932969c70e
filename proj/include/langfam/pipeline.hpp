#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/clustering.hpp"
#include "langfam/corpus.hpp"
#include "langfam/embedding.hpp"
#include "langfam/error.hpp"
#include "langfam/planner.hpp"
#include "langfam/report.hpp"
#include "langfam/similarity.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

namespace langfam {

inline constexpr std::string_view tool_version = "0.3.0";

/// Error tagged with the pipeline stage that raised it. Keeps the cause's code.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.code(), "stage '" + stage + "' failed: " + cause.what()), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Process exit code for an error: 2 validation, 3 provider, 4 invariant, 1 otherwise.
inline int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ValidationFailed:
        case ErrorCode::MalformedRecord:
        case ErrorCode::UnknownLanguage:
        case ErrorCode::UnknownFeature:
        case ErrorCode::DuplicateLanguage:
        case ErrorCode::MultipleReferenceLanguages:
            return 2;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::PartialFailure:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::CacheMismatch:
            return 3;
        case ErrorCode::InvariantViolation:
            return 4;
        default:
            return 1;
    }
}

using ProviderFactory = std::function<std::unique_ptr<EmbeddingProvider>(const nlohmann::json& provider_config)>;

/// Handles {"name": "local", "dim": 256, "seed": 123}.
inline std::unique_ptr<EmbeddingProvider> make_local_provider(const nlohmann::json& config) {
    const auto name = config.value("name", std::string("local"));
    if (name != "local") throw Error(ErrorCode::InvalidConfig, "no provider named '" + name + "' in this build");
    return std::make_unique<LocalNgramEmbedder>(config.value("dim", LocalNgramEmbedder::default_dim),
                                                config.value("seed", LocalNgramEmbedder::default_seed));
}

struct PlanRequests {
    std::vector<std::string> transfer_targets;
    struct Curriculum {
        std::string base;
        std::vector<std::string> languages;
        CurriculumPolicy policy = CurriculumPolicy::NearToFar;
        std::vector<std::uint64_t> seeds;  // random policy: one order per seed
    };
    std::vector<Curriculum> curricula;
    struct Pivots {
        std::string source;
        std::vector<std::string> targets;
        PivotScoring scoring = PivotScoring::Centrality;
    };
    std::vector<Pivots> pivots;
};

/// Everything `run` needs. Paths are resolved relative to the config file by
/// the loader.
struct PipelineConfig {
    std::optional<std::filesystem::path> registry;  // default registry when empty
    std::optional<std::filesystem::path> corpus;
    std::optional<std::filesystem::path> embeddings;  // precomputed language embeddings (JSON)
    std::size_t expected_per_cell = 100;
    double duplicate_threshold = default_duplicate_threshold;
    nlohmann::json provider = {{"name", "local"}};
    std::optional<std::filesystem::path> cache;
    EmbedOptions embed;
    Aggregation aggregation = Aggregation::Mean;
    ClusterOptions clustering;
    bool cluster_reference = false;
    PlanRequests plans;
    std::map<std::string, std::size_t> expected_partition;  // for ARI in the report
    std::filesystem::path output_dir = "langfam-out";
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// JSON config. Every key is optional except a corpus or embeddings source:
///
///     {"registry": "registry.json", "corpus": "corpus.jsonl", "expected_per_cell": 100,
///      "provider": {"name": "local", "dim": 256}, "cache": "cache.bin", "batch_size": 64,
///      "aggregation": "mean",
///      "clustering": {"dissimilarity": "one-minus-sim", "k": null, "k_min": 2, "k_max": null,
///                     "include_reference": false},
///      "plans": {"transfer": ["Kotlin"],
///                "curriculum": [{"base": "English", "policy": "near-to-far"}],
///                "pivots": [{"source": "Python", "targets": ["C++"], "scoring": "centrality"}]},
///      "expected_partition": {"Go": 1},
///      "output_dir": "out"}
inline PipelineConfig load_pipeline_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    PipelineConfig cfg;
    try {
        if (doc.contains("registry") && !doc["registry"].is_null())
            cfg.registry = detail::resolve(base_dir, doc["registry"].get<std::string>());
        if (doc.contains("corpus") && !doc["corpus"].is_null())
            cfg.corpus = detail::resolve(base_dir, doc["corpus"].get<std::string>());
        if (doc.contains("embeddings") && !doc["embeddings"].is_null())
            cfg.embeddings = detail::resolve(base_dir, doc["embeddings"].get<std::string>());
        cfg.expected_per_cell = doc.value("expected_per_cell", cfg.expected_per_cell);
        cfg.duplicate_threshold = doc.value("duplicate_threshold", cfg.duplicate_threshold);
        if (doc.contains("provider")) cfg.provider = doc["provider"];
        if (doc.contains("cache") && !doc["cache"].is_null())
            cfg.cache = detail::resolve(base_dir, doc["cache"].get<std::string>());
        cfg.embed.batch_size = doc.value("batch_size", cfg.embed.batch_size);
        cfg.embed.max_in_flight = doc.value("max_in_flight", cfg.embed.max_in_flight);
        cfg.embed.max_retries = doc.value("max_retries", cfg.embed.max_retries);
        if (doc.contains("aggregation")) cfg.aggregation = parse_aggregation(doc["aggregation"].get<std::string>());
        if (doc.contains("clustering")) {
            const auto& c = doc["clustering"];
            if (c.contains("dissimilarity"))
                cfg.clustering.dissimilarity = parse_dissimilarity(c["dissimilarity"].get<std::string>());
            if (c.contains("k") && !c["k"].is_null()) cfg.clustering.k = c["k"].get<std::size_t>();
            cfg.clustering.k_min = c.value("k_min", cfg.clustering.k_min);
            if (c.contains("k_max") && !c["k_max"].is_null()) cfg.clustering.k_max = c["k_max"].get<std::size_t>();
            cfg.cluster_reference = c.value("include_reference", false);
        }
        if (doc.contains("plans")) {
            const auto& p = doc["plans"];
            if (p.contains("transfer")) cfg.plans.transfer_targets = p["transfer"].get<std::vector<std::string>>();
            if (p.contains("curriculum")) {
                for (const auto& c : p["curriculum"]) {
                    PlanRequests::Curriculum req;
                    req.base = c.at("base").get<std::string>();
                    req.languages = c.value("languages", std::vector<std::string>{});
                    req.policy = parse_policy(c.value("policy", std::string("near-to-far")));
                    if (c.contains("seeds")) req.seeds = c["seeds"].get<std::vector<std::uint64_t>>();
                    if (c.contains("seed")) req.seeds.push_back(c["seed"].get<std::uint64_t>());
                    cfg.plans.curricula.push_back(std::move(req));
                }
            }
            if (p.contains("pivots")) {
                for (const auto& v : p["pivots"]) {
                    PlanRequests::Pivots req;
                    req.source = v.at("source").get<std::string>();
                    req.targets = v.value("targets", std::vector<std::string>{});
                    req.scoring = parse_scoring(v.value("scoring", std::string("centrality")));
                    cfg.plans.pivots.push_back(std::move(req));
                }
            }
        }
        if (doc.contains("expected_partition"))
            cfg.expected_partition = doc["expected_partition"].get<std::map<std::string, std::size_t>>();
        if (doc.contains("output_dir")) cfg.output_dir = detail::resolve(base_dir, doc["output_dir"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("pipeline config: ") + e.what());
    }
    if (!cfg.corpus && !cfg.embeddings)
        throw Error(ErrorCode::InvalidConfig, "pipeline config needs 'corpus' or 'embeddings'");
    return cfg;
}

inline PipelineConfig load_pipeline_config_file(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    return load_pipeline_config(doc, path.parent_path());
}

struct RunManifest {
    std::string tool_version;
    std::string registry_digest;
    std::string corpus_digest;
    std::string provider;
    std::string matrix_digest;
    nlohmann::json clustering_options;
    std::string started_at;
    std::string finished_at;

    /// Digest of the run inputs. Excludes timestamps and artifact digests so
    /// reruns over the same inputs embed the same value.
    [[nodiscard]] std::string digest() const {
        const nlohmann::json inputs{{"tool_version", tool_version},
                                    {"registry", registry_digest},
                                    {"corpus", corpus_digest},
                                    {"provider", provider},
                                    {"clustering", clustering_options}};
        return digest_hex(inputs.dump());
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"digest", digest()},
                {"tool_version", tool_version},
                {"registry_digest", registry_digest},
                {"corpus_digest", corpus_digest},
                {"provider", provider},
                {"matrix_digest", matrix_digest},
                {"clustering", clustering_options},
                {"started_at", started_at},
                {"finished_at", finished_at}};
    }
};

struct PipelineResult {
    RunManifest manifest;
    LanguageRegistry registry;
    EmbeddingRun embeddings;
    SimilarityMatrix matrix;
    SimilarityStats stats;
    ClusteringOutcome clustering;
    std::optional<double> adjusted_rand;
    nlohmann::json plans = nlohmann::json::array();
    std::vector<std::string> plan_tables;
    std::map<std::string, std::filesystem::path> artifacts;  // name -> final path
};

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    } catch (const nlohmann::json::exception& e) {
        throw StageError(name, Error(ErrorCode::InvalidConfig, e.what()));
    } catch (const std::filesystem::filesystem_error& e) {
        throw StageError(name, Error(ErrorCode::IoFailure, e.what()));
    }
}

inline nlohmann::json clustering_options_json(const PipelineConfig& cfg) {
    nlohmann::json c{{"dissimilarity", std::string(to_string(cfg.clustering.dissimilarity))},
                     {"k_min", cfg.clustering.k_min},
                     {"include_reference", cfg.cluster_reference},
                     {"aggregation", cfg.aggregation == Aggregation::Mean ? "mean" : "concat"}};
    c["k"] = cfg.clustering.k ? nlohmann::json(*cfg.clustering.k) : nlohmann::json(nullptr);
    c["k_max"] = cfg.clustering.k_max ? nlohmann::json(*cfg.clustering.k_max) : nlohmann::json(nullptr);
    return c;
}

}  // namespace detail

/// Markdown run report. Contains no timestamps.
inline std::string render_report(const PipelineResult& r) {
    std::string md = "# Language family report\n\n";
    md += "- manifest: `" + r.manifest.digest() + "`\n";
    md += "- provider: `" + r.manifest.provider + "`\n";
    md += "- languages: " + std::to_string(r.matrix.size()) + "\n\n";
    md += "## Centrality\n\n| language | mean similarity |";
    if (r.stats.reference_column) md += " similarity to reference |";
    md += "\n|---|---|";
    if (r.stats.reference_column) md += "---|";
    md += "\n";
    for (const auto& [name, mean] : r.stats.mean_similarity) {
        md += "| " + name + " | " + format_fixed(mean, 3) + " |";
        if (r.stats.reference_column) {
            for (const auto& [n2, v] : *r.stats.reference_column) {
                if (n2 == name) md += " " + format_fixed(v, 3) + " |";
            }
        }
        md += "\n";
    }
    md += "\nCentroid language: **" + r.stats.centroid_language + "**\n";
    if (r.stats.reference_mean) md += "\nMean similarity to the reference language: " + format_fixed(*r.stats.reference_mean, 3) + "\n";
    const auto& res = r.clustering.result;
    md += "\n## Clustering\n\n- dissimilarity: " + std::string(to_string(r.clustering.dissimilarity.source)) + "\n";
    md += "- k = " + std::to_string(res.k) + (res.elbow ? " (elbow)" : " (forced)") + "\n";
    if (res.silhouette) md += "- silhouette = " + format_fixed(*res.silhouette, 4) + "\n";
    if (r.adjusted_rand) md += "- adjusted Rand index vs expected partition = " + format_fixed(*r.adjusted_rand, 4) + "\n";
    md += "\n";
    for (std::size_t c = 0; c < res.per_cluster.size(); ++c) {
        md += "- cluster " + std::to_string(c) + ":";
        for (const auto& m : res.per_cluster[c]) md += " " + m;
        md += "\n";
    }
    if (res.elbow) {
        md += "\n| k | W(k) | knee score |\n|---|---|---|\n";
        for (const auto& [k, w] : res.elbow->dispersion) {
            md += "| " + std::to_string(k) + " | " + format_fixed(w, 6) + " | ";
            if (const auto it = res.elbow->knee_score.find(k); it != res.elbow->knee_score.end())
                md += format_fixed(it->second, 6);
            md += " |\n";
        }
    }
    md += "\n### Merges\n\n| step | left | right | height | size |\n|---|---|---|---|---|\n";
    for (std::size_t t = 0; t < r.clustering.dendrogram.merges.size(); ++t) {
        const auto& m = r.clustering.dendrogram.merges[t];
        md += "| " + std::to_string(t) + " | " + std::to_string(m.left) + " | " + std::to_string(m.right) + " | " +
              format_fixed(m.height, 6) + " | " + std::to_string(m.size) + " |\n";
    }
    if (!r.embeddings.notes.empty()) {
        md += "\n## Coverage notes\n\n";
        for (const auto& note : r.embeddings.notes) md += "- " + note + "\n";
    }
    if (!r.plan_tables.empty()) {
        md += "\n## Plans\n\n";
        for (const auto& table : r.plan_tables) md += "```\n" + table + "```\n\n";
    }
    return md;
}

/// validate -> embed -> similarity -> cluster -> plans -> write artifacts.
/// Artifacts are staged in a hidden directory and renamed into
/// `output_dir` only after every stage succeeded.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const ProviderFactory& factory = make_local_provider) {
    PipelineResult r;
    r.manifest.tool_version = std::string(tool_version);
    r.manifest.started_at = detail::utc_now();
    r.manifest.clustering_options = detail::clustering_options_json(cfg);

    r.registry = detail::stage("registry", [&] {
        if (!cfg.registry) return default_registry();
        const std::string text = read_file(*cfg.registry);
        return load_registry(std::string_view(text));
    });
    r.manifest.registry_digest = r.registry.digest();

    if (cfg.corpus) {
        const auto corpus = detail::stage("validate", [&] {
            auto report = ingest_corpus_file(*cfg.corpus, r.registry, IngestPolicy::Strict);
            const auto validation = validate_corpus(report.corpus, r.registry, cfg.expected_per_cell, cfg.duplicate_threshold);
            if (!validation.passed()) {
                std::string cells;
                for (std::size_t i = 0; i < validation.violations.size() && i < 20; ++i) {
                    const auto& v = validation.violations[i];
                    cells += (i ? ", " : "") + v.cell.language + "/" + v.cell.feature + " (" + std::to_string(v.count) +
                             "/" + std::to_string(v.expected) + ")";
                }
                if (validation.violations.size() > 20) cells += ", ...";
                throw Error(ErrorCode::ValidationFailed,
                            std::to_string(validation.violations.size()) + " violating cells: " + cells);
            }
            return std::move(report.corpus);
        });
        r.manifest.corpus_digest = corpus.digest();
        r.embeddings = detail::stage("embed", [&] {
            auto provider = factory(cfg.provider);
            std::optional<EmbeddingCache> cache;
            if (cfg.cache) cache = EmbeddingCache::open(*cfg.cache, provider->identity());
            auto run = build_language_embeddings(corpus, *provider, r.registry, cache ? &*cache : nullptr, cfg.embed,
                                                 cfg.aggregation);
            if (cache) cache->flush(*cfg.cache);
            return run;
        });
    } else {
        r.embeddings = detail::stage("embed", [&] {
            return embedding_run_from_json(nlohmann::json::parse(read_file(*cfg.embeddings)));
        });
        r.manifest.corpus_digest = "embeddings:" + digest_hex(read_file(*cfg.embeddings));
    }
    r.manifest.provider = r.embeddings.provider.key();
    const auto digest = r.manifest.digest();

    detail::stage("similarity", [&] {
        r.matrix = build_similarity_matrix(r.embeddings.languages, r.embeddings.provider.key());
        r.stats = similarity_stats(r.matrix, r.registry);
        return 0;
    });

    detail::stage("cluster", [&] {
        std::vector<std::string> names;
        for (const auto& name : r.matrix.languages()) {
            if (cfg.cluster_reference || !r.registry.language(name).is_reference) names.push_back(name);
        }
        const auto sub = r.matrix.subset(names);
        r.clustering = cluster_languages(sub, cfg.clustering, r.embeddings.languages);
        check_dendrogram(r.clustering.dendrogram);
        if (!cfg.expected_partition.empty()) {
            std::vector<std::size_t> expected;
            for (const auto& name : names) {
                const auto it = cfg.expected_partition.find(name);
                if (it == cfg.expected_partition.end())
                    throw Error(ErrorCode::InvalidConfig, "expected_partition lacks " + name);
                expected.push_back(it->second);
            }
            r.adjusted_rand = adjusted_rand_index(expected, r.clustering.result.partition.labels);
        }
        return 0;
    });

    detail::stage("plan", [&] {
        for (const auto& target : cfg.plans.transfer_targets) {
            const auto plan = recommend_transfer_source(target, r.matrix, r.registry);
            r.plans.push_back(to_json(plan));
            r.plan_tables.push_back(format_table("transfer sources for " + plan.target, plan.ranked_sources, "similarity"));
        }
        for (const auto& req : cfg.plans.curricula) {
            std::vector<std::optional<std::uint64_t>> seeds;
            if (req.seeds.empty()) seeds.push_back(std::nullopt);
            for (const auto s : req.seeds) seeds.push_back(s);
            for (const auto& seed : seeds) {
                const auto plan = curriculum_order(req.base, req.languages, r.matrix, r.registry, req.policy, seed);
                r.plans.push_back(to_json(plan));
                std::vector<RankedLanguage> rows;
                for (const auto& s : plan.stages) rows.push_back({s.language, s.similarity_to_base});
                r.plan_tables.push_back(format_table("curriculum (" + std::string(to_string(plan.policy)) + ") from " +
                                                         plan.base,
                                                     rows, "similarity"));
            }
        }
        for (const auto& req : cfg.plans.pivots) {
            const auto ranking = rank_pivots(req.source, req.targets, r.matrix, r.registry, req.scoring);
            r.plans.push_back(to_json(ranking));
            r.plan_tables.push_back(format_table("pivots (" + std::string(to_string(ranking.scoring)) + ") for " +
                                                     ranking.source,
                                                 ranking.ranked_pivots, "score"));
        }
        return 0;
    });

    detail::stage("write", [&] {
        namespace fs = std::filesystem;
        const auto out = cfg.output_dir;
        const auto staging = out / ".staging";
        fs::remove_all(staging);
        fs::create_directories(staging);
        const auto& cl = r.clustering;
        std::map<std::string, std::string> files;
        files["matrix.csv"] = to_csv(r.matrix, digest);
        files["matrix.json"] = to_json(r.matrix, &r.stats, digest).dump(2) + "\n";
        auto emb = to_json(r.embeddings);
        emb["manifest"] = digest;
        files["embeddings.json"] = emb.dump() + "\n";
        files["dendrogram.nwk"] = to_tree_text(cl.dendrogram, digest);
        files["dendrogram.dot"] = to_dot(cl.dendrogram, &cl.result.partition, digest);
        files["dendrogram.svg"] = render_dendrogram_svg(cl.dendrogram, &cl.result.partition, digest);
        auto part = partition_json(cl.result.partition, digest);
        if (cl.result.silhouette) part["silhouette"] = *cl.result.silhouette;
        files["partition.json"] = part.dump(2) + "\n";
        files["heatmap.svg"] = render_heatmap_svg(r.matrix, &r.registry, digest);
        if (!r.plans.empty()) {
            nlohmann::json plans{{"manifest", digest}, {"plans", r.plans}};
            files["plans.json"] = plans.dump(2) + "\n";
        }
        files["report.md"] = render_report(r);
        r.manifest.matrix_digest = digest_hex(files["matrix.csv"]);
        r.manifest.finished_at = detail::utc_now();
        files["manifest.json"] = r.manifest.to_json().dump(2) + "\n";
        for (const auto& [name, contents] : files) write_file_atomic(staging / name, contents);
        for (const auto& [name, contents] : files) {
            fs::rename(staging / name, out / name);
            r.artifacts[name] = out / name;
        }
        fs::remove_all(staging);
        return 0;
    });
    return r;
}

}  // namespace langfam
