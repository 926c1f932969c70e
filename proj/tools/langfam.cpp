// langfam: command-line front end for the language-family toolkit.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "langfam/langfam.hpp"
#include "langfam/remote_provider.hpp"

namespace fs = std::filesystem;
using namespace langfam;
using nlohmann::json;

namespace {

constexpr const char* env_help = R"(Environment:
  LANGFAM_EMBED_ENDPOINT  base URL of an OpenAI-compatible embeddings service (provider "openai")
  LANGFAM_API_KEY         bearer token for that service
  LANGFAM_EMBED_MODEL     model name sent with each request
  LANGFAM_EMBED_DIM       embedding dimension the model returns
  LANGFAM_CACHE_DIR       directory for embedding caches when --cache is not given

Exit codes: 0 success, 1 usage or other error, 2 validation failure,
3 provider failure, 4 internal invariant violation.)";

struct Common {
    std::string registry;
};

LanguageRegistry registry_from(const Common& common) {
    if (common.registry.empty()) return default_registry();
    const auto text = read_file(common.registry);
    return load_registry(std::string_view(text));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

void write_or_print(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-") {
        std::cout << contents;
    } else {
        write_file_atomic(path, contents);
    }
}

fs::path default_cache_path(const ProviderIdentity& id) {
    const char* dir = std::getenv("LANGFAM_CACHE_DIR");
    if (dir == nullptr || *dir == '\0') return {};
    std::string name = id.key();
    for (auto& c : name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    }
    return fs::path(dir) / (name + ".bin");
}

/// Serves vectors from a cache only; a miss is a configuration error.
class CacheOnlyProvider final : public EmbeddingProvider {
public:
    explicit CacheOnlyProvider(const EmbeddingCache& cache) : cache_(cache) {}
    ProviderIdentity identity() const override { return cache_.identity(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            const auto* hit = cache_.find(digest_hex(t));
            if (hit == nullptr)
                throw Error(ErrorCode::InvalidConfig, "snippet " + digest_hex(t) + " is not in the cache; run `embed` first");
            out.push_back(*hit);
        }
        return out;
    }

private:
    const EmbeddingCache& cache_;
};

Corpus load_corpus(const std::string& path, const LanguageRegistry& registry) {
    return ingest_corpus_file(path, registry, IngestPolicy::Strict).corpus;
}

EmbeddingRun load_embeddings(const std::string& path, const std::string& corpus_path, const LanguageRegistry& registry,
                             Aggregation aggregation) {
    if (EmbeddingCache::looks_like_cache(path)) {
        if (corpus_path.empty())
            throw Error(ErrorCode::InvalidConfig, "--corpus is required when --embeddings is a cache file");
        const auto cache = EmbeddingCache::load(path);
        CacheOnlyProvider provider(cache);
        return build_language_embeddings(load_corpus(corpus_path, registry), provider, registry, nullptr, {},
                                         aggregation);
    }
    return embedding_run_from_json(json::parse(read_file(path)));
}

SimilarityMatrix load_matrix(const std::string& path) { return matrix_from_csv(read_file(path)); }

void print_table(const std::string& title, const std::vector<RankedLanguage>& rows, const std::string& header) {
    std::cout << format_table(title, rows, header);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discover programming-language families from feature-aligned code corpora."};
    app.footer(env_help);
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version));
    Common common;
    app.add_option("--registry", common.registry, "registry JSON (default: built-in 19 languages + English)")
        ->check(CLI::ExistingFile);

    // corpus ---------------------------------------------------------------
    auto* corpus_cmd = app.add_subcommand("corpus", "prompt rendering, validation and statistics");
    corpus_cmd->require_subcommand(1);

    std::string prompt_feature = "all";
    std::size_t per_cell = 100;
    bool include_reference = false;
    auto* prompts = corpus_cmd->add_subcommand("render-prompts", "print generation prompts");
    prompts->add_option("--feature", prompt_feature, "feature id or 'all'");
    prompts->add_option("--per-cell", per_cell, "snippets per language")->check(CLI::PositiveNumber);
    prompts->add_flag("--reference", include_reference, "also print prompts for the reference language");

    std::string corpus_path;
    std::size_t expect = 100;
    double dup_threshold = default_duplicate_threshold;
    std::string report_json;
    bool lenient = false;
    auto* validate = corpus_cmd->add_subcommand("validate", "check per-cell counts");
    validate->add_option("--corpus", corpus_path, "JSONL corpus")->required()->check(CLI::ExistingFile);
    validate->add_option("--expect", expect, "samples expected per cell");
    validate->add_option("--dup-threshold", dup_threshold, "per-cell duplicate rate that triggers a warning");
    validate->add_option("--json", report_json, "write the manifest and violations as JSON");
    validate->add_flag("--lenient", lenient, "skip malformed records instead of failing");

    auto* stats_cmd = corpus_cmd->add_subcommand("stats", "per-language and per-feature counts");
    stats_cmd->add_option("--corpus", corpus_path, "JSONL corpus")->required()->check(CLI::ExistingFile);

    std::string synth_out;
    synthetic::PlantedCorpusOptions synth;
    auto* synth_cmd = corpus_cmd->add_subcommand("synth", "write a synthetic corpus with six planted families");
    synth_cmd->add_option("--out", synth_out, "output JSONL")->required();
    synth_cmd->add_option("--per-cell", synth.samples_per_cell, "snippets per cell");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");

    // embed ----------------------------------------------------------------
    std::string provider_name = "local";
    std::size_t dim = LocalNgramEmbedder::default_dim;
    std::uint64_t embed_seed = LocalNgramEmbedder::default_seed;
    std::string cache_path;
    std::string embeddings_out;
    std::string aggregation = "mean";
    EmbedOptions embed_options;
    auto* embed_cmd = app.add_subcommand("embed", "embed a corpus into per-language vectors");
    embed_cmd->add_option("--corpus", corpus_path, "JSONL corpus")->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("--provider", provider_name, "local | openai")->check(CLI::IsMember({"local", "openai"}));
    embed_cmd->add_option("--dim", dim, "dimension (local provider)");
    embed_cmd->add_option("--seed", embed_seed, "hash seed (local provider)");
    embed_cmd->add_option("--cache", cache_path, "embedding cache file (default: $LANGFAM_CACHE_DIR/<provider>.bin)");
    embed_cmd->add_option("--batch-size", embed_options.batch_size, "texts per provider call");
    embed_cmd->add_option("--max-in-flight", embed_options.max_in_flight, "concurrent provider calls");
    embed_cmd->add_option("--aggregation", aggregation, "mean | concat")->check(CLI::IsMember({"mean", "concat"}));
    embed_cmd->add_option("--out", embeddings_out, "language embeddings JSON")->required();

    // similarity -----------------------------------------------------------
    std::string embeddings_in;
    std::string matrix_out;
    std::string matrix_json;
    auto* sim_cmd = app.add_subcommand("similarity", "pairwise normalized cosine similarity");
    sim_cmd->add_option("--embeddings", embeddings_in, "embeddings JSON or cache file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--corpus", corpus_path, "corpus (needed with a cache file)");
    sim_cmd->add_option("--aggregation", aggregation, "mean | concat (cache input)");
    sim_cmd->add_option("--out", matrix_out, "matrix CSV")->required();
    sim_cmd->add_option("--json", matrix_json, "matrix and statistics JSON");

    // cluster --------------------------------------------------------------
    std::string matrix_in;
    std::optional<std::size_t> forced_k;
    std::vector<std::size_t> elbow_range;
    std::string dissim = "one-minus-sim";
    std::string out_dir;
    bool cluster_reference = false;
    auto* cluster_cmd = app.add_subcommand("cluster", "Ward clustering with elbow selection");
    cluster_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    auto* k_opt = cluster_cmd->add_option("--k", forced_k, "force the number of clusters");
    cluster_cmd->add_option("--elbow", elbow_range, "elbow search range kmin kmax")->expected(2)->excludes(k_opt);
    cluster_cmd->add_option("--dissim", dissim, "one-minus-sim | euclidean")
        ->check(CLI::IsMember({"one-minus-sim", "euclidean"}));
    cluster_cmd->add_option("--embeddings", embeddings_in, "embeddings JSON (euclidean mode)");
    cluster_cmd->add_flag("--include-reference", cluster_reference, "cluster the reference language too");
    cluster_cmd->add_option("--out-dir", out_dir, "write dendrogram and partition files here");

    // plan -----------------------------------------------------------------
    auto* plan_cmd = app.add_subcommand("plan", "training plans from a similarity matrix");
    plan_cmd->require_subcommand(1);
    std::string plan_json;
    std::string target;
    auto* transfer_cmd = plan_cmd->add_subcommand("transfer", "pick a high-resource source for a target");
    transfer_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    transfer_cmd->add_option("--target", target, "low-resource target")->required();
    transfer_cmd->add_option("--json", plan_json, "write the plan JSON here ('-' for stdout)");

    std::string base;
    std::string policy = "near-to-far";
    std::optional<std::uint64_t> plan_seed;
    std::string languages;
    auto* curriculum_cmd = plan_cmd->add_subcommand("curriculum", "order languages by similarity to a base");
    curriculum_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    curriculum_cmd->add_option("--base", base, "base language")->required();
    curriculum_cmd->add_option("--policy", policy, "near-to-far | far-to-near | random");
    curriculum_cmd->add_option("--seed", plan_seed, "seed (random policy)");
    curriculum_cmd->add_option("--languages", languages, "comma-separated subset (default: all others)");
    curriculum_cmd->add_option("--json", plan_json, "write the plan JSON here ('-' for stdout)");

    std::string source;
    std::string targets;
    std::string scoring = "centrality";
    auto* pivots_cmd = plan_cmd->add_subcommand("pivots", "rank intermediary languages for translation");
    pivots_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    pivots_cmd->add_option("--source", source, "source language")->required();
    pivots_cmd->add_option("--targets", targets, "comma-separated targets");
    pivots_cmd->add_option("--scoring", scoring, "centrality | target-mean | betweenness");
    pivots_cmd->add_option("--json", plan_json, "write the plan JSON here ('-' for stdout)");

    // run ------------------------------------------------------------------
    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "validate, embed, compare, cluster and plan in one go");
    run_cmd->add_option("--config", config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    run_cmd->add_option("--corpus", corpus_path, "overrides 'corpus'");
    run_cmd->add_option("--embeddings", embeddings_in, "overrides 'embeddings'");
    run_cmd->add_option("--expect", expect, "overrides 'expected_per_cell'");
    run_cmd->add_option("--provider", provider_name, "overrides provider.name");
    run_cmd->add_option("--dim", dim, "overrides provider.dim");
    run_cmd->add_option("--cache", cache_path, "overrides 'cache'");
    run_cmd->add_option("--batch-size", embed_options.batch_size, "overrides 'batch_size'");
    auto* run_k = run_cmd->add_option("--k", forced_k, "overrides clustering.k");
    run_cmd->add_option("--elbow", elbow_range, "overrides clustering.k_min/k_max")->expected(2)->excludes(run_k);
    run_cmd->add_option("--dissim", dissim, "overrides clustering.dissimilarity");
    run_cmd->add_option("--out-dir", out_dir, "overrides 'output_dir'");

    // report ---------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "render figures from existing artifacts");
    report_cmd->require_subcommand(1);
    std::string figure_out;
    auto* heatmap_cmd = report_cmd->add_subcommand("heatmap", "similarity heatmap (SVG)");
    heatmap_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    heatmap_cmd->add_option("--out", figure_out, "output SVG")->required();
    std::string format = "svg";
    auto* dendro_cmd = report_cmd->add_subcommand("dendrogram", "cluster the matrix and render the tree");
    dendro_cmd->add_option("--matrix", matrix_in, "matrix CSV")->required()->check(CLI::ExistingFile);
    dendro_cmd->add_option("--format", format, "svg | tree-text | dot | json");
    dendro_cmd->add_option("--k", forced_k, "force the number of clusters for coloring");
    dendro_cmd->add_option("--out", figure_out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto registry = registry_from(common);

        if (prompts->parsed()) {
            std::vector<LanguageId> programming;
            for (const auto& l : registry.languages())
                if (!l.is_reference) programming.push_back(l);
            std::vector<LinguisticFeature> features;
            if (prompt_feature == "all") {
                features.assign(registry.features().begin(), registry.features().end());
            } else {
                features.push_back(find_feature(prompt_feature));
            }
            for (std::size_t i = 0; i < features.size(); ++i) {
                if (i > 0) std::cout << "\n";
                std::cout << render_generation_prompt(features[i], programming, per_cell);
                if (include_reference && registry.reference() != nullptr)
                    std::cout << "\n" << render_reference_prompt(features[i], *registry.reference(), per_cell);
            }
            return 0;
        }

        if (validate->parsed()) {
            const auto report = ingest_corpus_file(corpus_path, registry, lenient ? IngestPolicy::Lenient : IngestPolicy::Strict);
            for (const auto& issue : report.issues) std::cerr << "skipped: " << issue.message << "\n";
            const auto result = validate_corpus(report.corpus, registry, expect, dup_threshold);
            std::cout << "samples: " << result.manifest.total << " (" << result.manifest.programming_total
                      << " programming-language)\n";
            std::cout << "cells: " << result.manifest.cells.size() << ", violations: " << result.violations.size()
                      << "\n";
            for (const auto& v : result.violations)
                std::cout << "  " << to_string(v.kind) << " " << v.cell.language << "/" << v.cell.feature << ": "
                          << v.count << " of " << v.expected << "\n";
            for (const auto& w : result.duplicate_warnings)
                std::cout << "  warning: duplicate rate " << format_fixed(w.duplicate_rate, 3) << " in "
                          << w.cell.language << "/" << w.cell.feature << "\n";
            if (!report_json.empty()) {
                json doc{{"total", result.manifest.total},
                         {"programming_total", result.manifest.programming_total},
                         {"duplicate_rate", result.manifest.duplicate_rate},
                         {"corpus_digest", report.corpus.digest()},
                         {"violations", json::array()},
                         {"duplicate_warnings", json::array()}};
                for (const auto& v : result.violations)
                    doc["violations"].push_back({{"language", v.cell.language}, {"feature", v.cell.feature},
                                                 {"kind", std::string(to_string(v.kind))}, {"count", v.count},
                                                 {"expected", v.expected}});
                for (const auto& w : result.duplicate_warnings)
                    doc["duplicate_warnings"].push_back(
                        {{"language", w.cell.language}, {"feature", w.cell.feature}, {"rate", w.duplicate_rate}});
                write_or_print(report_json, doc.dump(2) + "\n");
            }
            return result.passed() && report.issues.empty() ? 0 : 2;
        }

        if (stats_cmd->parsed()) {
            const auto corpus = load_corpus(corpus_path, registry);
            const auto stats = corpus_stats(corpus, registry);
            std::cout << "total " << stats.total << "\n\nper language\n";
            for (const auto& [name, n] : stats.per_language) std::cout << "  " << name << " " << n << "\n";
            std::cout << "\nper feature\n";
            for (const auto& [id, n] : stats.per_feature) std::cout << "  " << id << " " << n << "\n";
            std::cout << "\nlength (bytes): min " << stats.length_bytes.min << ", median " << stats.length_bytes.median
                      << ", mean " << format_fixed(stats.length_bytes.mean, 1) << ", p90 " << stats.length_bytes.p90
                      << ", max " << stats.length_bytes.max << "\n";
            return 0;
        }

        if (synth_cmd->parsed()) {
            std::string out;
            for (const auto& line : synthetic::planted_corpus_lines(registry, synthetic::default_families(), synth))
                out += line + "\n";
            write_file_atomic(synth_out, out);
            return 0;
        }

        if (embed_cmd->parsed()) {
            json provider_cfg{{"name", provider_name}};
            if (provider_name == "local") {
                provider_cfg["dim"] = dim;
                provider_cfg["seed"] = embed_seed;
            }
            auto provider = make_provider(provider_cfg);
            fs::path cache_file = cache_path.empty() ? default_cache_path(provider->identity()) : fs::path(cache_path);
            std::optional<EmbeddingCache> cache;
            if (!cache_file.empty()) {
                if (cache_file.has_parent_path()) fs::create_directories(cache_file.parent_path());
                cache = EmbeddingCache::open(cache_file, provider->identity());
            }
            const auto corpus = load_corpus(corpus_path, registry);
            std::optional<EmbeddingRun> run;
            try {
                run = build_language_embeddings(corpus, *provider, registry, cache ? &*cache : nullptr, embed_options,
                                                parse_aggregation(aggregation));
            } catch (const Error&) {
                if (cache) cache->flush(cache_file);  // keep what succeeded
                throw;
            }
            if (cache) cache->flush(cache_file);
            write_file_atomic(embeddings_out, to_json(*run).dump() + "\n");
            std::cerr << "embedded " << corpus.size() << " samples: " << run->stats.requested_texts << " requested, "
                      << run->stats.cache_hits << " cached, " << run->stats.provider_calls << " provider calls\n";
            for (const auto& note : run->notes) std::cerr << "note: " << note << "\n";
            return 0;
        }

        if (sim_cmd->parsed()) {
            const auto run = load_embeddings(embeddings_in, corpus_path, registry, parse_aggregation(aggregation));
            const auto matrix = build_similarity_matrix(run.languages, run.provider.key());
            const auto digest = digest_hex(to_json(run).dump());
            write_file_atomic(matrix_out, to_csv(matrix, digest));
            SimilarityStats stats = similarity_stats(matrix, registry);
            if (!matrix_json.empty()) write_or_print(matrix_json, to_json(matrix, &stats, digest).dump(2) + "\n");
            std::vector<RankedLanguage> rows;
            for (const auto& [name, mean] : stats.mean_similarity) rows.push_back({name, mean});
            detail::sort_by_score(rows, registry);
            print_table("mean similarity (centroid: " + stats.centroid_language + ")", rows, "mean");
            if (stats.reference_mean)
                std::cout << "mean similarity to the reference language: " << format_fixed(*stats.reference_mean, 3) << "\n";
            return 0;
        }

        if (cluster_cmd->parsed() || dendro_cmd->parsed()) {
            const auto matrix = load_matrix(matrix_in);
            std::vector<std::string> names;
            for (const auto& n : matrix.languages()) {
                const auto idx = registry.index_of(n);
                if (cluster_reference || !idx || !registry.languages()[*idx].is_reference) names.push_back(n);
            }
            ClusterOptions options;
            options.dissimilarity = parse_dissimilarity(dissim);
            options.k = forced_k;
            if (elbow_range.size() == 2) {
                options.k_min = elbow_range[0];
                options.k_max = elbow_range[1];
            }
            std::vector<LanguageEmbedding> embeddings;
            if (options.dissimilarity == DissimilaritySource::EuclideanOnEmbeddings) {
                if (embeddings_in.empty())
                    throw Error(ErrorCode::InvalidConfig, "--dissim euclidean needs --embeddings");
                embeddings = embedding_run_from_json(json::parse(read_file(embeddings_in))).languages;
            }
            const auto digest = digest_hex(read_file(matrix_in));
            const auto outcome = cluster_languages(matrix.subset(names), options, embeddings);
            const auto& res = outcome.result;
            if (dendro_cmd->parsed()) {
                emit_dendrogram(outcome.dendrogram, &res.partition, figure_out, format, digest);
                return 0;
            }
            std::cout << "k = " << res.k << (res.elbow ? " (elbow)" : " (forced)");
            if (res.silhouette) std::cout << ", silhouette = " << format_fixed(*res.silhouette, 4);
            std::cout << "\n";
            for (std::size_t c = 0; c < res.per_cluster.size(); ++c) {
                std::cout << "  cluster " << c << ":";
                for (const auto& m : res.per_cluster[c]) std::cout << " " << m;
                std::cout << "\n";
            }
            if (res.elbow) {
                std::cout << "\n  k   W(k)        knee\n";
                for (const auto& [k, w] : res.elbow->dispersion) {
                    std::cout << "  " << k << (k < 10 ? "   " : "  ") << format_fixed(w, 6);
                    if (const auto it = res.elbow->knee_score.find(k); it != res.elbow->knee_score.end())
                        std::cout << "    " << format_fixed(it->second, 6);
                    std::cout << "\n";
                }
            }
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                const fs::path dir(out_dir);
                emit_dendrogram(outcome.dendrogram, &res.partition, dir / "dendrogram.nwk", DendrogramFormat::TreeText, digest);
                emit_dendrogram(outcome.dendrogram, &res.partition, dir / "dendrogram.dot", DendrogramFormat::Dot, digest);
                emit_dendrogram(outcome.dendrogram, &res.partition, dir / "dendrogram.svg", DendrogramFormat::Svg, digest);
                auto part = partition_json(res.partition, digest);
                if (res.silhouette) part["silhouette"] = *res.silhouette;
                write_file_atomic(dir / "partition.json", part.dump(2) + "\n");
            }
            return 0;
        }

        if (transfer_cmd->parsed()) {
            const auto plan = recommend_transfer_source(target, load_matrix(matrix_in), registry);
            print_table("transfer sources for " + plan.target + " (chosen: " + plan.chosen + ")", plan.ranked_sources,
                        "similarity");
            if (!plan_json.empty()) write_or_print(plan_json, to_json(plan).dump(2) + "\n");
            return 0;
        }

        if (curriculum_cmd->parsed()) {
            const auto list = split_list(languages);
            const auto plan = curriculum_order(base, list, load_matrix(matrix_in), registry, parse_policy(policy), plan_seed);
            std::vector<RankedLanguage> rows;
            for (const auto& s : plan.stages) rows.push_back({s.language, s.similarity_to_base});
            print_table("curriculum (" + std::string(to_string(plan.policy)) + ") from " + plan.base, rows,
                        "similarity");
            if (!plan_json.empty()) write_or_print(plan_json, to_json(plan).dump(2) + "\n");
            return 0;
        }

        if (pivots_cmd->parsed()) {
            const auto list = split_list(targets);
            const auto ranking = rank_pivots(source, list, load_matrix(matrix_in), registry, parse_scoring(scoring));
            print_table("pivots (" + std::string(to_string(ranking.scoring)) + ") for " + ranking.source,
                        ranking.ranked_pivots, "score");
            if (!plan_json.empty()) write_or_print(plan_json, to_json(ranking).dump(2) + "\n");
            return 0;
        }

        if (run_cmd->parsed()) {
            json doc = config_path.empty() ? json::object() : json::parse(read_file(config_path));
            const auto base_dir = config_path.empty() ? fs::path() : fs::path(config_path).parent_path();
            auto cfg_doc = doc;
            // Flags are relative to the working directory, config keys to the config file.
            if (!corpus_path.empty()) cfg_doc["corpus"] = fs::absolute(corpus_path).string();
            if (!embeddings_in.empty()) cfg_doc["embeddings"] = fs::absolute(embeddings_in).string();
            if (!cache_path.empty()) cfg_doc["cache"] = fs::absolute(cache_path).string();
            if (!out_dir.empty()) cfg_doc["output_dir"] = fs::absolute(out_dir).string();
            if (!common.registry.empty()) cfg_doc["registry"] = fs::absolute(common.registry).string();
            if (run_cmd->count("--expect") > 0) cfg_doc["expected_per_cell"] = expect;
            if (run_cmd->count("--batch-size") > 0) cfg_doc["batch_size"] = embed_options.batch_size;
            if (run_cmd->count("--provider") > 0) cfg_doc["provider"]["name"] = provider_name;
            if (run_cmd->count("--dim") > 0) cfg_doc["provider"]["dim"] = dim;
            if (forced_k) cfg_doc["clustering"]["k"] = *forced_k;
            if (elbow_range.size() == 2) {
                cfg_doc["clustering"]["k_min"] = elbow_range[0];
                cfg_doc["clustering"]["k_max"] = elbow_range[1];
            }
            if (run_cmd->count("--dissim") > 0) cfg_doc["clustering"]["dissimilarity"] = dissim;
            const auto cfg = load_pipeline_config(cfg_doc, base_dir);
            const auto result = run_pipeline(cfg, make_provider);
            std::cout << "k = " << result.clustering.result.k;
            if (result.clustering.result.silhouette)
                std::cout << ", silhouette = " << format_fixed(*result.clustering.result.silhouette, 4);
            if (result.adjusted_rand) std::cout << ", ARI = " << format_fixed(*result.adjusted_rand, 4);
            std::cout << ", centroid = " << result.stats.centroid_language << "\n";
            for (const auto& [name, path] : result.artifacts) std::cout << "  wrote " << path.string() << "\n";
            for (const auto& table : result.plan_tables) std::cout << "\n" << table;
            return 0;
        }

        if (heatmap_cmd->parsed()) {
            const auto digest = digest_hex(read_file(matrix_in));
            emit_heatmap(load_matrix(matrix_in), &registry, figure_out, digest);
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const json::exception& e) {
        std::cerr << "error: invalid JSON: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
