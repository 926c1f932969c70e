#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "langfam/langfam.hpp"

namespace fs = std::filesystem;
using namespace langfam;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("langfam_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_planted_corpus(const fs::path& dir, std::size_t per_cell = 3) {
    synthetic::PlantedCorpusOptions options;
    options.samples_per_cell = per_cell;
    std::string text;
    for (const auto& line : synthetic::planted_corpus_lines(default_registry(), synthetic::default_families(), options))
        text += line + "\n";
    const auto path = dir / "corpus.jsonl";
    write_file_atomic(path, text);
    return path;
}

PipelineConfig planted_config(const fs::path& dir) {
    PipelineConfig cfg;
    cfg.corpus = write_planted_corpus(dir);
    cfg.expected_per_cell = 3;
    cfg.provider = {{"name", "local"}, {"dim", 256}};
    cfg.expected_partition = synthetic::family_labels(synthetic::default_families());
    cfg.plans.transfer_targets = {"Kotlin"};
    cfg.plans.curricula.push_back({"English", {"Go", "Python", "Haskell"}, CurriculumPolicy::NearToFar, {}});
    cfg.plans.pivots.push_back({"Python", {"C++"}, PivotScoring::Centrality});
    cfg.output_dir = dir / "out";
    return cfg;
}

int run_cli(const std::string& args) {
    const auto status = std::system((std::string(LANGFAM_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, PlantedCorpusEndToEnd) {
    const auto dir = scratch("planted");
    const auto result = run_pipeline(planted_config(dir));
    EXPECT_EQ(result.clustering.result.k, 6u);
    ASSERT_TRUE(result.adjusted_rand.has_value());
    EXPECT_DOUBLE_EQ(*result.adjusted_rand, 1.0);
    EXPECT_EQ(result.matrix.size(), 20u);
    EXPECT_EQ(result.clustering.dendrogram.leaves.size(), 19u);
    for (const char* name : {"matrix.csv", "matrix.json", "embeddings.json", "dendrogram.nwk", "dendrogram.dot",
                             "dendrogram.svg", "partition.json", "heatmap.svg", "plans.json", "report.md",
                             "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / "out" / name)) << name;
    }
    EXPECT_FALSE(fs::exists(dir / "out" / ".staging"));
    const auto digest = result.manifest.digest();
    for (const auto& [name, path] : result.artifacts)
        EXPECT_NE(read_file(path).find(digest), std::string::npos) << name;
    const auto report = read_file(dir / "out" / "report.md");
    EXPECT_NE(report.find("k = 6 (elbow)"), std::string::npos);
    EXPECT_NE(report.find("adjusted Rand index vs expected partition = 1.0000"), std::string::npos);
    const auto plans = nlohmann::json::parse(read_file(dir / "out" / "plans.json"));
    EXPECT_EQ(plans["plans"].size(), 3u);
    const auto manifest = nlohmann::json::parse(read_file(dir / "out" / "manifest.json"));
    EXPECT_EQ(manifest["digest"], digest);
    EXPECT_FALSE(manifest["started_at"].get<std::string>().empty());
}

TEST(Pipeline, RerunIsByteIdentical) {
    const auto dir = scratch("rerun");
    auto cfg = planted_config(dir);
    cfg.cache = dir / "cache.bin";
    (void)run_pipeline(cfg);
    std::map<std::string, std::string> first;
    for (const auto& entry : fs::directory_iterator(dir / "out")) first[entry.path().filename()] = read_file(entry.path());
    const auto second = run_pipeline(cfg);
    EXPECT_GT(second.embeddings.stats.cache_hits, 0u);
    EXPECT_EQ(second.embeddings.stats.requested_texts, 0u);
    for (const auto& [name, contents] : first) {
        if (name == "manifest.json") continue;
        EXPECT_EQ(read_file(dir / "out" / name), contents) << name;
    }
}

TEST(Pipeline, ValidationFailureNamesCellsAndWritesNothing) {
    const auto dir = scratch("invalid");
    auto cfg = planted_config(dir);
    cfg.expected_per_cell = 4;
    try {
        (void)run_pipeline(cfg);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "validate");
        EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
        EXPECT_NE(std::string(e.what()).find("C++/F1 (3/4)"), std::string::npos);
        EXPECT_EQ(exit_code_for(e.code()), 2);
    }
    EXPECT_FALSE(fs::exists(dir / "out" / "matrix.csv"));
}

TEST(Pipeline, ProviderFailureCarriesStage) {
    const auto dir = scratch("provider");
    auto cfg = planted_config(dir);
    cfg.provider = {{"name", "nonexistent"}};
    try {
        (void)run_pipeline(cfg);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "embed");
    }
}

TEST(Pipeline, EmbeddingsInputSkipsCorpus) {
    const auto dir = scratch("embeddings");
    const auto first = run_pipeline(planted_config(dir));
    PipelineConfig cfg;
    cfg.embeddings = dir / "out" / "embeddings.json";
    cfg.output_dir = dir / "out2";
    cfg.clustering.k = 6;
    const auto second = run_pipeline(cfg);
    EXPECT_EQ(second.clustering.result.partition, first.clustering.result.partition);
    EXPECT_FALSE(second.clustering.result.elbow.has_value());
}

TEST(Pipeline, ConfigLoader) {
    const auto cfg = load_pipeline_config(nlohmann::json::parse(R"({
        "corpus": "c.jsonl", "expected_per_cell": 5, "cache": "/abs/cache.bin",
        "clustering": {"dissimilarity": "euclidean", "k": 4, "include_reference": true},
        "plans": {"transfer": ["Kotlin"], "curriculum": [{"base": "English", "policy": "random", "seeds": [1, 2]}],
                  "pivots": [{"source": "Python", "targets": ["Go"], "scoring": "betweenness"}]},
        "output_dir": "o"})"),
                                          "/base");
    EXPECT_EQ(*cfg.corpus, fs::path("/base/c.jsonl"));
    EXPECT_EQ(*cfg.cache, fs::path("/abs/cache.bin"));
    EXPECT_EQ(cfg.output_dir, fs::path("/base/o"));
    EXPECT_EQ(cfg.expected_per_cell, 5u);
    EXPECT_EQ(cfg.clustering.dissimilarity, DissimilaritySource::EuclideanOnEmbeddings);
    EXPECT_EQ(*cfg.clustering.k, 4u);
    EXPECT_TRUE(cfg.cluster_reference);
    EXPECT_EQ(cfg.plans.curricula[0].seeds.size(), 2u);
    EXPECT_EQ(cfg.plans.pivots[0].scoring, PivotScoring::Betweenness);
    EXPECT_THROW(load_pipeline_config(nlohmann::json::parse("{}")), Error);
    EXPECT_THROW(load_pipeline_config(nlohmann::json::parse(R"({"corpus": 3})")), Error);
}

TEST(Pipeline, ExitCodes) {
    EXPECT_EQ(exit_code_for(ErrorCode::ValidationFailed), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::ProviderUnavailable), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::PartialFailure), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::InvariantViolation), 4);
    EXPECT_EQ(exit_code_for(ErrorCode::InvalidK), 1);
}

TEST(Cli, SubcommandsAndExitCodes) {
    const auto dir = scratch("cli");
    const auto d = dir.string();
    ASSERT_EQ(run_cli("corpus synth --out " + d + "/c.jsonl --per-cell 2"), 0);
    EXPECT_EQ(run_cli("corpus validate --corpus " + d + "/c.jsonl --expect 2"), 0);
    EXPECT_EQ(run_cli("corpus validate --corpus " + d + "/c.jsonl --expect 3"), 2);
    EXPECT_EQ(run_cli("corpus stats --corpus " + d + "/c.jsonl"), 0);
    EXPECT_EQ(run_cli("corpus render-prompts --feature F3 --per-cell 5"), 0);
    ASSERT_EQ(run_cli("embed --corpus " + d + "/c.jsonl --cache " + d + "/cache.bin --out " + d + "/emb.json"), 0);
    ASSERT_EQ(run_cli("similarity --embeddings " + d + "/emb.json --out " + d + "/m.csv --json " + d + "/m.json"), 0);
    EXPECT_EQ(run_cli("similarity --embeddings " + d + "/cache.bin --corpus " + d + "/c.jsonl --out " + d + "/m2.csv"), 0);
    EXPECT_EQ(read_file(dir / "m.csv").substr(read_file(dir / "m.csv").find("\nlanguage")),
              read_file(dir / "m2.csv").substr(read_file(dir / "m2.csv").find("\nlanguage")));
    EXPECT_EQ(run_cli("cluster --matrix " + d + "/m.csv --out-dir " + d + "/cl"), 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(dir / "cl" / "partition.json"))["k"], 6);
    EXPECT_EQ(run_cli("cluster --matrix " + d + "/m.csv --elbow 3 3"), 1);
    EXPECT_EQ(run_cli("cluster --matrix " + d + "/m.csv --k 4 --dissim euclidean --embeddings " + d + "/emb.json"), 0);
    EXPECT_EQ(run_cli("plan transfer --matrix " + d + "/m.csv --target Kotlin --json " + d + "/t.json"), 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(dir / "t.json"))["kind"], "transfer");
    EXPECT_EQ(run_cli("plan curriculum --matrix " + d + "/m.csv --base English --policy random"), 1);
    EXPECT_EQ(run_cli("plan curriculum --matrix " + d + "/m.csv --base English --policy random --seed 3"), 0);
    EXPECT_EQ(run_cli("plan pivots --matrix " + d + "/m.csv --source Python --targets C++,Go"), 0);
    EXPECT_EQ(run_cli("report heatmap --matrix " + d + "/m.csv --out " + d + "/h.svg"), 0);
    EXPECT_EQ(run_cli("report dendrogram --matrix " + d + "/m.csv --format dot --out " + d + "/t.dot"), 0);
    EXPECT_EQ(run_cli("report dendrogram --matrix " + d + "/m.csv --format png --out " + d + "/t.png"), 1);
    EXPECT_EQ(run_cli("run --corpus " + d + "/c.jsonl --expect 2 --out-dir " + d + "/run"), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "report.md"));
    EXPECT_EQ(run_cli("run --corpus " + d + "/c.jsonl --expect 5 --out-dir " + d + "/run2"), 2);
    EXPECT_EQ(run_cli("run --corpus " + d + "/c.jsonl --expect 2 --provider openai --out-dir " + d + "/run3"), 1);
    EXPECT_EQ(run_cli("bogus"), 1);
    EXPECT_EQ(run_cli("--help"), 0);
}
