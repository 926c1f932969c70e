#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "langfam/embedding.hpp"
#include "langfam/error.hpp"

namespace langfam {

/// Settings for an OpenAI-compatible `POST {endpoint}/v1/embeddings` service.
/// https endpoints need CPPHTTPLIB_OPENSSL_SUPPORT defined before httplib.h.
struct RemoteProviderConfig {
    std::string endpoint;  // scheme://host[:port], optional path prefix
    std::string api_key;
    std::string model;
    std::size_t dim = 0;  // required; every response is checked against it
    int timeout_seconds = 60;

    /// LANGFAM_EMBED_ENDPOINT, LANGFAM_API_KEY, LANGFAM_EMBED_MODEL, LANGFAM_EMBED_DIM.
    /// Explicit values in `overrides` win over the environment.
    static RemoteProviderConfig from_env(const nlohmann::json& overrides = nlohmann::json::object()) {
        auto env = [](const char* name) -> std::string {
            const char* v = std::getenv(name);
            return v ? std::string(v) : std::string();
        };
        RemoteProviderConfig cfg;
        cfg.endpoint = overrides.value("endpoint", env("LANGFAM_EMBED_ENDPOINT"));
        cfg.api_key = overrides.value("api_key", env("LANGFAM_API_KEY"));
        cfg.model = overrides.value("model", env("LANGFAM_EMBED_MODEL"));
        if (overrides.contains("dim")) {
            cfg.dim = overrides["dim"].get<std::size_t>();
        } else if (const auto d = env("LANGFAM_EMBED_DIM"); !d.empty()) {
            try {
                cfg.dim = std::stoul(d);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidConfig, "LANGFAM_EMBED_DIM is not a number: " + d);
            }
        }
        cfg.timeout_seconds = overrides.value("timeout_seconds", cfg.timeout_seconds);
        if (cfg.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs an endpoint");
        if (cfg.model.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs a model name");
        if (cfg.dim == 0) throw Error(ErrorCode::InvalidConfig, "remote provider needs a dimension (LANGFAM_EMBED_DIM)");
        return cfg;
    }
};

class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteProviderConfig cfg) : cfg_(std::move(cfg)) {
        const auto scheme_end = cfg_.endpoint.find("://");
        const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto slash = cfg_.endpoint.find('/', host_begin);
        base_ = cfg_.endpoint.substr(0, slash);
        prefix_ = slash == std::string::npos ? std::string() : cfg_.endpoint.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    [[nodiscard]] ProviderIdentity identity() const override { return {"openai-compatible", cfg_.model, cfg_.dim}; }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        if (texts.empty()) return {};
        httplib::Client client(base_);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);
        nlohmann::json body{{"model", cfg_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        auto res = client.Post(prefix_ + "/v1/embeddings", body.dump(), "application/json");
        if (!res) {
            throw Error(ErrorCode::ProviderUnavailable,
                        "request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status == 429 || res->status >= 500)
            throw Error(ErrorCode::ProviderUnavailable, "embedding service returned HTTP " + std::to_string(res->status));
        if (res->status != 200)
            throw Error(ErrorCode::InvalidConfig, "embedding service rejected the request: HTTP " +
                                                      std::to_string(res->status) + " " + res->body.substr(0, 200));
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        try {
            const auto doc = nlohmann::json::parse(res->body);
            const auto& data = doc.at("data");
            if (data.size() != texts.size())
                throw Error(ErrorCode::ProviderUnavailable, "embedding service returned " + std::to_string(data.size()) +
                                                                " vectors for " + std::to_string(texts.size()) + " inputs");
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& item = data[i];
                const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : i;
                if (index >= texts.size() || seen[index])
                    throw Error(ErrorCode::ProviderUnavailable, "embedding service returned a bad index");
                seen[index] = true;
                out[index].values = item.at("embedding").get<std::vector<double>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ProviderUnavailable, std::string("malformed embedding response: ") + e.what());
        }
        return out;
    }

private:
    RemoteProviderConfig cfg_;
    std::string base_;
    std::string prefix_;
};

/// Provider factory covering "local" and "openai" (alias "remote").
inline std::unique_ptr<EmbeddingProvider> make_provider(const nlohmann::json& config) {
    const auto name = config.value("name", std::string("local"));
    if (name == "local") {
        return std::make_unique<LocalNgramEmbedder>(config.value("dim", LocalNgramEmbedder::default_dim),
                                                    config.value("seed", LocalNgramEmbedder::default_seed));
    }
    if (name == "openai" || name == "remote") {
        auto overrides = config;
        overrides.erase("name");
        return std::make_unique<RemoteEmbeddingProvider>(RemoteProviderConfig::from_env(overrides));
    }
    throw Error(ErrorCode::InvalidConfig, "unknown provider '" + name + "'");
}

}  // namespace langfam
