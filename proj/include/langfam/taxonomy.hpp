#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "langfam/error.hpp"
#include "langfam/util.hpp"

namespace langfam {

enum class FeatureGroup {
    Typing,
    ControlFlow,
    IO,
    Operations,
    Libraries,
    Functions,
    Exceptions,
    DataStructures,
    OOP,
    Functional,
};

constexpr std::string_view to_string(FeatureGroup group) noexcept {
    switch (group) {
        case FeatureGroup::Typing: return "typing";
        case FeatureGroup::ControlFlow: return "control-flow";
        case FeatureGroup::IO: return "I/O";
        case FeatureGroup::Operations: return "operations";
        case FeatureGroup::Libraries: return "libraries";
        case FeatureGroup::Functions: return "functions";
        case FeatureGroup::Exceptions: return "exceptions";
        case FeatureGroup::DataStructures: return "data-structures";
        case FeatureGroup::OOP: return "OOP";
        case FeatureGroup::Functional: return "functional";
    }
    return "unknown";
}

struct LinguisticFeature {
    std::string id;  // "F1".."F21"
    std::string name;
    std::string description;
    FeatureGroup group;

    friend bool operator==(const LinguisticFeature&, const LinguisticFeature&) = default;
};

/// Numeric part of a feature id ("F12" -> 12); 0 when the id is not of that shape.
inline int feature_ordinal(std::string_view id) noexcept {
    if (id.size() < 2 || (id[0] != 'F' && id[0] != 'f')) return 0;
    int value = 0;
    for (const char c : id.substr(1)) {
        if (c < '0' || c > '9') return 0;
        value = value * 10 + (c - '0');
        if (value > 1000000) return 0;
    }
    return value;
}

/// Orders feature ids numerically so F2 sorts before F10.
struct FeatureIdLess {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const noexcept {
        const int oa = feature_ordinal(a);
        const int ob = feature_ordinal(b);
        if (oa != ob) return oa < ob;
        return a < b;
    }
};

inline constexpr std::size_t feature_count = 21;

/// The fixed feature catalog. Ranged table rows are expanded one id per sub-construct.
inline const std::vector<LinguisticFeature>& feature_catalog() {
    static const std::vector<LinguisticFeature> catalog = [] {
        const std::string loops = "How does a language implement loop constructs in program control flow?";
        const std::string ops =
            "Basic features governing operations, covering syntax, hierarchy, and conditional evaluation.";
        const std::string data =
            "What are the built-in data abstraction mechanisms provided by the language, such as arrays, lists, "
            "sets, and maps, and how are they typically used?";
        const std::string oop =
            "How does the language support object-oriented constructs such as class definitions, object "
            "instantiation, encapsulation, inheritance, and polymorphism?";
        const std::string fp =
            "A declarative paradigm emphasizing pure functions and immutable data, with Map and Filter "
            "exemplifying key features.";
        using G = FeatureGroup;
        return std::vector<LinguisticFeature>{
            {"F1", "Variable Definition",
             "How does a language define variables of various types, particularly in distinguishing static and "
             "dynamic typing?",
             G::Typing},
            {"F2", "Conditional Branching", "How does a language realize conditions and branches in program control flow?",
             G::ControlFlow},
            {"F3", "Loop: For", loops, G::ControlFlow},
            {"F4", "Loop: While", loops, G::ControlFlow},
            {"F5", "System I/O",
             "How does a language handle standard input and output operations, such as reading user input and "
             "printing text to the screen?",
             G::IO},
            {"F6", "Operations: Arithmetic", ops, G::Operations},
            {"F7", "Operations: Logical", ops, G::Operations},
            {"F8", "Operations: Comparison", ops, G::Operations},
            {"F9", "Library Integration", "How does a language import and utilize standard and third-party libraries?",
             G::Libraries},
            {"F10", "Parameter Passing",
             "What are the mechanisms for passing arguments in function calls, including distinctions between "
             "pass-by-value, pass-by-reference, and other strategies?",
             G::Functions},
            {"F11", "Function Returns",
             "How does a language define and manage return values from functions, including support for multiple "
             "return values or return type declarations?",
             G::Functions},
            {"F12", "Exception Handling",
             "How does the language manage runtime errors, including syntax and semantics of exception-throwing and "
             "catching constructs?",
             G::Exceptions},
            {"F13", "Data Structures: Array", data, G::DataStructures},
            {"F14", "Data Structures: List", data, G::DataStructures},
            {"F15", "Data Structures: Set", data, G::DataStructures},
            {"F16", "Data Structures: Map", data, G::DataStructures},
            {"F17", "OOP: Class Definition", oop, G::OOP},
            {"F18", "OOP: Object Creation", oop, G::OOP},
            {"F19", "OOP: Inheritance", oop, G::OOP},
            {"F20", "Functional Programming: Map", fp, G::Functional},
            {"F21", "Functional Programming: Filter", fp, G::Functional},
        };
    }();
    return catalog;
}

/// Looks a feature up by id (case-insensitive on the leading 'F').
inline const LinguisticFeature& find_feature(std::string_view id) {
    const int ordinal = feature_ordinal(id);
    const auto& catalog = feature_catalog();
    if (ordinal >= 1 && static_cast<std::size_t>(ordinal) <= catalog.size()) {
        const auto& feature = catalog[static_cast<std::size_t>(ordinal - 1)];
        if (feature_ordinal(feature.id) == ordinal && id.size() == feature.id.size()) return feature;
    }
    throw Error(ErrorCode::UnknownFeature, "unknown feature id '" + std::string(id) + "'");
}

enum class ResourceTier { High, Low, Reference };

constexpr std::string_view to_string(ResourceTier tier) noexcept {
    switch (tier) {
        case ResourceTier::High: return "high";
        case ResourceTier::Low: return "low";
        case ResourceTier::Reference: return "reference";
    }
    return "unknown";
}

inline ResourceTier parse_tier(std::string_view text) {
    const auto lower = ascii_lower(text);
    if (lower == "high") return ResourceTier::High;
    if (lower == "low") return ResourceTier::Low;
    if (lower == "reference") return ResourceTier::Reference;
    throw Error(ErrorCode::InvalidConfig, "unknown resource tier '" + std::string(text) + "'");
}

struct LanguageId {
    std::string name;
    ResourceTier tier = ResourceTier::Low;
    bool is_reference = false;

    friend bool operator==(const LanguageId&, const LanguageId&) = default;
};

/// Ordered set of studied languages plus the active feature set. Order is
/// stable and defines row/column order of every matrix built from it.
class LanguageRegistry {
public:
    LanguageRegistry() = default;

    LanguageRegistry(std::vector<LanguageId> languages, std::vector<LinguisticFeature> features)
        : languages_(std::move(languages)), features_(std::move(features)) {
        std::size_t references = 0;
        for (std::size_t i = 0; i < languages_.size(); ++i) {
            auto& language = languages_[i];
            if (language.name.empty()) throw Error(ErrorCode::InvalidConfig, "language with empty name");
            if (language.tier == ResourceTier::Reference) language.is_reference = true;
            if (language.is_reference) {
                language.tier = ResourceTier::Reference;
                ++references;
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (ascii_lower(languages_[j].name) == ascii_lower(language.name))
                    throw Error(ErrorCode::DuplicateLanguage, "language '" + language.name + "' listed twice");
            }
        }
        if (references > 1)
            throw Error(ErrorCode::MultipleReferenceLanguages, std::to_string(references) + " reference languages");
        for (std::size_t i = 0; i < features_.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (features_[i].id == features_[j].id)
                    throw Error(ErrorCode::InvalidConfig, "feature '" + features_[i].id + "' listed twice");
            }
        }
    }

    [[nodiscard]] std::span<const LanguageId> languages() const noexcept { return languages_; }
    [[nodiscard]] std::span<const LinguisticFeature> features() const noexcept { return features_; }
    [[nodiscard]] std::size_t size() const noexcept { return languages_.size(); }

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const {
        const auto key = ascii_lower(name);
        for (std::size_t i = 0; i < languages_.size(); ++i) {
            if (ascii_lower(languages_[i].name) == key) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] const LanguageId& language(std::string_view name) const {
        if (const auto idx = index_of(name)) return languages_[*idx];
        throw Error(ErrorCode::UnknownLanguage, "unknown language '" + std::string(name) + "'");
    }

    [[nodiscard]] bool has_feature(std::string_view id) const noexcept {
        return std::any_of(features_.begin(), features_.end(), [&](const auto& f) { return f.id == id; });
    }

    [[nodiscard]] const LinguisticFeature& feature(std::string_view id) const {
        for (const auto& f : features_) {
            if (f.id == id) return f;
        }
        throw Error(ErrorCode::UnknownFeature, "feature '" + std::string(id) + "' is not in the registry");
    }

    [[nodiscard]] const LanguageId* reference() const noexcept {
        for (const auto& language : languages_) {
            if (language.is_reference) return &language;
        }
        return nullptr;
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["languages"] = nlohmann::json::array();
        for (const auto& language : languages_) {
            doc["languages"].push_back({{"name", language.name}, {"tier", std::string(to_string(language.tier))}});
        }
        doc["features"] = nlohmann::json::array();
        for (const auto& feature : features_) doc["features"].push_back(feature.id);
        return doc;
    }

    /// Content digest; identical registries give identical digests.
    [[nodiscard]] std::string digest() const { return digest_hex(to_json().dump()); }

    friend bool operator==(const LanguageRegistry&, const LanguageRegistry&) = default;

private:
    std::vector<LanguageId> languages_;
    std::vector<LinguisticFeature> features_;
};

/// The 19 studied programming languages plus English as the reference.
inline LanguageRegistry default_registry() {
    using T = ResourceTier;
    std::vector<LanguageId> languages{
        {"C++", T::High},     {"Java", T::High},  {"JavaScript", T::High}, {"Kotlin", T::Low},
        {"Python", T::High},  {"Rust", T::High},  {"Haskell", T::Low},     {"C", T::High},
        {"Go", T::High},      {"Swift", T::Low},  {"AppleScript", T::Low}, {"Fortran", T::Low},
        {"Dart", T::Low},     {"Ruby", T::High},  {"Raku", T::Low},        {"PHP", T::High},
        {"Visual Basic", T::Low}, {"Pascal", T::Low}, {"Scala", T::Low},   {"English", T::Reference, true},
    };
    return LanguageRegistry(std::move(languages), feature_catalog());
}

/// Builds a registry from a JSON config document:
///
///     {"languages": [{"name": "Go", "tier": "high"},
///                    {"name": "English", "tier": "reference"}],
///      "features": ["F1", "F2"]}
///
/// "features" is optional (defaults to all 21). A language may also be marked
/// with "reference": true instead of the reference tier.
inline LanguageRegistry load_registry(const nlohmann::json& config) {
    if (!config.is_object() || !config.contains("languages") || !config["languages"].is_array())
        throw Error(ErrorCode::InvalidConfig, "registry config needs a 'languages' array");
    std::vector<LanguageId> languages;
    for (const auto& entry : config["languages"]) {
        LanguageId language;
        if (entry.is_string()) {
            language.name = entry.get<std::string>();
        } else if (entry.is_object() && entry.contains("name") && entry["name"].is_string()) {
            language.name = entry["name"].get<std::string>();
            if (entry.contains("tier")) language.tier = parse_tier(entry["tier"].get<std::string>());
            if (entry.contains("reference")) language.is_reference = entry["reference"].get<bool>();
        } else {
            throw Error(ErrorCode::InvalidConfig, "registry language entry must be a name or an object with 'name'");
        }
        languages.push_back(std::move(language));
    }
    std::vector<LinguisticFeature> features;
    if (config.contains("features")) {
        for (const auto& id : config["features"]) {
            if (!id.is_string()) throw Error(ErrorCode::InvalidConfig, "feature ids must be strings");
            features.push_back(find_feature(id.get<std::string>()));
        }
    } else {
        features = feature_catalog();
    }
    return LanguageRegistry(std::move(languages), std::move(features));
}

inline LanguageRegistry load_registry(std::string_view config_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("registry config: ") + e.what());
    }
    try {
        return load_registry(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("registry config: ") + e.what());
    }
}

}  // namespace langfam
