#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "langfam/clustering.hpp"
#include "langfam/error.hpp"
#include "langfam/similarity.hpp"
#include "langfam/taxonomy.hpp"
#include "langfam/util.hpp"

namespace langfam {

namespace detail {

inline std::string xml_escape(std::string_view text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Rgb {
    int r, g, b;
};

inline std::string hex_color(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

/// White to deep red.
inline Rgb heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    constexpr Rgb lo{255, 245, 240};
    constexpr Rgb hi{165, 15, 21};
    const auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
    return {mix(lo.r, hi.r), mix(lo.g, hi.g), mix(lo.b, hi.b)};
}

inline std::string manifest_comment(std::string_view digest) {
    return digest.empty() ? std::string() : "<!-- manifest=" + std::string(digest) + " -->\n";
}

}  // namespace detail

/// Rows/columns in display order: non-reference languages in matrix order,
/// then the reference language.
inline std::vector<std::size_t> heatmap_order(const SimilarityMatrix& matrix, const LanguageRegistry* registry) {
    std::vector<std::size_t> order;
    std::optional<std::size_t> ref;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        const bool is_ref = registry != nullptr && registry->index_of(matrix.languages()[i]) &&
                            registry->language(matrix.languages()[i]).is_reference;
        if (is_ref) ref = i;
        else order.push_back(i);
    }
    if (ref) order.push_back(*ref);
    return order;
}

/// SVG heatmap: 2-decimal cell labels, reference language last, and a bottom
/// row with each language's mean similarity to the other non-reference languages.
inline std::string render_heatmap_svg(const SimilarityMatrix& matrix, const LanguageRegistry* registry,
                                      std::string_view manifest_digest = {}) {
    const auto order = heatmap_order(matrix, registry);
    const auto n = order.size();
    const bool has_ref = registry != nullptr && registry->reference() != nullptr &&
                         matrix.index_of(registry->reference()->name).has_value();
    std::vector<std::optional<double>> means(n);
    for (std::size_t c = 0; c < n; ++c) {
        if (has_ref && c + 1 == n) continue;
        const std::size_t programming = has_ref ? n - 1 : n;
        double sum = 0.0;
        for (std::size_t r = 0; r < programming; ++r) {
            if (r != c) sum += matrix.at(order[r], order[c]);
        }
        means[c] = programming > 1 ? sum / static_cast<double>(programming - 1) : 0.0;
    }
    double lo = 1.0;
    for (const double v : matrix.values()) lo = std::min(lo, v);
    const auto shade = [lo](double v) { return lo >= 1.0 ? 1.0 : (v - lo) / (1.0 - lo); };

    constexpr int cell = 44;
    constexpr int left = 120;
    constexpr int top = 120;
    const int width = left + cell * static_cast<int>(n) + 20;
    const int height = top + cell * static_cast<int>(n + 1) + 20;
    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += detail::manifest_comment(manifest_digest);
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (std::size_t c = 0; c < n; ++c) {
        const int x = left + cell * static_cast<int>(c) + cell / 2;
        svg += "<text class=\"col-label\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 6) +
               "\" transform=\"rotate(-60 " + std::to_string(x) + " " + std::to_string(top - 6) + ")\">" +
               detail::xml_escape(matrix.languages()[order[c]]) + "</text>\n";
    }
    const auto emit_cell = [&](std::size_t r, std::size_t c, double value, std::string_view cls) {
        const int x = left + cell * static_cast<int>(c);
        const int y = top + cell * static_cast<int>(r);
        const double t = shade(value);
        svg += "<rect class=\"" + std::string(cls) + "\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
               "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
               detail::hex_color(detail::heat_color(t)) + "\" stroke=\"#ffffff\"/>\n";
        svg += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
               "\" text-anchor=\"middle\" fill=\"" + (t > 0.6 ? "#ffffff" : "#000000") + "\">" +
               format_fixed(value, 2) + "</text>\n";
    };
    for (std::size_t r = 0; r < n; ++r) {
        const int y = top + cell * static_cast<int>(r) + cell / 2 + 4;
        svg += "<text class=\"row-label\" x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y) +
               "\" text-anchor=\"end\">" + detail::xml_escape(matrix.languages()[order[r]]) + "</text>\n";
        for (std::size_t c = 0; c < n; ++c) emit_cell(r, c, matrix.at(order[r], order[c]), "cell");
    }
    const int mean_y = top + cell * static_cast<int>(n) + cell / 2 + 4;
    svg += "<text class=\"row-label\" x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(mean_y) +
           "\" text-anchor=\"end\" font-weight=\"bold\">Mean</text>\n";
    for (std::size_t c = 0; c < n; ++c) {
        if (means[c]) emit_cell(n, c, *means[c], "mean");
    }
    svg += "</svg>\n";
    return svg;
}

inline void emit_heatmap(const SimilarityMatrix& matrix, const LanguageRegistry* registry,
                         const std::filesystem::path& path, std::string_view manifest_digest = {}) {
    write_file_atomic(path, render_heatmap_svg(matrix, registry, manifest_digest));
}

// ---------------------------------------------------------------------------
// Dendrogram formats

enum class DendrogramFormat { TreeText, Dot, Svg, Json };

inline DendrogramFormat parse_dendrogram_format(std::string_view text) {
    if (text == "tree-text" || text == "newick") return DendrogramFormat::TreeText;
    if (text == "dot") return DendrogramFormat::Dot;
    if (text == "svg") return DendrogramFormat::Svg;
    if (text == "json") return DendrogramFormat::Json;
    throw Error(ErrorCode::UnknownFormat, "unknown dendrogram format '" + std::string(text) + "'");
}

namespace detail {

inline std::string newick_label(std::string_view name) {
    if (!name.empty() && name.find_first_of(" \t\n()[]':;,") == std::string_view::npos) return std::string(name);
    std::string out = "'";
    for (const char c : name) {
        if (c == '\'') out += '\'';
        out += c;
    }
    return out + "'";
}

/// Children of internal node id (n + t) and node heights (leaves at 0).
struct TreeIndex {
    std::size_t n = 0;
    std::vector<double> height;
    std::vector<std::pair<std::size_t, std::size_t>> children;  // indexed by merge t

    explicit TreeIndex(const Dendrogram& d) : n(d.leaf_count()), height(2 * d.leaf_count() - 1, 0.0) {
        for (std::size_t t = 0; t < d.merges.size(); ++t) {
            height[n + t] = d.merges[t].height;
            children.emplace_back(d.merges[t].left, d.merges[t].right);
        }
    }

    [[nodiscard]] std::size_t root() const { return n + children.size() - 1; }
    [[nodiscard]] bool leaf(std::size_t id) const { return id < n; }

    void leaves_in_order(std::size_t id, std::vector<std::size_t>& out) const {
        if (leaf(id)) {
            out.push_back(id);
            return;
        }
        leaves_in_order(children[id - n].first, out);
        leaves_in_order(children[id - n].second, out);
    }
};

}  // namespace detail

/// Newick. Internal labels are "<merge index>@<height>" at full precision so
/// the merge list can be rebuilt exactly; branch lengths are parent minus
/// child height. A leading comment records the leaf order.
inline std::string to_tree_text(const Dendrogram& dendrogram, std::string_view manifest_digest = {}) {
    check_dendrogram(dendrogram);
    const detail::TreeIndex tree(dendrogram);
    std::string out;
    if (!manifest_digest.empty()) out += "[manifest=" + std::string(manifest_digest) + "]";
    out += "[leaves=[";
    for (std::size_t i = 0; i < dendrogram.leaves.size(); ++i) {
        if (i > 0) out += ",";
        auto quoted = nlohmann::json(dendrogram.leaves[i]).dump();
        std::string safe;
        for (const char c : quoted) safe += (c == ']') ? std::string("\\u005d") : std::string(1, c);
        out += safe;
    }
    out += "]]";
    const std::function<void(std::size_t, double)> write = [&](std::size_t id, double parent_height) {
        if (tree.leaf(id)) {
            out += detail::newick_label(dendrogram.leaves[id]);
        } else {
            const auto [l, r] = tree.children[id - tree.n];
            out += "(";
            write(l, tree.height[id]);
            out += ",";
            write(r, tree.height[id]);
            out += ")" + std::to_string(id - tree.n) + "@" + format_double(tree.height[id]);
        }
        if (parent_height >= 0.0) out += ":" + format_double(parent_height - tree.height[id]);
    };
    write(tree.root(), -1.0);
    out += ";\n";
    return out;
}

/// Inverse of to_tree_text.
inline Dendrogram parse_tree_text(std::string_view text) {
    std::size_t pos = 0;
    std::optional<std::vector<std::string>> leaf_order;
    const auto fail = [&](const std::string& what) {
        return Error(ErrorCode::MalformedRecord, "tree text at offset " + std::to_string(pos) + ": " + what);
    };
    const auto skip = [&] {
        while (pos < text.size()) {
            const char c = text[pos];
            if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
                ++pos;
            } else if (c == '[') {
                const auto end = text.find(']', pos);
                // The leaves comment holds a JSON array, so its own closing bracket comes first.
                if (text.substr(pos, 8) == "[leaves=") {
                    const auto close = text.find("]]", pos);
                    if (close == std::string_view::npos) throw fail("unterminated leaves comment");
                    try {
                        leaf_order = nlohmann::json::parse(text.substr(pos + 8, close + 1 - (pos + 8)))
                                         .get<std::vector<std::string>>();
                    } catch (const nlohmann::json::exception& e) {
                        throw fail(std::string("leaves comment: ") + e.what());
                    }
                    pos = close + 2;
                } else {
                    if (end == std::string_view::npos) throw fail("unterminated comment");
                    pos = end + 1;
                }
            } else {
                break;
            }
        }
    };
    const auto read_label = [&]() -> std::string {
        skip();
        std::string label;
        if (pos < text.size() && text[pos] == '\'') {
            ++pos;
            while (true) {
                if (pos >= text.size()) throw fail("unterminated quoted label");
                if (text[pos] == '\'') {
                    if (pos + 1 < text.size() && text[pos + 1] == '\'') {
                        label += '\'';
                        pos += 2;
                        continue;
                    }
                    ++pos;
                    break;
                }
                label += text[pos++];
            }
            return label;
        }
        while (pos < text.size() && std::string_view("()[]':;, \t\n\r").find(text[pos]) == std::string_view::npos)
            label += text[pos++];
        return label;
    };
    const auto skip_length = [&] {
        skip();
        if (pos < text.size() && text[pos] == ':') {
            ++pos;
            (void)read_label();
        }
    };

    struct Internal {
        std::size_t index;
        double height;
        std::size_t left_leafish;  // provisional child handles
        std::size_t right_leafish;
    };
    std::vector<std::string> leaf_names;
    std::vector<Internal> internals;
    // Handles: leaves are 0.., internals are encoded as (1 << 40) + position.
    constexpr std::size_t internal_tag = std::size_t{1} << 40;
    const std::function<std::size_t()> node = [&]() -> std::size_t {
        skip();
        if (pos < text.size() && text[pos] == '(') {
            ++pos;
            const auto l = node();
            skip();
            if (pos >= text.size() || text[pos] != ',') throw fail("expected ','");
            ++pos;
            const auto r = node();
            skip();
            if (pos >= text.size() || text[pos] != ')') throw fail("binary trees only; expected ')'");
            ++pos;
            const auto label = read_label();
            const auto at = label.find('@');
            if (at == std::string::npos) throw fail("internal label must be <index>@<height>");
            Internal in{};
            try {
                in.index = std::stoul(label.substr(0, at));
                in.height = std::stod(label.substr(at + 1));
            } catch (const std::exception&) {
                throw fail("bad internal label '" + label + "'");
            }
            in.left_leafish = l;
            in.right_leafish = r;
            skip_length();
            internals.push_back(in);
            return internal_tag + internals.size() - 1;
        }
        const auto name = read_label();
        if (name.empty()) throw fail("empty leaf label");
        leaf_names.push_back(name);
        skip_length();
        return leaf_names.size() - 1;
    };
    node();
    skip();
    if (pos >= text.size() || text[pos] != ';') throw fail("expected ';'");

    Dendrogram d;
    d.leaves = leaf_order ? *leaf_order : leaf_names;
    const auto n = d.leaves.size();
    if (leaf_names.size() != n || internals.size() + 1 != n) throw fail("leaf/merge count mismatch");
    std::map<std::string, std::size_t> leaf_id;
    for (std::size_t i = 0; i < n; ++i) leaf_id[d.leaves[i]] = i;
    const auto resolve = [&](std::size_t handle) -> std::size_t {
        if (handle >= internal_tag) return n + internals[handle - internal_tag].index;
        const auto it = leaf_id.find(leaf_names[handle]);
        if (it == leaf_id.end()) throw fail("leaf '" + leaf_names[handle] + "' missing from leaf order");
        return it->second;
    };
    d.merges.assign(n - 1, Merge{});
    std::vector<bool> seen(n - 1, false);
    for (const auto& in : internals) {
        if (in.index >= n - 1 || seen[in.index]) throw fail("bad merge index");
        seen[in.index] = true;
        const auto a = resolve(in.left_leafish);
        const auto b = resolve(in.right_leafish);
        d.merges[in.index] = Merge{std::min(a, b), std::max(a, b), in.height, 0};
    }
    std::vector<std::size_t> sizes(2 * n - 1, 1);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        auto& m = d.merges[t];
        if (m.left >= n + t || m.right >= n + t) throw fail("merge references a later node");
        m.size = sizes[n + t] = sizes[m.left] + sizes[m.right];
    }
    check_dendrogram(d);
    return d;
}

namespace detail {

inline const std::array<std::string_view, 10>& cluster_palette() {
    // Blue is reserved for links joining different clusters.
    static const std::array<std::string_view, 10> palette{"#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                                          "#e377c2", "#17becf", "#bcbd22", "#7f7f7f", "#393b79"};
    return palette;
}

inline constexpr std::string_view link_color = "#1f77b4";

/// Cluster label of a node when all its leaves share one, else nullopt.
inline std::vector<std::optional<std::size_t>> node_clusters(const TreeIndex& tree, const Partition* partition) {
    std::vector<std::optional<std::size_t>> out(2 * tree.n - 1);
    if (partition == nullptr) return out;
    for (std::size_t i = 0; i < tree.n; ++i) out[i] = partition->labels[i];
    for (std::size_t t = 0; t < tree.children.size(); ++t) {
        const auto& a = out[tree.children[t].first];
        const auto& b = out[tree.children[t].second];
        if (a && b && *a == *b) out[tree.n + t] = a;
    }
    return out;
}

}  // namespace detail

inline std::string to_dot(const Dendrogram& dendrogram, const Partition* partition = nullptr,
                          std::string_view manifest_digest = {}) {
    check_dendrogram(dendrogram);
    const detail::TreeIndex tree(dendrogram);
    const auto clusters = detail::node_clusters(tree, partition);
    const auto color = [&](std::size_t id) {
        return clusters[id] ? std::string(detail::cluster_palette()[*clusters[id] % 10])
                            : std::string(detail::link_color);
    };
    std::string out;
    if (!manifest_digest.empty()) out += "// manifest=" + std::string(manifest_digest) + "\n";
    out += "digraph dendrogram {\n  rankdir=TB;\n  node [fontname=\"sans-serif\"];\n";
    for (std::size_t i = 0; i < tree.n; ++i) {
        out += "  leaf" + std::to_string(i) + " [shape=box, label=" + nlohmann::json(dendrogram.leaves[i]).dump() +
               ", color=\"" + color(i) + "\"";
        if (partition != nullptr) out += ", cluster=" + std::to_string(partition->labels[i]);
        out += "];\n";
    }
    const auto name = [&](std::size_t id) {
        return tree.leaf(id) ? "leaf" + std::to_string(id) : "merge" + std::to_string(id - tree.n);
    };
    for (std::size_t t = 0; t < tree.children.size(); ++t) {
        const auto id = tree.n + t;
        out += "  " + name(id) + " [shape=point, label=\"" + format_double(tree.height[id]) + "\", height=" +
               format_double(tree.height[id]) + "];\n";
        for (const auto child : {tree.children[t].first, tree.children[t].second})
            out += "  " + name(id) + " -> " + name(child) + " [color=\"" + color(child) + "\"];\n";
    }
    out += "}\n";
    return out;
}

/// Rendered tree: merge height on the vertical axis, leaves along the bottom,
/// subtrees coloured by cluster.
inline std::string render_dendrogram_svg(const Dendrogram& dendrogram, const Partition* partition = nullptr,
                                         std::string_view manifest_digest = {}) {
    check_dendrogram(dendrogram);
    const detail::TreeIndex tree(dendrogram);
    const auto clusters = detail::node_clusters(tree, partition);
    std::vector<std::size_t> order;
    tree.leaves_in_order(tree.root(), order);

    constexpr double spacing = 40.0;
    constexpr double left = 70.0;
    constexpr double top = 30.0;
    constexpr double plot_h = 360.0;
    const double max_h = tree.height[tree.root()] > 0.0 ? tree.height[tree.root()] : 1.0;
    const auto y_of = [&](double h) { return top + plot_h * (1.0 - h / max_h); };
    std::vector<double> x(2 * tree.n - 1, 0.0);
    for (std::size_t p = 0; p < order.size(); ++p) x[order[p]] = left + spacing * (static_cast<double>(p) + 0.5);
    for (std::size_t t = 0; t < tree.children.size(); ++t)
        x[tree.n + t] = 0.5 * (x[tree.children[t].first] + x[tree.children[t].second]);

    const double width = left + spacing * static_cast<double>(tree.n) + 20.0;
    const double height = top + plot_h + 120.0;
    const auto num = [](double v) { return format_fixed(v, 2); };
    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += detail::manifest_comment(manifest_digest);
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    svg += "<line x1=\"" + num(left - 10) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left - 10) + "\" y2=\"" +
           num(top + plot_h) + "\" stroke=\"#000000\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double h = max_h * tick / 4.0;
        svg += "<text x=\"" + num(left - 14) + "\" y=\"" + num(y_of(h) + 4) + "\" text-anchor=\"end\">" +
               format_fixed(h, 3) + "</text>\n";
    }
    const auto stroke = [&](std::size_t id) {
        return clusters[id] ? std::string(detail::cluster_palette()[*clusters[id] % 10])
                            : std::string(detail::link_color);
    };
    const auto css = [&](std::size_t id) {
        return clusters[id] ? "cluster-" + std::to_string(*clusters[id]) : std::string("link");
    };
    for (std::size_t t = 0; t < tree.children.size(); ++t) {
        const auto id = tree.n + t;
        const double y = y_of(tree.height[id]);
        for (const auto child : {tree.children[t].first, tree.children[t].second}) {
            svg += "<path class=\"" + css(id) + "\" d=\"M" + num(x[child]) + " " + num(y_of(tree.height[child])) +
                   " V" + num(y) + " H" + num(x[id]) + "\" fill=\"none\" stroke=\"" + stroke(id) +
                   "\" stroke-width=\"2\"/>\n";
        }
    }
    for (const auto leaf : order) {
        const double lx = x[leaf];
        const double ly = top + plot_h + 8.0;
        svg += "<text class=\"" + css(leaf) + "\" x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" fill=\"" + stroke(leaf) +
               "\" transform=\"rotate(60 " + num(lx) + " " + num(ly) + ")\">" +
               detail::xml_escape(dendrogram.leaves[leaf]) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline nlohmann::json partition_json(const Partition& partition, std::string_view manifest_digest = {}) {
    nlohmann::json doc;
    if (!manifest_digest.empty()) doc["manifest"] = std::string(manifest_digest);
    doc["k"] = partition.k;
    doc["partition"] = nlohmann::json::object();
    for (std::size_t i = 0; i < partition.languages.size(); ++i) doc["partition"][partition.languages[i]] = partition.labels[i];
    return doc;
}

inline nlohmann::json dendrogram_json(const Dendrogram& dendrogram, std::string_view manifest_digest = {}) {
    nlohmann::json doc;
    if (!manifest_digest.empty()) doc["manifest"] = std::string(manifest_digest);
    doc["leaves"] = dendrogram.leaves;
    doc["merges"] = nlohmann::json::array();
    for (const auto& m : dendrogram.merges)
        doc["merges"].push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
    return doc;
}

inline std::string render_dendrogram(const Dendrogram& dendrogram, const Partition* partition, DendrogramFormat format,
                                     std::string_view manifest_digest = {}) {
    switch (format) {
        case DendrogramFormat::TreeText: return to_tree_text(dendrogram, manifest_digest);
        case DendrogramFormat::Dot: return to_dot(dendrogram, partition, manifest_digest);
        case DendrogramFormat::Svg: return render_dendrogram_svg(dendrogram, partition, manifest_digest);
        case DendrogramFormat::Json: return dendrogram_json(dendrogram, manifest_digest).dump(2) + "\n";
    }
    throw Error(ErrorCode::UnknownFormat, "unknown dendrogram format");
}

inline void emit_dendrogram(const Dendrogram& dendrogram, const Partition* partition,
                            const std::filesystem::path& path, DendrogramFormat format,
                            std::string_view manifest_digest = {}) {
    write_file_atomic(path, render_dendrogram(dendrogram, partition, format, manifest_digest));
}

inline void emit_dendrogram(const Dendrogram& dendrogram, const Partition* partition,
                            const std::filesystem::path& path, std::string_view format,
                            std::string_view manifest_digest = {}) {
    emit_dendrogram(dendrogram, partition, path, parse_dendrogram_format(format), manifest_digest);
}

}  // namespace langfam
