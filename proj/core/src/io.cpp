#include "corrdef/io.hpp"

#include "corrdef/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef CORRDEF_VERSION_STRING
#define CORRDEF_VERSION_STRING "0.0.0"
#endif

namespace corrdef::io {

using nlohmann::json;

std::string_view version() noexcept { return CORRDEF_VERSION_STRING; }

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static constexpr char digits[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[h & 0xF];
        h >>= 4;
    }
    return std::string(buf, 16);
}

std::string header_block(std::string_view config_hash) {
    std::string out = "# corrdef ";
    out += version();
    out += "\n# config_hash ";
    out += config_hash;
    out += '\n';
    return out;
}

namespace {

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
}

template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad field '") + key + "': " + e.what());
    }
}

std::pair<int, int> edge_pair(const json& e) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("edge must be a two-element array");
    try {
        return {e[0].get<int>(), e[1].get<int>()};
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("bad edge: ") + ex.what());
    }
}

}  // namespace

ModelParams parse_model(std::string_view text) {
    const json j = parse_json(text);
    const int n = field<int>(j, "n_vertices");
    std::vector<std::pair<int, int>> edges;
    if (j.contains("edges")) {
        for (const json& e : j.at("edges")) edges.push_back(edge_pair(e));
    }
    std::optional<Bipartition> parts;
    if (j.contains("bipartition") && !j.at("bipartition").is_null()) {
        const json& b = j.at("bipartition");
        parts = Bipartition{field<std::vector<int>>(b, "hat"), field<std::vector<int>>(b, "check")};
    }
    try {
        Graph graph(n, edges, parts);
        std::vector<double> alpha = field<std::vector<double>>(j, "alpha");
        std::vector<double> beta(graph.n_edges(), 0.0);
        std::vector<bool> seen(graph.n_edges(), false);
        if (j.contains("beta")) {
            for (const json& entry : j.at("beta")) {
                const auto [u, v] = edge_pair(field<json>(entry, "edge"));
                const auto idx = graph.edge_index(u, v);
                if (!idx) throw ConfigError("beta given for non-edge {" + std::to_string(u) + "," + std::to_string(v) + "}");
                if (seen[*idx]) throw ConfigError("beta given twice for an edge");
                seen[*idx] = true;
                beta[*idx] = field<double>(entry, "value");
            }
        }
        return ModelParams(std::move(graph), std::move(alpha), std::move(beta));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::out_of_range& e) {
        throw ConfigError(e.what());
    }
}

std::string model_to_json(const ModelParams& p) {
    json j;
    j["n_vertices"] = p.n_vertices();
    j["edges"] = json::array();
    j["beta"] = json::array();
    const auto edges = p.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        j["edges"].push_back({edges[i].u, edges[i].v});
        j["beta"].push_back({{"edge", {edges[i].u, edges[i].v}}, {"value", p.beta[i]}});
    }
    j["alpha"] = p.alpha;
    if (const auto& b = p.graph.bipartition()) j["bipartition"] = {{"hat", b->hat}, {"check", b->check}};
    return j.dump(2) + "\n";
}

MonotoneGenerator parse_generator(std::string_view text) {
    const json j = parse_json(text);
    const int n = field<int>(j, "n_vertices");
    std::vector<MonotoneGenerator::Entry> entries;
    if (j.contains("entries")) {
        for (const json& e : j.at("entries")) {
            const auto subset = field<std::uint64_t>(e, "subset_bitmask");
            if (subset > 0xFFFFFFFFULL) throw ConfigError("subset_bitmask out of range");
            entries.push_back({static_cast<Subset>(subset), field<int>(e, "vertex"), field<double>(e, "rate")});
        }
    }
    try {
        return MonotoneGenerator::from_entries(n, entries);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::out_of_range& e) {
        throw ConfigError(e.what());
    } catch (const std::length_error& e) {
        throw ConfigError(e.what());
    }
}

std::string generator_to_json(const MonotoneGenerator& gen) {
    json j;
    j["n_vertices"] = gen.n_vertices();
    j["entries"] = json::array();
    for (const auto& e : gen.entries()) {
        j["entries"].push_back({{"subset_bitmask", e.subset}, {"vertex", e.vertex}, {"rate", e.rate}});
    }
    return j.dump(2) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace corrdef::io
