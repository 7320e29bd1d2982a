#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"

namespace spantree {

/// Shortest representation with up to 17 significant digits; round-trips
/// every finite double exactly.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// FNV-1a 64-bit content digest, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// JSON graph document:
///   {"directed": bool, "nodes": int, "edges": [{"u", "v", "w", "omega"}]}
/// "omega" defaults to 1.0, "directed" to false.
inline Graph parse_graph_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw ParseError("graph document must be a JSON object");
        if (!doc.contains("nodes") || !doc["nodes"].is_number_integer())
            throw ParseError("field \"nodes\" must be an integer");
        const int n = doc["nodes"].get<int>();
        const bool directed = doc.value("directed", false);
        if (!doc.contains("edges") || !doc["edges"].is_array())
            throw ParseError("field \"edges\" must be an array");
        std::vector<Edge> edges;
        int idx = 0;
        for (const auto& item : doc["edges"]) {
            const std::string where = "edges[" + std::to_string(idx++) + "]";
            if (!item.is_object()) throw ParseError(where + " must be an object");
            for (const char* key : {"u", "v", "w"})
                if (!item.contains(key))
                    throw ParseError(where + " is missing field \"" + key + "\"");
            if (!item["u"].is_number_integer() || !item["v"].is_number_integer())
                throw ParseError(where + ": \"u\" and \"v\" must be integers");
            if (!item["w"].is_number())
                throw ParseError(where + ": \"w\" must be a number");
            Edge e;
            e.u = item["u"].get<NodeId>();
            e.v = item["v"].get<NodeId>();
            e.w = item["w"].get<double>();
            e.omega = 1.0;
            if (item.contains("omega")) {
                if (!item["omega"].is_number())
                    throw ParseError(where + ": \"omega\" must be a number");
                e.omega = item["omega"].get<double>();
            }
            edges.push_back(e);
        }
        return build_graph(n, directed, edges);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid graph document: ") + e.what());
    }
}

/// Whitespace-separated text format, one undirected edge per line:
///   u v w [omega]
/// Lines starting with '#' are ignored; the node count is the largest
/// index + 1. Directed graphs use the JSON format.
inline Graph parse_graph_text(const std::string& text) {
    std::vector<Edge> edges;
    int max_node = -1;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        long long u, v;
        double w, omega = 1.0;
        if (!(ls >> u >> v >> w))
            throw ParseError("line " + std::to_string(lineno) +
                             ": expected \"u v w [omega]\"");
        if (!(ls >> omega)) omega = 1.0;
        std::string rest;
        if (ls.clear(), ls >> rest)
            throw ParseError("line " + std::to_string(lineno) + ": trailing tokens");
        if (u < 0 || v < 0)
            throw ParseError("line " + std::to_string(lineno) + ": negative node index");
        Edge e;
        e.u = static_cast<NodeId>(u);
        e.v = static_cast<NodeId>(v);
        e.w = w;
        e.omega = omega;
        edges.push_back(e);
        max_node = std::max<long long>(max_node, std::max(u, v));
    }
    if (edges.empty()) throw ParseError("no edges in text graph file");
    return build_graph(static_cast<int>(max_node) + 1, false, edges);
}

/// Serialized JSON form; parse_graph_json of the output rebuilds an
/// identical graph (weights round-trip bit-exactly).
inline std::string graph_to_json(const Graph& g) {
    std::string out = "{\"directed\": ";
    out += g.directed() ? "true" : "false";
    out += ", \"nodes\": " + std::to_string(g.node_count()) + ", \"edges\": [";
    bool first = true;
    for (const Edge& e : g.edges()) {
        if (!first) out += ", ";
        first = false;
        out += "{\"u\": " + std::to_string(e.u) + ", \"v\": " + std::to_string(e.v) +
               ", \"w\": " + format_g17(e.w) + ", \"omega\": " + format_g17(e.omega) + "}";
    }
    out += "]}";
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Loads either graph file format, sniffing JSON by a leading '{'.
inline Graph load_graph_file(const std::string& path) {
    const std::string bytes = read_file(path);
    const auto first = bytes.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && bytes[first] == '{') return parse_graph_json(bytes);
    return parse_graph_text(bytes);
}

}  // namespace spantree
