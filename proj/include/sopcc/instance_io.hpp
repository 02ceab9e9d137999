#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sopcc/error.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/rng.hpp"

namespace sopcc {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
    if (!obj.is_object()) {
        throw ParseError(std::string(where) + " must be a JSON object", 0);
    }
    for (const auto& item : obj.items()) {
        bool known = false;
        for (auto key : allowed) {
            known = known || item.key() == key;
        }
        if (!known) {
            throw ParseError("unknown field '" + item.key() + "' in " + std::string(where), 0);
        }
    }
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where) {
    if (!obj.contains(key)) {
        throw ParseError("missing field '" + std::string(key) + "' in " + std::string(where), 0);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("field '" + std::string(key) + "' in " + std::string(where) + ": " + e.what(), 0);
    }
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline bool parse_number(std::string_view token, double& out) {
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace detail

inline nlohmann::json to_json(const ProblemInstance& instance) {
    nlohmann::json vertices = nlohmann::json::array();
    for (const auto& v : instance.vertices()) {
        vertices.push_back({{"id", v.id}, {"x", v.x}, {"y", v.y}, {"reward", v.reward}});
    }
    nlohmann::json model;
    const auto& cm = instance.cost_model();
    if (cm.kind == CostModelKind::euclidean_exponential) {
        model = {{"kind", "euclidean_exponential"}, {"kappa", cm.kappa}};
    } else {
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& e : cm.edges) {
            edges.push_back({{"i", e.from}, {"j", e.to}, {"mean", e.mean}});
        }
        model = {{"kind", "explicit_edges"}, {"kappa", cm.kappa}, {"edges", std::move(edges)}};
    }
    return {{"name", instance.name()},
            {"vertices", std::move(vertices)},
            {"start", instance.start()},
            {"goal", instance.goal()},
            {"cost_model", std::move(model)}};
}

/// Reads the instance schema; unknown fields are an error. No closure is applied.
inline ProblemInstance instance_from_json(const nlohmann::json& doc) {
    using detail::required;
    detail::reject_unknown_keys(doc, {"name", "vertices", "start", "goal", "cost_model"}, "instance");
    auto name = required<std::string>(doc, "name", "instance");
    const auto& jv = doc.contains("vertices") ? doc.at("vertices") : throw ParseError("missing field 'vertices'", 0);
    if (!jv.is_array()) {
        throw ParseError("'vertices' must be an array", 0);
    }
    std::vector<Vertex> vertices;
    for (const auto& item : jv) {
        detail::reject_unknown_keys(item, {"id", "x", "y", "reward"}, "vertex");
        vertices.push_back({required<VertexId>(item, "id", "vertex"), required<double>(item, "x", "vertex"),
                            required<double>(item, "y", "vertex"), required<double>(item, "reward", "vertex")});
    }
    const auto& jm = doc.contains("cost_model") ? doc.at("cost_model") : throw ParseError("missing field 'cost_model'", 0);
    detail::reject_unknown_keys(jm, {"kind", "kappa", "edges"}, "cost_model");
    const auto kind = required<std::string>(jm, "kind", "cost_model");
    EdgeCostModel model;
    if (kind == "euclidean_exponential") {
        if (jm.contains("edges")) {
            throw ParseError("euclidean_exponential cost model takes no 'edges'", 0);
        }
        model = EdgeCostModel::euclidean(required<double>(jm, "kappa", "cost_model"));
    } else if (kind == "explicit_edges") {
        const auto& je = jm.contains("edges") ? jm.at("edges") : throw ParseError("missing field 'edges'", 0);
        if (!je.is_array()) {
            throw ParseError("'edges' must be an array", 0);
        }
        std::vector<ExplicitEdge> edges;
        for (const auto& item : je) {
            detail::reject_unknown_keys(item, {"i", "j", "mean"}, "edge");
            edges.push_back({required<VertexId>(item, "i", "edge"), required<VertexId>(item, "j", "edge"),
                             required<double>(item, "mean", "edge")});
        }
        model = EdgeCostModel::explicit_edges(std::move(edges),
                                              jm.contains("kappa") ? required<double>(jm, "kappa", "cost_model") : 0.5);
    } else {
        throw ParseError("unknown cost model kind '" + kind + "'", 0);
    }
    return ProblemInstance(std::move(name), std::move(vertices), required<VertexId>(doc, "start", "instance"),
                           required<VertexId>(doc, "goal", "instance"), std::move(model));
}

inline ProblemInstance read_instance_json(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
    }
    return instance_from_json(doc);
}

/**
 * TSPLIB reader limited to NODE_COORD_SECTION. Costs use the plain
 * Euclidean distance between the listed coordinates (GEO/ATT conventions
 * are not applied). Rewards are drawn uniformly from
 * [reward_low, reward_high]; the first node is the start, the last the goal.
 */
inline ProblemInstance parse_tsplib(std::istream& in, std::uint64_t reward_seed, double reward_low,
                                    double reward_high, double kappa) {
    if (!(reward_low <= reward_high) || reward_low < 0.0) {
        throw ParameterError("reward range must satisfy 0 <= low <= high");
    }
    if (!(kappa > 0.0 && kappa < 1.0)) {
        throw ParameterError("kappa must lie in (0, 1), got " + std::to_string(kappa));
    }
    std::string name = "tsplib";
    long long dimension = -1;
    bool in_section = false;
    bool saw_section = false;
    std::set<long long> seen;
    std::vector<Vertex> vertices;
    std::string raw;
    std::size_t line_no = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) {
            continue;
        }
        if (line == "EOF") {
            break;
        }
        if (!in_section) {
            if (line == "NODE_COORD_SECTION") {
                in_section = saw_section = true;
                continue;
            }
            const auto colon = line.find(':');
            if (colon == std::string_view::npos) {
                if (line.ends_with("_SECTION")) {
                    throw ParseError("unsupported section " + std::string(line), line_no);
                }
                throw ParseError("expected 'KEY : value', got '" + std::string(line) + "'", line_no);
            }
            const auto key = detail::trim(line.substr(0, colon));
            const auto value = detail::trim(line.substr(colon + 1));
            if (key == "NAME") {
                name = std::string(value);
            } else if (key == "DIMENSION") {
                double d = 0;
                if (!detail::parse_number(value, d) || d < 1 || d != static_cast<long long>(d)) {
                    throw ParseError("invalid DIMENSION '" + std::string(value) + "'", line_no);
                }
                dimension = static_cast<long long>(d);
            }
            continue;
        }
        std::istringstream fields{std::string(line)};
        std::string tok_id, tok_x, tok_y, extra;
        double id = 0, x = 0, y = 0;
        if (!(fields >> tok_id >> tok_x >> tok_y) || (fields >> extra) || !detail::parse_number(tok_id, id) ||
            !detail::parse_number(tok_x, x) || !detail::parse_number(tok_y, y) ||
            id != static_cast<long long>(id)) {
            throw ParseError("malformed coordinate line '" + std::string(line) + "'", line_no);
        }
        if (!seen.insert(static_cast<long long>(id)).second) {
            throw ParseError("duplicate node index " + tok_id, line_no);
        }
        vertices.push_back({static_cast<VertexId>(vertices.size()), x, y, 0.0});
    }
    if (!saw_section) {
        throw ParseError("missing NODE_COORD_SECTION", line_no);
    }
    if (vertices.size() < 2) {
        throw ParseError("NODE_COORD_SECTION lists fewer than 2 nodes", line_no);
    }
    if (dimension >= 0 && static_cast<std::size_t>(dimension) != vertices.size()) {
        throw ParseError("DIMENSION " + std::to_string(dimension) + " does not match " +
                             std::to_string(vertices.size()) + " coordinate lines",
                         line_no);
    }
    Rng rng(reward_seed);
    for (auto& v : vertices) {
        v.reward = rng.uniform(reward_low, reward_high);
    }
    const auto goal = static_cast<VertexId>(vertices.size() - 1);
    return ProblemInstance(std::move(name), std::move(vertices), 0, goal, EdgeCostModel::euclidean(kappa));
}

inline ProblemInstance parse_tsplib(std::string_view text, std::uint64_t reward_seed, double reward_low,
                                    double reward_high, double kappa) {
    std::istringstream in{std::string(text)};
    return parse_tsplib(in, reward_seed, reward_low, reward_high, kappa);
}

} // namespace sopcc
