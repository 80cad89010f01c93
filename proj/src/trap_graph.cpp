#include "qccd/trap_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace qccd::trap {

std::string to_string(Region r) {
    switch (r) {
        case Region::SArm: return "s_arm";
        case Region::HArm: return "h_arm";
        case Region::VArm: return "v_arm";
        case Region::Junction: return "junction";
    }
    throw std::logic_error("unknown region");
}

Region region_from_string(const std::string& s) {
    if (s == "s_arm") return Region::SArm;
    if (s == "h_arm") return Region::HArm;
    if (s == "v_arm") return Region::VArm;
    if (s == "junction") return Region::Junction;
    throw std::invalid_argument("unknown region: " + s);
}

TrapGraph::TrapGraph(std::vector<Zone> zones, std::vector<Edge> edges,
                     std::vector<std::array<double, 2>> bump_positions)
    : zones_(std::move(zones)),
      edges_(std::move(edges)),
      bumps_(std::move(bump_positions)) {
    validate();
}

bool TrapGraph::has_zone(const std::string& label) const {
    return std::any_of(zones_.begin(), zones_.end(),
                       [&](const Zone& z) { return z.label == label; });
}

const Zone& TrapGraph::zone(const std::string& label) const {
    for (const Zone& z : zones_) {
        if (z.label == label) return z;
    }
    throw std::invalid_argument("unknown zone: " + label);
}

void TrapGraph::validate() const {
    std::set<std::string> labels;
    for (const Zone& z : zones_) {
        if (!labels.insert(z.label).second)
            throw std::invalid_argument("duplicate zone label: " + z.label);
        const double norm = std::hypot(z.weak_axis[0], z.weak_axis[1]);
        if (std::abs(norm - 1.0) > 1e-12)
            throw std::invalid_argument("weak axis of " + z.label +
                                        " is not unit length");
    }
    for (const Edge& e : edges_) {
        if (!labels.count(e.from) || !labels.count(e.to))
            throw std::invalid_argument("edge endpoint not in zone set: " +
                                        e.from + "-" + e.to);
        if (!(e.path_length_um > 0.0))
            throw std::invalid_argument("non-positive edge length: " + e.from +
                                        "-" + e.to);
    }
    if (zones_.empty()) return;
    // connectivity
    std::map<std::string, std::vector<std::string>> adj;
    for (const Edge& e : edges_) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::set<std::string> seen;
    std::queue<std::string> frontier;
    frontier.push(zones_.front().label);
    seen.insert(zones_.front().label);
    while (!frontier.empty()) {
        const std::string cur = frontier.front();
        frontier.pop();
        for (const std::string& next : adj[cur]) {
            if (seen.insert(next).second) frontier.push(next);
        }
    }
    if (seen.size() != zones_.size())
        throw std::invalid_argument("trap graph is not connected");
}

Path path_between(const TrapGraph& graph, const std::string& from,
                  const std::string& to) {
    if (!graph.has_zone(from)) throw std::invalid_argument("unknown zone: " + from);
    if (!graph.has_zone(to)) throw std::invalid_argument("unknown zone: " + to);

    std::map<std::string, std::vector<std::pair<std::string, double>>> adj;
    for (const Edge& e : graph.edges()) {
        adj[e.from].emplace_back(e.to, e.path_length_um);
        adj[e.to].emplace_back(e.from, e.path_length_um);
    }
    // Dijkstra with lexicographic tie-break on the predecessor chain:
    // among equal-length paths, the smaller predecessor label wins.
    std::map<std::string, double> dist;
    std::map<std::string, std::string> prev;
    for (const Zone& z : graph.zones())
        dist[z.label] = std::numeric_limits<double>::infinity();
    dist[from] = 0.0;

    using Item = std::pair<double, std::string>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.emplace(0.0, from);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const auto& [v, w] : adj[u]) {
            const double nd = d + w;
            if (nd < dist[v] - 1e-12 ||
                (std::abs(nd - dist[v]) <= 1e-12 && prev.count(v) &&
                 u < prev[v])) {
                dist[v] = std::min(nd, dist[v]);
                prev[v] = u;
                pq.emplace(nd, v);
            }
        }
    }
    if (!std::isfinite(dist[to]))
        throw std::invalid_argument("zones are disconnected: " + from + ", " + to);

    Path path;
    path.total_length_um = dist[to];
    std::string cur = to;
    path.zones.push_back(cur);
    while (cur != from) {
        cur = prev.at(cur);
        path.zones.push_back(cur);
    }
    std::reverse(path.zones.begin(), path.zones.end());
    return path;
}

TrapGraph default_trap() {
    // S-arm zone line, distances from the junction along -z:
    // C(0), L(160), A(440), S(610), B(780), R(1000).
    auto zone = [](std::string label, double x, double z, double ax, double az,
                   Region r) {
        return Zone{std::move(label), {x, z}, {ax, az}, r};
    };
    std::vector<Zone> zones = {
        zone("L", 0.0, -160.0, 0.0, 1.0, Region::SArm),
        zone("A", 0.0, -440.0, 0.0, 1.0, Region::SArm),
        zone("S", 0.0, -610.0, 0.0, 1.0, Region::SArm),
        zone("B", 0.0, -780.0, 0.0, 1.0, Region::SArm),
        zone("R", 0.0, -1000.0, 0.0, 1.0, Region::SArm),
        zone("H", 0.0, 440.0, 0.0, 1.0, Region::HArm),
        zone("V", 270.0, 0.0, 1.0, 0.0, Region::VArm),
        zone("C", 0.0, 0.0, 0.0, 1.0, Region::Junction),
        zone("C'", 0.0, 0.0, 1.0, 0.0, Region::Junction),
    };
    std::vector<Edge> edges = {
        {"C", "L", 160.0, false},  {"L", "A", 280.0, false},
        {"A", "S", 170.0, false},  {"S", "B", 170.0, false},
        {"B", "R", 220.0, false},  {"C", "H", 440.0, true},
        {"C", "V", 270.0, true},   {"C'", "V", 270.0, true},
    };
    std::vector<std::array<double, 2>> bumps = {
        {60.0, 0.0}, {-60.0, 0.0}, {0.0, 60.0}, {0.0, -60.0}};
    return TrapGraph(std::move(zones), std::move(edges), std::move(bumps));
}

std::string TrapGraph::to_json() const {
    nlohmann::json j;
    j["zones"] = nlohmann::json::array();
    for (const Zone& z : zones_) {
        j["zones"].push_back({{"label", z.label},
                              {"position", z.position},
                              {"weak_axis", z.weak_axis},
                              {"region", to_string(z.region)}});
    }
    j["edges"] = nlohmann::json::array();
    for (const Edge& e : edges_) {
        j["edges"].push_back({{"from", e.from},
                              {"to", e.to},
                              {"path_length_um", e.path_length_um},
                              {"crosses_junction", e.crosses_junction}});
    }
    j["bump_positions"] = bumps_;
    return j.dump(2);
}

TrapGraph TrapGraph::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    std::vector<Zone> zones;
    for (const auto& zj : j.at("zones")) {
        Zone z;
        z.label = zj.at("label").get<std::string>();
        z.position = zj.at("position").get<std::array<double, 2>>();
        z.weak_axis = zj.at("weak_axis").get<std::array<double, 2>>();
        z.region = region_from_string(zj.at("region").get<std::string>());
        zones.push_back(std::move(z));
    }
    std::vector<Edge> edges;
    for (const auto& ej : j.at("edges")) {
        Edge e;
        e.from = ej.at("from").get<std::string>();
        e.to = ej.at("to").get<std::string>();
        e.path_length_um = ej.at("path_length_um").get<double>();
        e.crosses_junction = ej.value("crosses_junction", false);
        edges.push_back(std::move(e));
    }
    std::vector<std::array<double, 2>> bumps;
    if (j.contains("bump_positions"))
        bumps = j.at("bump_positions")
                    .get<std::vector<std::array<double, 2>>>();
    return TrapGraph(std::move(zones), std::move(edges), std::move(bumps));
}

}  // namespace qccd::trap
