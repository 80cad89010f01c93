#pragma once

#include <array>
#include <string>
#include <vector>

namespace qccd::trap {

// Segment of the trap array a zone belongs to.
enum class Region { SArm, HArm, VArm, Junction };

std::string to_string(Region r);
Region region_from_string(const std::string& s);

// A named trapping zone in the y=0 midplane. Positions are (x, z) in um.
// The weak axis is the direction of weakest confinement at that zone.
struct Zone {
    std::string label;
    std::array<double, 2> position{0.0, 0.0};
    std::array<double, 2> weak_axis{0.0, 1.0};
    Region region = Region::SArm;
};

struct Edge {
    std::string from;
    std::string to;
    double path_length_um = 0.0;
    bool crosses_junction = false;
};

// The X-junction array as a graph of zones connected by transport channels.
class TrapGraph {
  public:
    TrapGraph() = default;
    TrapGraph(std::vector<Zone> zones, std::vector<Edge> edges,
              std::vector<std::array<double, 2>> bump_positions);

    const std::vector<Zone>& zones() const { return zones_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::array<double, 2>>& bump_positions() const {
        return bumps_;
    }

    bool has_zone(const std::string& label) const;
    const Zone& zone(const std::string& label) const;

    // Throws std::invalid_argument when a structural invariant is broken:
    // duplicate labels, non-unit weak axes, dangling edge endpoints,
    // non-positive lengths, or a disconnected graph.
    void validate() const;

    std::string to_json() const;
    static TrapGraph from_json(const std::string& text);

  private:
    std::vector<Zone> zones_;
    std::vector<Edge> edges_;
    std::vector<std::array<double, 2>> bumps_;
};

struct Path {
    std::vector<std::string> zones;
    double total_length_um = 0.0;
};

// Shortest path by summed edge length; ties broken by lexicographic order
// of the zone sequence. Throws if either zone is unknown or unreachable.
Path path_between(const TrapGraph& graph, const std::string& from,
                  const std::string& to);

// The measured trap: S arm along -z holding R, B, S, A, L; H on the +z arm;
// V on the +x arm; C and C' at the junction origin with weak axes along z
// and x respectively. Edge lengths follow the measured transport distances.
TrapGraph default_trap();

}  // namespace qccd::trap
