#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qccd/primitives.hpp"
#include "qccd/trap_graph.hpp"
#include "qccd/well_config.hpp"
#include "test_util.hpp"

using namespace qccd;

TEST_CASE("default trap holds the nine zones with measured geometry") {
    trap::TrapGraph g = trap::default_trap();
    CHECK_NOTHROW(g.validate());
    CHECK(g.zones().size() == 9);

    for (const char* label : {"L", "A", "S", "B", "R", "H", "V", "C", "C'"})
        CHECK(g.has_zone(label));
    CHECK_FALSE(g.has_zone("X"));

    // S column runs along -z; distances from the junction are the measured
    // zone offsets.
    CHECK(g.zone("C").position == std::array<double, 2>{0.0, 0.0});
    CHECK(g.zone("C'").position == std::array<double, 2>{0.0, 0.0});
    CHECK(g.zone("L").position == std::array<double, 2>{0.0, -160.0});
    CHECK(g.zone("A").position == std::array<double, 2>{0.0, -440.0});
    CHECK(g.zone("S").position == std::array<double, 2>{0.0, -610.0});
    CHECK(g.zone("B").position == std::array<double, 2>{0.0, -780.0});
    CHECK(g.zone("R").position == std::array<double, 2>{0.0, -1000.0});
    CHECK(g.zone("H").position == std::array<double, 2>{0.0, 440.0});
    CHECK(g.zone("V").position == std::array<double, 2>{270.0, 0.0});

    // C and C' share a position but differ in weak-axis orientation: the
    // rotated well points along x.
    CHECK(g.zone("C").weak_axis == std::array<double, 2>{0.0, 1.0});
    CHECK(g.zone("C'").weak_axis == std::array<double, 2>{1.0, 0.0});
    CHECK(g.zone("V").weak_axis == std::array<double, 2>{1.0, 0.0});

    CHECK(g.zone("S").region == trap::Region::SArm);
    CHECK(g.zone("H").region == trap::Region::HArm);
    CHECK(g.zone("V").region == trap::Region::VArm);
    CHECK(g.zone("C").region == trap::Region::Junction);
    CHECK(g.zone("C'").region == trap::Region::Junction);

    // Four pseudopotential bumps flank the junction.
    auto bumps = g.bump_positions();
    CHECK(bumps.size() == 4);
    std::set<std::pair<double, double>> want = {
        {60.0, 0.0}, {-60.0, 0.0}, {0.0, 60.0}, {0.0, -60.0}};
    std::set<std::pair<double, double>> got;
    for (auto& b : bumps) got.insert({b[0], b[1]});
    CHECK(got == want);

    CHECK(g.zone("C").label == "C");
    CHECK_THROWS_AS((void)g.zone("Q"), std::invalid_argument);
}

TEST_CASE("region names round-trip") {
    using trap::Region;
    for (Region r : {Region::SArm, Region::HArm, Region::VArm,
                     Region::Junction})
        CHECK(trap::region_from_string(trap::to_string(r)) == r);
    CHECK_THROWS_AS(trap::region_from_string("nowhere"),
                    std::invalid_argument);
}

TEST_CASE("shortest paths follow summed edge lengths and are symmetric") {
    trap::TrapGraph g = trap::default_trap();

    trap::Path p = trap::path_between(g, "S", "H");
    CHECK(p.zones == std::vector<std::string>{"S", "A", "L", "C", "H"});
    CHECK(p.total_length_um == doctest::Approx(170 + 280 + 160 + 440));

    trap::Path q = trap::path_between(g, "S", "V");
    CHECK(q.zones == std::vector<std::string>{"S", "A", "L", "C", "V"});
    CHECK(q.total_length_um == doctest::Approx(170 + 280 + 160 + 270));

    // The rotated junction well connects to the rest through the V arm.
    trap::Path r = trap::path_between(g, "C'", "C");
    CHECK(r.zones == std::vector<std::string>{"C'", "V", "C"});
    CHECK(r.total_length_um == doctest::Approx(540));

    trap::Path self = trap::path_between(g, "A", "A");
    CHECK(self.zones == std::vector<std::string>{"A"});
    CHECK(self.total_length_um == 0.0);

    // Symmetry over every zone pair.
    for (const auto& za : g.zones())
        for (const auto& zb : g.zones()) {
            trap::Path ab = trap::path_between(g, za.label, zb.label);
            trap::Path ba = trap::path_between(g, zb.label, za.label);
            CHECK(ab.total_length_um ==
                  doctest::Approx(ba.total_length_um).epsilon(1e-12));
            std::vector<std::string> rev(ba.zones.rbegin(), ba.zones.rend());
            CHECK(ab.zones.size() == rev.size());
        }

    CHECK_THROWS_AS(trap::path_between(g, "S", "Q"), std::invalid_argument);
    CHECK_THROWS_AS(trap::path_between(g, "Q", "S"), std::invalid_argument);
}

TEST_CASE("graph JSON round-trips exactly") {
    trap::TrapGraph g = trap::default_trap();
    std::string j1 = g.to_json();
    trap::TrapGraph g2 = trap::TrapGraph::from_json(j1);
    CHECK(g2.to_json() == j1);  // byte-deterministic serialization
    CHECK(g2.zones().size() == g.zones().size());
    CHECK(g2.edges().size() == g.edges().size());
    CHECK(g2.bump_positions() == g.bump_positions());
    for (std::size_t i = 0; i < g.zones().size(); ++i) {
        CHECK(g2.zones()[i].label == g.zones()[i].label);
        CHECK(g2.zones()[i].position == g.zones()[i].position);
        CHECK(g2.zones()[i].weak_axis == g.zones()[i].weak_axis);
        CHECK(g2.zones()[i].region == g.zones()[i].region);
    }
    CHECK_NOTHROW(g2.validate());
}

TEST_CASE("graph construction rejects broken invariants") {
    auto zones = trap::default_trap().zones();
    auto edges = trap::default_trap().edges();
    auto bumps = trap::default_trap().bump_positions();
    auto build = [&]() { return trap::TrapGraph(zones, edges, bumps); };

    SUBCASE("duplicate zone label") {
        zones.push_back(zones.front());
        CHECK_THROWS_AS(build(), std::invalid_argument);
    }
    SUBCASE("non-unit weak axis") {
        zones.front().weak_axis = {0.5, 0.5};
        CHECK_THROWS_AS(build(), std::invalid_argument);
    }
    SUBCASE("dangling edge endpoint") {
        edges.push_back({"S", "Nowhere", 10.0, false});
        CHECK_THROWS_AS(build(), std::invalid_argument);
    }
    SUBCASE("non-positive edge length") {
        edges.front().path_length_um = 0.0;
        CHECK_THROWS_AS(build(), std::invalid_argument);
    }
    SUBCASE("disconnected graph") {
        zones.push_back({"Q", {500.0, 500.0}, {0.0, 1.0},
                         trap::Region::SArm});
        CHECK_THROWS_AS(build(), std::invalid_argument);
    }
}

TEST_CASE("primitive library binds to the default trap") {
    auto lib = shuttle::PrimitiveLibrary::load(
        shuttle::PrimitiveLibrary::default_path());
    CHECK_NOTHROW(lib.validate_against(trap::default_trap()));

    // A graph missing a referenced zone is rejected. R is a leaf, so
    // dropping it keeps the graph itself valid while the shift primitives
    // still reference it.
    auto zones = trap::default_trap().zones();
    auto edges = trap::default_trap().edges();
    std::vector<trap::Zone> fewer;
    std::vector<trap::Edge> fewer_edges;
    for (const auto& z : zones)
        if (z.label != "R") fewer.push_back(z);
    for (const auto& e : edges)
        if (e.from != "R" && e.to != "R") fewer_edges.push_back(e);
    trap::TrapGraph missing(fewer, fewer_edges, {});
    CHECK_THROWS_AS(lib.validate_against(missing), std::invalid_argument);
}

TEST_CASE("well-configuration notation parses and formats canonically") {
    trap::WellConfiguration c = trap::parse_configuration("S_ab");
    REQUIRE(c.wells.size() == 1);
    CHECK(c.wells[0].zone == "S");
    CHECK(c.wells[0].ions == std::vector<std::string>{"a", "b"});
    CHECK(trap::format_configuration(c) == "S_ab");

    trap::WellConfiguration d = trap::parse_configuration("A_a B_b");
    REQUIRE(d.wells.size() == 2);
    CHECK(d.wells[0].zone == "A");
    CHECK(d.wells[1].zone == "B");
    CHECK(trap::format_configuration(d) == "A_a B_b");

    // The rotated junction zone keeps its prime in both directions.
    trap::WellConfiguration e = trap::parse_configuration("C'_a");
    CHECK(e.wells[0].zone == "C'");
    CHECK(trap::format_configuration(e) == "C'_a");

    // Whitespace is flexible on input, canonical on output.
    trap::WellConfiguration f = trap::parse_configuration("  A_a \t B_b ");
    CHECK(trap::format_configuration(f) == "A_a B_b");

    CHECK(c.ion_labels() == std::vector<std::string>{"a", "b"});
    CHECK(d.well_of("b").zone == "B");
    CHECK(d.holds("a"));
    CHECK_FALSE(d.holds("q"));
    CHECK_THROWS_AS((void)d.well_of("q"), std::invalid_argument);
}

TEST_CASE("malformed configurations report the failing offset") {
    auto offset_of = [](const std::string& text) -> std::size_t {
        try {
            (void)trap::parse_configuration(text);
        } catch (const trap::ConfigParseError& e) {
            return e.offset;
        }
        return static_cast<std::size_t>(-1);
    };

    CHECK(offset_of("X_a") == 0);        // unknown zone
    CHECK(offset_of("S a") == 1);        // missing underscore
    CHECK(offset_of("S_") == 2);         // empty subscript
    CHECK(offset_of("A_a B_B") == 6);    // uppercase ion label
    CHECK(offset_of("") == 0);           // empty text
    CHECK_THROWS_AS(trap::parse_configuration("_ab"),
                    trap::ConfigParseError);

    CHECK(offset_of("S_aa") == 3);     // duplicate ion in one well
    CHECK(offset_of("A_a B_a") == 6);  // ion in two wells
    CHECK_THROWS_AS(trap::parse_configuration("S_a S_b"),
                    trap::ConfigParseError);  // duplicate zone
}

TEST_CASE("zone-label grammar") {
    for (const char* z : {"L", "A", "S", "B", "R", "C", "C'", "H", "V"})
        CHECK(trap::is_zone_label(z));
    for (const char* z : {"", "X", "Cp", "c", "S'", "AA"})
        CHECK_FALSE(trap::is_zone_label(z));
}

TEST_CASE("property: random configurations survive format/parse round trips") {
    std::mt19937_64 rng(20260815);
    const std::vector<std::string> zones = {"L", "A", "S",  "B", "R",
                                            "C", "H", "C'", "V"};
    const std::string ions = "abcdefgh";

    for (int trial = 0; trial < 200; ++trial) {
        // Random partition of a random ion subset over distinct zones.
        std::vector<std::string> zs = zones;
        std::shuffle(zs.begin(), zs.end(), rng);
        int well_count = testutil::uniform_int(rng, 1, 4);
        std::string pool = ions;
        std::shuffle(pool.begin(), pool.end(), rng);
        std::size_t next_ion = 0;

        trap::WellConfiguration config;
        for (int w = 0; w < well_count; ++w) {
            trap::Well well;
            well.zone = zs[static_cast<std::size_t>(w)];
            int ion_count = testutil::uniform_int(rng, 1, 2);
            for (int i = 0; i < ion_count && next_ion < pool.size(); ++i)
                well.ions.push_back(std::string(1, pool[next_ion++]));
            if (well.ions.empty()) continue;
            config.wells.push_back(well);
        }
        if (config.wells.empty()) continue;

        REQUIRE_NOTHROW(config.validate());
        std::string text = trap::format_configuration(config);
        trap::WellConfiguration back = trap::parse_configuration(text);
        CHECK(back == config);
        // Formatting is a fixed point.
        CHECK(trap::format_configuration(back) == text);
    }
}
