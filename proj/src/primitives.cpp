#include "qccd/primitives.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "json_detail.hpp"

namespace qccd::shuttle {

using nlohmann::json;
using detail::endpoint_from_json;
using detail::quantity_from_json;

std::string to_string(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Shuttle: return "shuttle";
        case PrimitiveKind::Separate: return "separate";
        case PrimitiveKind::Recombine: return "recombine";
        case PrimitiveKind::RotateWell: return "rotate_well";
    }
    throw std::logic_error("unreachable primitive kind");
}

PrimitiveKind primitive_kind_from_string(const std::string& s) {
    if (s == "shuttle") return PrimitiveKind::Shuttle;
    if (s == "separate") return PrimitiveKind::Separate;
    if (s == "recombine") return PrimitiveKind::Recombine;
    if (s == "rotate_well") return PrimitiveKind::RotateWell;
    throw std::invalid_argument("unknown primitive kind '" + s + "'");
}

std::vector<std::string> TransportPrimitive::moving_ions() const {
    std::vector<std::string> out;
    for (const auto& ion : initial.ion_labels())
        if (initial.well_of(ion).zone != final.well_of(ion).zone)
            out.push_back(ion);
    return out;
}

std::vector<std::string> TransportPrimitive::stationary_ions() const {
    std::vector<std::string> out;
    for (const auto& ion : initial.ion_labels())
        if (initial.well_of(ion).zone == final.well_of(ion).zone)
            out.push_back(ion);
    return out;
}

void TransportPrimitive::validate() const {
    initial.validate();
    final.validate();
    auto a = initial.ion_labels();
    auto b = final.ion_labels();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b)
        throw std::invalid_argument("primitive '" + name +
                                    "' changes the ion set");
    if (!(duration_us > 0.0))
        throw std::invalid_argument("primitive '" + name +
                                    "' needs a positive duration");
    const auto n_in = initial.wells.size();
    const auto n_out = final.wells.size();
    switch (kind) {
        case PrimitiveKind::Separate:
            if (n_in != 1 || n_out != 2)
                throw std::invalid_argument(
                    "separate must take one well to two wells");
            break;
        case PrimitiveKind::Recombine:
            if (n_in != 2 || n_out != 1)
                throw std::invalid_argument(
                    "recombine must take two wells to one well");
            break;
        case PrimitiveKind::RotateWell: {
            if (n_in != n_out)
                throw std::invalid_argument(
                    "rotate_well must keep the well count");
            for (std::size_t i = 0; i < n_in; ++i) {
                const auto& w0 = initial.wells[i];
                const auto& w1 = final.wells[i];
                if (w0.ions != w1.ions)
                    throw std::invalid_argument(
                        "rotate_well must keep ion order");
                const bool same = w0.zone == w1.zone;
                const bool swapped =
                    (w0.zone == "C" && w1.zone == "C'") ||
                    (w0.zone == "C'" && w1.zone == "C");
                if (!same && !swapped)
                    throw std::invalid_argument(
                        "rotate_well may only exchange C and C'");
            }
            break;
        }
        case PrimitiveKind::Shuttle:
            if (n_in != n_out)
                throw std::invalid_argument(
                    "shuttle must keep the well count");
            break;
    }
    for (const auto& [ion, dist] : per_ion_distance_um) {
        if (!initial.holds(ion))
            throw std::invalid_argument("distance listed for unknown ion '" +
                                        ion + "'");
        if (dist < 0.0)
            throw std::invalid_argument("negative distance for ion '" + ion +
                                        "'");
    }
}

PrimitiveLibrary PrimitiveLibrary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open primitive table '" + path +
                                 "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string PrimitiveLibrary::default_path(const std::string& override_path) {
    if (!override_path.empty()) return override_path;
    if (const char* env = std::getenv("QCCD_TABLE1"); env && *env)
        return env;
    return QCCD_DEFAULT_TABLE1;
}

PrimitiveLibrary PrimitiveLibrary::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "qccd-primitive-table")
        throw std::invalid_argument("not a qccd-primitive-table document");

    PrimitiveLibrary lib;
    const auto& prep = j.at("preparation");
    lib.preparation_.single_ion_axial =
        quantity_from_json(prep.at("single_ion_axial"));
    lib.preparation_.two_ion_com = quantity_from_json(prep.at("two_ion_com"));
    lib.preparation_.two_ion_str = quantity_from_json(prep.at("two_ion_str"));
    if (j.contains("mode_frequencies_mhz")) {
        const auto& f = j.at("mode_frequencies_mhz");
        lib.com_mhz_ = f.value("com", 3.6);
        lib.str_mhz_ = f.value("str", 6.2);
    }

    for (const auto& row : j.at("rows")) {
        TransportPrimitive p;
        p.table_row = row.value("row", 0);
        p.name = row.at("name").get<std::string>();
        p.kind = primitive_kind_from_string(row.at("kind").get<std::string>());
        p.initial =
            trap::parse_configuration(row.at("initial").get<std::string>());
        p.final =
            trap::parse_configuration(row.at("final").get<std::string>());
        p.duration_us = row.at("duration_us").get<double>();
        for (const auto& [ion, dist] : row.at("distance_um").items())
            p.per_ion_distance_um[ion] = dist.get<double>();
        if (row.contains("mover_dnp"))
            p.mover_dnp = quantity_from_json(row.at("mover_dnp"));
        if (row.contains("spectator_dnp"))
            p.spectator_dnp = quantity_from_json(row.at("spectator_dnp"));
        if (row.contains("endpoints"))
            for (const auto& e : row.at("endpoints"))
                p.endpoints.push_back(endpoint_from_json(e));
        if (row.contains("tests")) {
            for (const auto& t : row.at("tests")) {
                PrimitiveTest test;
                test.derives = t.value("derives", std::string("none"));
                for (const auto& c : t.at("sequence"))
                    test.sequence.push_back(
                        trap::parse_configuration(c.get<std::string>()));
                test.measure_at = t.at("measure_at").get<std::size_t>();
                test.measured = endpoint_from_json(t.at("measured"));
                if (test.measure_at >= test.sequence.size())
                    throw std::invalid_argument(
                        "test measure_at outside its sequence in '" + p.name +
                        "'");
                p.tests.push_back(std::move(test));
            }
        }
        p.validate();
        lib.primitives_.push_back(std::move(p));
    }

    std::set<std::string> names;
    for (const auto& p : lib.primitives_)
        if (!names.insert(p.name).second)
            throw std::invalid_argument("duplicate primitive name '" + p.name +
                                        "'");
    return lib;
}

const TransportPrimitive& PrimitiveLibrary::by_name(
    const std::string& name) const {
    for (const auto& p : primitives_)
        if (p.name == name) return p;
    throw std::invalid_argument("no primitive named '" + name + "'");
}

bool PrimitiveLibrary::has(const std::string& name) const {
    for (const auto& p : primitives_)
        if (p.name == name) return true;
    return false;
}

void PrimitiveLibrary::validate_against(const trap::TrapGraph& graph) const {
    for (const auto& p : primitives_) {
        for (const auto& config : {p.initial, p.final})
            for (const auto& well : config.wells)
                if (!graph.has_zone(well.zone))
                    throw std::invalid_argument(
                        "primitive '" + p.name + "' uses zone '" + well.zone +
                        "' absent from the trap graph");
    }
}

}  // namespace qccd::shuttle
