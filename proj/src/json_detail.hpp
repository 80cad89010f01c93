#pragma once

// Internal JSON helpers shared by the serialization code in src/. Not part
// of the public headers so that json.hpp stays out of the library interface.

#include <json.hpp>

#include "qccd/primitives.hpp"
#include "qccd/quantity.hpp"

namespace qccd::detail {

inline nlohmann::json quantity_to_json(const Quantity& q) {
    return {{"value", q.value}, {"sigma", q.sigma}};
}

inline Quantity quantity_from_json(const nlohmann::json& j) {
    return Quantity(j.at("value").get<double>(), j.value("sigma", 0.0));
}

inline nlohmann::json endpoint_to_json(const shuttle::EndpointMeasurement& m) {
    return {{"config", trap::format_configuration(m.config)},
            {"ion", m.ion},
            {"mode", m.mode},
            {"value", m.nbar.value},
            {"sigma", m.nbar.sigma}};
}

inline shuttle::EndpointMeasurement endpoint_from_json(
    const nlohmann::json& j) {
    shuttle::EndpointMeasurement m;
    m.config = trap::parse_configuration(j.at("config").get<std::string>());
    m.ion = j.value("ion", std::string());
    m.mode = j.at("mode").get<std::string>();
    m.nbar = quantity_from_json(j);
    return m;
}

// Serializes a fully instantiated primitive (characterization test blocks
// are library-level data and are not carried by instances).
inline nlohmann::json primitive_to_json(const shuttle::TransportPrimitive& p) {
    nlohmann::json j{{"name", p.name},
                     {"kind", shuttle::to_string(p.kind)},
                     {"initial", trap::format_configuration(p.initial)},
                     {"final", trap::format_configuration(p.final)},
                     {"duration_us", p.duration_us},
                     {"table_row", p.table_row}};
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [ion, d] : p.per_ion_distance_um) dist[ion] = d;
    j["distance_um"] = dist;
    if (p.mover_dnp) j["mover_dnp"] = quantity_to_json(*p.mover_dnp);
    if (p.spectator_dnp)
        j["spectator_dnp"] = quantity_to_json(*p.spectator_dnp);
    if (!p.endpoints.empty()) {
        nlohmann::json eps = nlohmann::json::array();
        for (const auto& e : p.endpoints) eps.push_back(endpoint_to_json(e));
        j["endpoints"] = eps;
    }
    return j;
}

inline shuttle::TransportPrimitive primitive_from_json(
    const nlohmann::json& j) {
    shuttle::TransportPrimitive p;
    p.name = j.at("name").get<std::string>();
    p.kind = shuttle::primitive_kind_from_string(j.at("kind").get<std::string>());
    p.initial = trap::parse_configuration(j.at("initial").get<std::string>());
    p.final = trap::parse_configuration(j.at("final").get<std::string>());
    p.duration_us = j.at("duration_us").get<double>();
    p.table_row = j.value("table_row", 0);
    for (const auto& [ion, d] : j.at("distance_um").items())
        p.per_ion_distance_um[ion] = d.get<double>();
    if (j.contains("mover_dnp"))
        p.mover_dnp = quantity_from_json(j.at("mover_dnp"));
    if (j.contains("spectator_dnp"))
        p.spectator_dnp = quantity_from_json(j.at("spectator_dnp"));
    if (j.contains("endpoints"))
        for (const auto& e : j.at("endpoints"))
            p.endpoints.push_back(endpoint_from_json(e));
    return p;
}

}  // namespace qccd::detail
