#include "qccd/well_config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "qccd/constants.hpp"

namespace qccd::trap {

IonId make_be9(std::string label) {
    return IonId{std::move(label), "Be-9", constants::mass_be9};
}

namespace {

const std::set<std::string>& zone_labels() {
    static const std::set<std::string> labels = {"L", "A", "S", "B", "R",
                                                 "C", "C'", "H", "V"};
    return labels;
}

bool is_ion_char(char c) {
    return c >= 'a' && c <= 'z';
}

}  // namespace

bool is_zone_label(const std::string& label) {
    return zone_labels().count(label) != 0;
}

std::vector<std::string> WellConfiguration::ion_labels() const {
    std::vector<std::string> out;
    for (const auto& w : wells)
        out.insert(out.end(), w.ions.begin(), w.ions.end());
    return out;
}

const Well& WellConfiguration::well_of(const std::string& ion) const {
    for (const auto& w : wells)
        if (std::find(w.ions.begin(), w.ions.end(), ion) != w.ions.end())
            return w;
    throw std::invalid_argument("ion '" + ion + "' not in configuration");
}

bool WellConfiguration::holds(const std::string& ion) const {
    for (const auto& w : wells)
        if (std::find(w.ions.begin(), w.ions.end(), ion) != w.ions.end())
            return true;
    return false;
}

void WellConfiguration::validate() const {
    std::set<std::string> zones;
    std::set<std::string> ions;
    for (const auto& w : wells) {
        if (!is_zone_label(w.zone))
            throw std::invalid_argument("unknown zone label '" + w.zone + "'");
        if (!zones.insert(w.zone).second)
            throw std::invalid_argument("zone '" + w.zone +
                                        "' appears in two wells");
        if (w.ions.empty())
            throw std::invalid_argument("well at zone '" + w.zone +
                                        "' holds no ions");
        for (const auto& ion : w.ions)
            if (!ions.insert(ion).second)
                throw std::invalid_argument("ion '" + ion +
                                            "' appears twice");
    }
}

WellConfiguration parse_configuration(const std::string& text) {
    WellConfiguration config;
    std::set<std::string> zones_seen;
    std::set<char> ions_seen;

    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        const std::size_t zone_start = i;
        // Zone label: one uppercase letter, optionally primed (C').
        if (!std::isupper(static_cast<unsigned char>(text[i])))
            throw ConfigParseError("expected zone label", i);
        std::string zone(1, text[i]);
        ++i;
        if (i < n && text[i] == '\'') {
            zone += '\'';
            ++i;
        }
        if (!is_zone_label(zone))
            throw ConfigParseError("unknown zone label '" + zone + "'",
                                   zone_start);
        if (!zones_seen.insert(zone).second)
            throw ConfigParseError("zone '" + zone + "' appears in two wells",
                                   zone_start);
        if (i >= n || text[i] != '_')
            throw ConfigParseError("expected '_' after zone label", i);
        ++i;
        Well well;
        well.zone = zone;
        while (i < n && is_ion_char(text[i])) {
            if (!ions_seen.insert(text[i]).second)
                throw ConfigParseError(
                    std::string("ion '") + text[i] + "' appears twice", i);
            well.ions.emplace_back(1, text[i]);
            ++i;
        }
        if (well.ions.empty())
            throw ConfigParseError("empty ion subscript", i);
        config.wells.push_back(std::move(well));
    }
    if (config.wells.empty())
        throw ConfigParseError("configuration is empty", 0);
    return config;
}

std::string format_configuration(const WellConfiguration& config) {
    std::string out;
    for (std::size_t k = 0; k < config.wells.size(); ++k) {
        if (k) out += ' ';
        out += config.wells[k].zone;
        out += '_';
        for (const auto& ion : config.wells[k].ions) out += ion;
    }
    return out;
}

}  // namespace qccd::trap
