#include "qccd/sequence.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "json_detail.hpp"

namespace qccd::shuttle {

using nlohmann::json;
using trap::Well;
using trap::WellConfiguration;

namespace {

std::map<std::string, std::vector<std::string>> well_map(
    const WellConfiguration& c) {
    std::map<std::string, std::vector<std::string>> m;
    for (const auto& w : c.wells) m[w.zone] = w.ions;
    return m;
}

}  // namespace

bool same_configuration(const WellConfiguration& x,
                        const WellConfiguration& y) {
    return well_map(x) == well_map(y);
}

const WellConfiguration& ShuttleSequence::final_configuration() const {
    return steps.empty() ? initial : steps.back().primitive.final;
}

std::vector<WellConfiguration> ShuttleSequence::configuration_chain() const {
    std::vector<WellConfiguration> chain{initial};
    for (const auto& s : steps) chain.push_back(s.primitive.final);
    return chain;
}

std::string ShuttleSequence::chain_string() const {
    std::string out;
    for (const auto& c : configuration_chain()) {
        if (!out.empty()) out += " -> ";
        out += trap::format_configuration(c);
    }
    return out;
}

ValidationReport validate_sequence(const ShuttleSequence& seq) {
    ValidationReport report;
    auto fail = [&](std::size_t boundary, std::string message) {
        report.ok = false;
        report.violation_boundary = boundary;
        report.message = std::move(message);
        return report;
    };

    try {
        seq.initial.validate();
    } catch (const std::exception& e) {
        return fail(0, std::string("initial configuration invalid: ") +
                           e.what());
    }
    auto ions = seq.initial.ion_labels();
    std::sort(ions.begin(), ions.end());

    const WellConfiguration* prev = &seq.initial;
    for (std::size_t k = 0; k < seq.steps.size(); ++k) {
        const auto& p = seq.steps[k].primitive;
        try {
            p.validate();
        } catch (const std::exception& e) {
            return fail(k, "step " + std::to_string(k) + " (" + p.name +
                               ") invalid: " + e.what());
        }
        if (!same_configuration(*prev, p.initial))
            return fail(k, "contiguity violation at boundary " +
                               std::to_string(k) + ": '" +
                               trap::format_configuration(*prev) +
                               "' does not match '" +
                               trap::format_configuration(p.initial) + "'");
        auto step_ions = p.initial.ion_labels();
        std::sort(step_ions.begin(), step_ions.end());
        if (step_ions != ions)
            return fail(k, "ion set changes at step " + std::to_string(k));
        prev = &p.final;
    }
    return report;
}

ShuttleSequence reverse_sequence(const ShuttleSequence& seq) {
    ShuttleSequence out;
    out.initial = seq.final_configuration();
    const std::size_t n = seq.steps.size();
    out.steps.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        SequenceStep step = seq.steps[n - 1 - j];
        std::swap(step.primitive.initial, step.primitive.final);
        if (step.primitive.kind == PrimitiveKind::Separate)
            step.primitive.kind = PrimitiveKind::Recombine;
        else if (step.primitive.kind == PrimitiveKind::Recombine)
            step.primitive.kind = PrimitiveKind::Separate;
        step.reversed = !step.reversed;
        // Idle gaps sit between steps; the gap after reversed step j is the
        // gap that preceded the corresponding forward step. The trailing
        // annotation (if any) stays trailing so totals are preserved and
        // reversing twice is the identity.
        step.idle_after_us = (j + 1 < n) ? seq.steps[n - 2 - j].idle_after_us
                                         : seq.steps[n - 1].idle_after_us;
        out.steps.push_back(std::move(step));
    }
    return out;
}

SequenceTotals totals(const ShuttleSequence& seq) {
    SequenceTotals t;
    for (const auto& ion : seq.initial.ion_labels())
        t.per_ion_distance_um[ion] = 0.0;
    for (const auto& s : seq.steps) {
        t.duration_us += s.primitive.duration_us + s.idle_after_us;
        for (const auto& [ion, d] : s.primitive.per_ion_distance_um)
            t.per_ion_distance_um[ion] += d;
    }
    return t;
}

std::map<std::string, IonPlacement> net_permutation(
    const ShuttleSequence& seq) {
    std::map<std::string, IonPlacement> out;
    const auto& last = seq.final_configuration();
    for (const auto& ion : seq.initial.ion_labels()) {
        IonPlacement p;
        const auto& w0 = seq.initial.well_of(ion);
        p.start_zone = w0.zone;
        p.start_index = static_cast<std::size_t>(
            std::find(w0.ions.begin(), w0.ions.end(), ion) - w0.ions.begin());
        const auto& w1 = last.well_of(ion);
        p.end_zone = w1.zone;
        p.end_index = static_cast<std::size_t>(
            std::find(w1.ions.begin(), w1.ions.end(), ion) - w1.ions.begin());
        out[ion] = p;
    }
    return out;
}

namespace {

using Renaming = std::map<std::string, std::string>;

std::optional<std::string> renamed(const Renaming& rho,
                                   const std::string& ion) {
    auto it = rho.find(ion);
    if (it == rho.end()) return std::nullopt;
    return it->second;
}

// Aligns `part` against `context` zone by zone, inferring the ion renaming
// positionally within each well. Returns nullopt when a zone or ion count
// does not line up or the renaming would not be injective.
std::optional<Renaming> match_subset(const WellConfiguration& part,
                                     const WellConfiguration& context) {
    auto ctx = well_map(context);
    Renaming rho;
    std::set<std::string> used;
    for (const auto& w : part.wells) {
        auto it = ctx.find(w.zone);
        if (it == ctx.end() || it->second.size() != w.ions.size())
            return std::nullopt;
        for (std::size_t i = 0; i < w.ions.size(); ++i) {
            const auto& from = w.ions[i];
            const auto& to = it->second[i];
            auto existing = rho.find(from);
            if (existing != rho.end()) {
                if (existing->second != to) return std::nullopt;
            } else {
                if (!used.insert(to).second) return std::nullopt;
                rho[from] = to;
            }
        }
    }
    return rho;
}

WellConfiguration rename_configuration(const WellConfiguration& c,
                                       const Renaming& rho) {
    WellConfiguration out = c;
    for (auto& w : out.wells)
        for (auto& ion : w.ions)
            if (auto r = renamed(rho, ion)) ion = *r;
    return out;
}

// Checks that every well of `part` (renamed) appears verbatim in `context`.
bool contains_renamed(const WellConfiguration& part, const Renaming& rho,
                      const WellConfiguration& context) {
    auto ctx = well_map(context);
    for (const auto& w : part.wells) {
        auto it = ctx.find(w.zone);
        if (it == ctx.end()) return false;
        if (it->second.size() != w.ions.size()) return false;
        for (std::size_t i = 0; i < w.ions.size(); ++i) {
            auto r = renamed(rho, w.ions[i]);
            if (!r || *r != it->second[i]) return false;
        }
    }
    return true;
}

std::map<std::string, std::vector<std::string>> remainder_wells(
    const WellConfiguration& context, const WellConfiguration& part) {
    auto m = well_map(context);
    for (const auto& w : part.wells) m.erase(w.zone);
    return m;
}

// The primitive as seen when traversed in the requested direction.
struct Oriented {
    const TransportPrimitive* p = nullptr;
    bool reversed = false;

    const WellConfiguration& from() const {
        return reversed ? p->final : p->initial;
    }
    const WellConfiguration& to() const {
        return reversed ? p->initial : p->final;
    }
};

struct Candidate {
    Oriented oriented;
    Renaming rho;
    std::size_t remainder_size = 0;
};

std::optional<Candidate> try_match(const Oriented& o,
                                   const WellConfiguration& from,
                                   const WellConfiguration& to) {
    auto rho = match_subset(o.from(), from);
    if (!rho) return std::nullopt;
    if (!contains_renamed(o.to(), *rho, to)) return std::nullopt;
    auto rem_from = remainder_wells(from, rename_configuration(o.from(), *rho));
    auto rem_to = remainder_wells(to, rename_configuration(o.to(), *rho));
    if (rem_from != rem_to) return std::nullopt;
    Candidate c;
    c.oriented = o;
    c.rho = *rho;
    c.remainder_size = rem_from.size();
    return c;
}

// Deterministic preference: exact full-configuration matches first, then
// forward over reversed, then lower table row.
bool better(const Candidate& a, const Candidate& b) {
    auto key = [](const Candidate& c) {
        return std::tuple(c.remainder_size, c.oriented.reversed ? 1 : 0,
                          c.oriented.p->table_row, c.oriented.p->name);
    };
    return key(a) < key(b);
}

std::optional<Candidate> best_single(const WellConfiguration& from,
                                     const WellConfiguration& to,
                                     const PrimitiveLibrary& library) {
    std::optional<Candidate> best;
    for (const auto& p : library.primitives()) {
        for (bool rev : {false, true}) {
            auto c = try_match(Oriented{&p, rev}, from, to);
            if (c && (!best || better(*c, *best))) best = c;
        }
    }
    return best;
}

TransportPrimitive instantiate(const Candidate& c,
                               const WellConfiguration& from,
                               const WellConfiguration& to) {
    const TransportPrimitive& lib = *c.oriented.p;
    TransportPrimitive out;
    out.name = lib.name;
    out.table_row = lib.table_row;
    out.kind = lib.kind;
    if (c.oriented.reversed) {
        if (lib.kind == PrimitiveKind::Separate)
            out.kind = PrimitiveKind::Recombine;
        else if (lib.kind == PrimitiveKind::Recombine)
            out.kind = PrimitiveKind::Separate;
    }
    out.initial = from;
    out.final = to;
    out.duration_us = lib.duration_us;
    for (const auto& [ion, d] : lib.per_ion_distance_um) {
        auto r = renamed(c.rho, ion);
        out.per_ion_distance_um[r ? *r : ion] = d;
    }
    out.mover_dnp = lib.mover_dnp;
    out.spectator_dnp = lib.spectator_dnp;
    for (auto e : lib.endpoints) {
        e.config = rename_configuration(e.config, c.rho);
        if (!e.ion.empty())
            if (auto r = renamed(c.rho, e.ion)) e.ion = *r;
        out.endpoints.push_back(std::move(e));
    }
    return out;
}

// Applies an oriented, renamed primitive to `from`, producing the reached
// configuration with untouched wells preserved. Wells are ordered by the
// smallest ion label they hold, which reproduces the conventional printed
// order (the well of ion a ahead of the well of ion b).
WellConfiguration apply_candidate(const Candidate& c,
                                  const WellConfiguration& from) {
    auto rem = remainder_wells(from, rename_configuration(c.oriented.from(),
                                                          c.rho));
    WellConfiguration out = rename_configuration(c.oriented.to(), c.rho);
    for (const auto& [zone, ions] : rem) out.wells.push_back({zone, ions});
    std::sort(out.wells.begin(), out.wells.end(),
              [](const Well& x, const Well& y) {
                  return *std::min_element(x.ions.begin(), x.ions.end()) <
                         *std::min_element(y.ions.begin(), y.ions.end());
              });
    return out;
}

std::string direction_tag(const Oriented& o) {
    return o.reversed ? o.p->name + "~" : o.p->name;
}

std::optional<SequenceStep> fused_step(const WellConfiguration& from,
                                       const WellConfiguration& to,
                                       const PrimitiveLibrary& library) {
    std::optional<SequenceStep> best;
    std::optional<std::tuple<int, int, int, int>> best_key;
    for (const auto& p1 : library.primitives()) {
        for (bool rev1 : {false, true}) {
            Oriented o1{&p1, rev1};
            auto rho1 = match_subset(o1.from(), from);
            if (!rho1) continue;
            Candidate c1{o1, *rho1, 0};
            WellConfiguration mid = apply_candidate(c1, from);
            if (same_configuration(mid, from)) continue;
            auto c2 = best_single(mid, to, library);
            if (!c2) continue;
            auto key = std::tuple(p1.table_row, rev1 ? 1 : 0,
                                  c2->oriented.p->table_row,
                                  c2->oriented.reversed ? 1 : 0);
            if (best_key && key >= *best_key) continue;

            TransportPrimitive first = instantiate(c1, from, mid);
            TransportPrimitive second = instantiate(*c2, mid, to);
            auto movers1 = first.moving_ions();
            auto movers2 = second.moving_ions();
            std::sort(movers1.begin(), movers1.end());
            std::sort(movers2.begin(), movers2.end());
            if (movers1 != movers2) continue;

            TransportPrimitive fused;
            fused.name = direction_tag(o1) + "+" + direction_tag(c2->oriented);
            fused.kind = PrimitiveKind::Shuttle;
            fused.initial = from;
            fused.final = to;
            fused.duration_us = first.duration_us + second.duration_us;
            fused.table_row = 0;
            for (const auto& ion : from.ion_labels()) {
                double d = 0.0;
                if (auto it = first.per_ion_distance_um.find(ion);
                    it != first.per_ion_distance_um.end())
                    d += it->second;
                if (auto it = second.per_ion_distance_um.find(ion);
                    it != second.per_ion_distance_um.end())
                    d += it->second;
                fused.per_ion_distance_um[ion] = d;
            }
            if (first.mover_dnp && second.mover_dnp)
                fused.mover_dnp = *first.mover_dnp + *second.mover_dnp;
            if (first.spectator_dnp && second.spectator_dnp)
                fused.spectator_dnp =
                    *first.spectator_dnp + *second.spectator_dnp;

            SequenceStep step;
            step.primitive = std::move(fused);
            step.reversed = false;
            step.source = step.primitive.name;
            best = std::move(step);
            best_key = key;
        }
    }
    return best;
}

}  // namespace

SequenceStep compile_step(const WellConfiguration& from,
                          const WellConfiguration& to,
                          const PrimitiveLibrary& library) {
    if (auto c = best_single(from, to, library)) {
        SequenceStep step;
        step.primitive = instantiate(*c, from, to);
        step.reversed = c->oriented.reversed;
        step.source = direction_tag(c->oriented);
        return step;
    }
    if (auto fused = fused_step(from, to, library)) return *fused;
    throw std::runtime_error("no primitive takes '" +
                             trap::format_configuration(from) + "' to '" +
                             trap::format_configuration(to) + "'");
}

ShuttleSequence compile_chain(const std::vector<WellConfiguration>& chain,
                              const PrimitiveLibrary& library) {
    if (chain.empty())
        throw std::invalid_argument("cannot compile an empty chain");
    ShuttleSequence seq;
    seq.initial = chain.front();
    for (std::size_t k = 0; k + 1 < chain.size(); ++k)
        seq.steps.push_back(compile_step(chain[k], chain[k + 1], library));
    auto report = validate_sequence(seq);
    if (!report)
        throw std::runtime_error("compiled chain fails validation: " +
                                 report.message);
    return seq;
}

ShuttleSequence compile_chain(const std::vector<std::string>& chain,
                              const PrimitiveLibrary& library) {
    std::vector<WellConfiguration> parsed;
    parsed.reserve(chain.size());
    for (const auto& text : chain)
        parsed.push_back(trap::parse_configuration(text));
    return compile_chain(parsed, library);
}

namespace {

// Substitutes concrete ion labels into a chain template written with the
// placeholders '1' and '2'.
std::vector<std::string> substitute_chain(
    const std::vector<std::string>& templ, const std::string& first,
    const std::string& second) {
    std::vector<std::string> out;
    out.reserve(templ.size());
    for (const auto& t : templ) {
        std::string s;
        for (char ch : t) {
            if (ch == '1')
                s += first;
            else if (ch == '2')
                s += second;
            else
                s += ch;
        }
        out.push_back(std::move(s));
    }
    return out;
}

void require_ion_label(const std::string& label) {
    if (label.size() != 1 || label[0] < 'a' || label[0] > 'z')
        throw std::invalid_argument("ion label must be one lowercase letter, "
                                    "got '" +
                                    label + "'");
}

}  // namespace

ShuttleSequence compile_reorder(const std::string& first,
                                const std::string& second,
                                const PrimitiveLibrary& library) {
    require_ion_label(first);
    require_ion_label(second);
    if (first == second)
        throw std::invalid_argument("reordering needs two distinct ions");
    static const std::vector<std::string> templ = {
        "S_12",    "A_1 B_2", "A_1 C_2", "A_1 V_2", "C_1 V_2", "H_1 V_2",
        "H_1 C_2", "H_1 A_2", "C_1 A_2", "B_1 A_2", "S_21"};
    return compile_chain(substitute_chain(templ, first, second), library);
}

ShuttleSequence compile_individual_address(const std::string& ion_in_a,
                                           const std::string& ion_in_b,
                                           const std::string& target,
                                           const PrimitiveLibrary& library) {
    require_ion_label(ion_in_a);
    require_ion_label(ion_in_b);
    if (ion_in_a == ion_in_b)
        throw std::invalid_argument("the two wells must hold distinct ions");
    if (target != ion_in_a && target != ion_in_b)
        throw std::invalid_argument("target ion '" + target +
                                    "' is not held in A or B");
    static const std::vector<std::string> templ = {
        "A_1 B_2", "S_1 R_2", "A_1 B_2", "L_1 S_2", "A_1 B_2"};
    auto seq = compile_chain(substitute_chain(templ, ion_in_a, ion_in_b),
                             library);
    // Pulses may be applied whenever an ion sits in the interaction zone S.
    seq.steps[0].markers.push_back({ion_in_a});
    seq.steps[2].markers.push_back({ion_in_b});
    return seq;
}

std::string sequence_to_json_text(const ShuttleSequence& seq) {
    json j{{"format", "qccd-sequence"},
           {"version", 1},
           {"initial", trap::format_configuration(seq.initial)}};
    json steps = json::array();
    for (const auto& s : seq.steps) {
        json step{{"source", s.source},
                  {"reversed", s.reversed},
                  {"idle_after_us", s.idle_after_us},
                  {"primitive", detail::primitive_to_json(s.primitive)}};
        json markers = json::array();
        for (const auto& m : s.markers) markers.push_back(m.ion);
        step["markers"] = markers;
        steps.push_back(std::move(step));
    }
    j["steps"] = steps;
    return j.dump(2) + "\n";
}

ShuttleSequence sequence_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "qccd-sequence")
        throw std::invalid_argument("not a qccd-sequence document");
    ShuttleSequence seq;
    seq.initial =
        trap::parse_configuration(j.at("initial").get<std::string>());
    for (const auto& js : j.at("steps")) {
        SequenceStep s;
        s.source = js.value("source", std::string());
        s.reversed = js.value("reversed", false);
        s.idle_after_us = js.value("idle_after_us", 0.0);
        s.primitive = detail::primitive_from_json(js.at("primitive"));
        if (js.contains("markers"))
            for (const auto& m : js.at("markers"))
                s.markers.push_back({m.get<std::string>()});
        seq.steps.push_back(std::move(s));
    }
    return seq;
}

}  // namespace qccd::shuttle
