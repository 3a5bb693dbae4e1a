#pragma once

// JSON / CSV serialization of measures, plans, and diagnostic reports.
// Numbers are printed with 17 significant digits so exact-mode artifacts are
// byte-stable across runs.

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ergodiag/coupling.hpp"
#include "ergodiag/diagnostics.hpp"
#include "ergodiag/distribution.hpp"
#include "ergodiag/kernel.hpp"
#include "ergodiag/stability.hpp"
#include "ergodiag/transport.hpp"

namespace ergodiag {

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// FNV-1a, used to stamp artifacts with their generating configuration.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline nlohmann::json to_json(const SparseDistribution& d) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& [s, w] : d.atoms())
        atoms.push_back({{"state", s.to_string()}, {"weight", format_real(w)}});
    return atoms;
}

inline nlohmann::json to_json(const Trajectory& t) {
    nlohmann::json jumps = nlohmann::json::array();
    for (std::size_t i = 0; i < t.states.size(); ++i)
        jumps.push_back({{"time", format_real(t.jump_times[i])},
                         {"state", t.states[i].to_string()}});
    return {{"horizon", format_real(t.horizon)}, {"jumps", jumps}};
}

inline nlohmann::json to_json(const TransportPlan& plan) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : plan.entries)
        entries.push_back({{"source", plan.sources[e.source].to_string()},
                           {"target", plan.targets[e.target].to_string()},
                           {"mass", format_real(e.mass)}});
    return entries;
}

inline nlohmann::json to_json(const Curve& c) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : c)
        pts.push_back({{"x", format_real(p.x)},
                       {"value", format_real(p.value)},
                       {"sigma", format_real(p.sigma)}});
    return pts;
}

inline nlohmann::json to_json(const DiagnosticReport& r) {
    nlohmann::json curves = nlohmann::json::object();
    for (const auto& [name, curve] : r.curves) curves[name] = to_json(curve);
    nlohmann::json tol = nlohmann::json::object();
    for (const auto& [name, v] : r.tolerances) tol[name] = format_real(v);
    return {{"condition", r.condition}, {"model", r.model_id},
            {"verdict", verdict_name(r.verdict)}, {"curves", curves},
            {"tolerances", tol},  {"notes", r.notes},
            {"seed", r.seed},     {"exact_mode", r.exact_mode}};
}

inline nlohmann::json to_json(const StabilityReport& r) {
    return {{"model", r.model_id},
            {"family", r.family_name},
            {"asymptotic_stability", to_json(r.as)},
            {"mean_ergodicity", to_json(r.me)},
            {"evc", to_json(r.evc)},
            {"evc_cesaro", to_json(r.evc_cesaro)},
            {"c1", to_json(r.c1)},
            {"c2", to_json(r.c2)},
            {"h1", to_json(r.h1)},
            {"equivalence_enforced", r.equivalence_enforced},
            {"consistent", r.consistent},
            {"notes", r.notes}};
}

inline nlohmann::json to_json(const TailBoundReport& r) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : r.blocks)
        blocks.push_back({{"block", b.block},
                          {"horizon_steps", b.horizon_steps},
                          {"entry_rate", format_real(b.entry_rate)},
                          {"survival", format_real(b.survival)},
                          {"bound", format_real(b.bound)},
                          {"sigma", format_real(b.sigma)},
                          {"pass", b.pass}});
    return {{"gamma", format_real(r.gamma)}, {"inconclusive", r.inconclusive},
            {"all_pass", r.all_pass},        {"blocks", blocks}};
}

// CSV with a header row; one block per named curve.
inline std::string curves_to_csv(const DiagnosticReport& r) {
    std::ostringstream os;
    os << "curve,x,value,sigma\n";
    for (const auto& [name, curve] : r.curves)
        for (const auto& p : curve)
            os << name << ',' << format_real(p.x) << ',' << format_real(p.value) << ','
               << format_real(p.sigma) << '\n';
    return os.str();
}

}  // namespace ergodiag
