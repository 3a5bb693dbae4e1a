#pragma once

// The model zoo: the absorbing dyadic chain, the iterated-function-system x
// rotation process on R+ x T, the lattice counterexample without invariant
// measure, and the heavy-tailed initial law with its divergence certificate.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergodiag/distribution.hpp"
#include "ergodiag/kernel.hpp"
#include "ergodiag/rng.hpp"
#include "ergodiag/state.hpp"
#include "ergodiag/test_functions.hpp"

namespace ergodiag {

struct ModelDescriptor {
    std::string id;
    std::optional<CountableKernel> countable;
    std::optional<SamplingKernel> sampling;
    Metric metric;
    bool has_invariant_measure = false;
    std::optional<SparseDistribution> invariant_sparse;
    // <f, mu> for a non-sparse invariant measure (quadrature-based).
    std::function<double(const std::function<double(const State&)>&)> invariant_integrator;
    std::map<std::string, std::function<double(const std::vector<double>&)>> oracles;
    State default_start;
    State ball_center;
    std::vector<State> default_probes;
    // States at distance <= r from a center, used for the x' -> x limits.
    std::function<std::vector<State>(const State&, double)> probes_within;
};

inline double dyadic_V(const State& s) { return s.as<DyadicState>().value(); }

// Absorbing dyadic chain on {0} u {2^i}: p_{0,0} = 1, p_{2^i,0} = 1/2,
// p_{2^i,2^{i+1}} = 1/2. Invariant measure delta_0. Oracles: the exact n-step
// law and the alpha-moments 2^{alpha i} 2^{-(1-alpha) n}.
inline ModelDescriptor dyadic_chain() {
    ModelDescriptor m;
    m.id = "dyadic";
    CountableKernel k;
    k.name = "dyadic";
    k.row = [](const State& s) -> std::vector<Atom> {
        const auto& d = s.as<DyadicState>();
        if (d.is_zero()) return {{State(DyadicState::zero()), 1.0}};
        return {{State(DyadicState::zero()), 0.5}, {State(DyadicState::level(d.exp + 1)), 0.5}};
    };
    m.countable = k;
    m.sampling = sampling_from_countable(k);
    m.metric = absolute_metric();
    m.has_invariant_measure = true;
    m.invariant_sparse = SparseDistribution::delta(State(DyadicState::zero()));
    // args: (i, n, alpha) -> <V^alpha, P_n^* delta_{2^i}>
    m.oracles["alpha_moment"] = [](const std::vector<double>& args) {
        double i = args.at(0), n = args.at(1), alpha = args.at(2);
        if (alpha == 0.0) return 1.0;
        return std::exp2(alpha * i - (1.0 - alpha) * n);
    };
    // args: (i, n) -> mass remaining off the absorbing state
    m.oracles["escape_mass"] = [](const std::vector<double>& args) {
        return std::exp2(-args.at(1));
    };
    m.default_start = State(DyadicState::level(1));
    m.ball_center = State(DyadicState::zero());
    m.default_probes = {State(DyadicState::zero()), State(DyadicState::level(1)),
                        State(DyadicState::level(2)), State(DyadicState::level(10))};
    m.probes_within = [](const State& center, double r) {
        Metric d = absolute_metric();
        std::vector<State> out;
        std::vector<State> all = {State(DyadicState::zero())};
        for (int i = 1; i <= 24; ++i) all.push_back(State(DyadicState::level(i)));
        for (const auto& s : all)
            if (!(s == center) && d(s, center) <= r) out.push_back(s);
        return out;
    };
    return m;
}

// Exact n-step law of the dyadic chain from 2^i: {0: 1 - 2^-n, 2^{i+n}: 2^-n}.
inline SparseDistribution dyadic_exact_law(int i, int n) {
    if (i < 1 || n < 0) throw std::invalid_argument("dyadic_exact_law: bad (i, n)");
    if (n == 0) return SparseDistribution::delta(State(DyadicState::level(i)));
    double tail = std::exp2(-n);
    return SparseDistribution::from_atoms(
        {{State(DyadicState::zero()), 1.0 - tail}, {State(DyadicState::level(i + n)), tail}});
}

// Branch probabilities (p_1, p_2, p_3) of the IFS at radial coordinate x.
inline std::array<double, 3> ifs_probabilities(double x) {
    if (x < 0.0) throw std::domain_error("ifs_probabilities: x must be >= 0");
    std::array<double, 3> p;
    if (x < 2.0 / 3.0)
        p = {x / 2.0, 1.0 - x, x / 2.0};
    else if (x <= 1.5)
        p = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    else
        p = {1.0 / (2.0 * x), 1.0 - 1.0 / x, 1.0 / (2.0 * x)};
    for (double q : p)
        if (!(q >= 0.0 && q <= 1.0))
            throw std::logic_error("ifs_probabilities: branch weight outside [0,1] at x=" +
                                   std::to_string(x));
    return p;
}

// IFS on R+ coupled with unit-speed rotation on T. Jumps arrive with Exp(1)
// clocks; at a jump the radial part maps through w_1 = 0, w_2 = id, or
// w_3 = 1/x (with w_3(0) = 0), chosen by the piecewise probability table.
// Invariant measure delta_0 x Leb(T), integrated by quadrature on the circle.
inline ModelDescriptor ifs_torus() {
    ModelDescriptor m;
    m.id = "ifs";
    SamplingKernel k;
    k.name = "ifs";
    k.time_kind = TimeKind::JumpChain;
    k.sample_next = [](const State& s, RngStream& rng) {
        const auto& t = s.as<TorusPoint>();
        double hold = rng.exponential(1.0);
        auto p = ifs_probabilities(t.radial);
        int branch = rng.categorical(p);
        double x = t.radial;
        double next_x = branch == 0 ? 0.0 : (branch == 1 ? x : (x == 0.0 ? 0.0 : 1.0 / x));
        // The state entered at the jump carries the angle rotated through the
        // holding time; the flow continues the rotation until the next jump.
        return std::make_pair(State(TorusPoint::make(next_x, t.angle + hold)), hold);
    };
    k.flow = [](const State& s, double dt) {
        const auto& t = s.as<TorusPoint>();
        return State(TorusPoint::make(t.radial, t.angle + dt));
    };
    m.sampling = k;
    m.metric = cylinder_metric();
    m.has_invariant_measure = true;
    m.invariant_integrator = [](const std::function<double(const State&)>& f) {
        // (1/2pi) int f(0, y) dy by adaptive Simpson on [0, 2pi), abs tol 1e-10.
        std::function<double(double, double, double, double, double, double, int)> simpson =
            [&](double a, double b, double fa, double fm, double fb, double tol,
                int depth) -> double {
            double mid = 0.5 * (a + b);
            double lm = f(State(TorusPoint::make(0.0, 0.5 * (a + mid))));
            double rm = f(State(TorusPoint::make(0.0, 0.5 * (mid + b))));
            double left = (mid - a) / 6.0 * (fa + 4.0 * lm + fm);
            double right = (b - mid) / 6.0 * (fm + 4.0 * rm + fb);
            double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
                return left + right + (left + right - whole) / 15.0;
            return simpson(a, mid, fa, lm, fm, tol / 2.0, depth - 1) +
                   simpson(mid, b, fm, rm, fb, tol / 2.0, depth - 1);
        };
        double a = 0.0, b = kTwoPi;
        double fa = f(State(TorusPoint::make(0.0, a)));
        double fb = f(State(TorusPoint::make(0.0, b - 1e-14)));
        double fm = f(State(TorusPoint::make(0.0, 0.5 * (a + b))));
        return simpson(a, b, fa, fm, fb, 1e-10, 40) / kTwoPi;
    };
    m.default_start = State(TorusPoint::make(1.0, 1.0));
    m.ball_center = State(TorusPoint::make(0.0, 0.0));
    m.default_probes = {State(TorusPoint::make(0.0, 0.0)), State(TorusPoint::make(0.5, 2.0)),
                        State(TorusPoint::make(1.0, 4.0)), State(TorusPoint::make(2.0, 1.0))};
    m.probes_within = [](const State& center, double r) {
        const auto& c = center.as<TorusPoint>();
        std::vector<State> out;
        out.push_back(State(TorusPoint::make(c.radial + r / 2.0, c.angle)));
        out.push_back(State(TorusPoint::make(c.radial, c.angle + r / 2.0)));
        out.push_back(State(TorusPoint::make(c.radial + r / 4.0, c.angle - r / 4.0)));
        return out;
    };
    return m;
}

// Lattice counterexample: every branch advances the depth coordinate j by one,
// so no invariant measure exists. p1, p2 parameterize the branch weights and
// must satisfy p1(k) + p2(i,k) <= 1 on all visited sites.
inline ModelDescriptor lattice_model(std::function<double(int)> p1,
                                     std::function<double(int, int)> p2) {
    ModelDescriptor m;
    m.id = "lattice";
    CountableKernel k;
    k.name = "lattice";
    k.row = [p1, p2](const State& s) -> std::vector<Atom> {
        const auto& l = s.as<LatticeSite>();
        double q1 = p1(l.scale);
        double q2 = p2(l.layer, l.scale);
        if (q1 < 0.0 || q2 < 0.0 || q1 + q2 > 1.0 + 1e-15)
            throw std::invalid_argument("lattice kernel: p1 + p2 > 1 at (i=" +
                                        std::to_string(l.layer) +
                                        ", k=" + std::to_string(l.scale) + ")");
        int k_next = l.scale == LatticeSite::kInf ? LatticeSite::kInf : l.scale + 1;
        std::vector<Atom> row;
        if (q1 > 0.0) row.push_back({State(LatticeSite{l.layer, l.depth + 1, k_next}), q1});
        if (q2 > 0.0) row.push_back({State(LatticeSite{l.layer + 1, l.depth + 1, l.scale}), q2});
        double reset = 1.0 - q1 - q2;
        if (reset > 0.0) row.push_back({State(LatticeSite{1, l.depth + 1, 1}), reset});
        return row;
    };
    m.countable = k;
    m.sampling = sampling_from_countable(k);
    m.metric = lattice_metric();
    m.has_invariant_measure = false;
    m.default_start = State(LatticeSite{1, 0, 1});
    m.ball_center = State(LatticeSite{1, 0, LatticeSite::kInf});
    m.default_probes = {State(LatticeSite{1, 0, 1}), State(LatticeSite{2, 0, 3}),
                        State(LatticeSite{1, 0, 8})};
    m.probes_within = [](const State& center, double r) {
        // Sites h(i, j, k') approach h(i, j, inf) as k' grows.
        const auto& c = center.as<LatticeSite>();
        Metric d = lattice_metric();
        std::vector<State> out;
        for (int k = 1; k <= 40; ++k) {
            State s(LatticeSite{c.layer, c.depth, k});
            if (!(s == center) && d(s, center) <= r) out.push_back(s);
        }
        return out;
    };
    return m;
}

// Default parameterization: p1(k) = 1 - 2^-k, p2(i,k) = 2^-(k+i+1). This is a
// plausible instantiation, not the construction referenced by the source
// material, which never fixes p1 and p2.
inline ModelDescriptor lattice_model_default() {
    return lattice_model([](int k) { return k == LatticeSite::kInf ? 1.0 : 1.0 - std::exp2(-k); },
                         [](int i, int k) {
                             if (k == LatticeSite::kInf) return 0.0;
                             return std::exp2(-static_cast<double>(k + i + 1));
                         });
}

struct HeavyTailResult {
    SparseDistribution truncated;  // nu restricted to m <= M, renormalized
    double retained_mass = 0.0;    // sum_{m <= M} c/m^2 before renormalizing
    // S(n, M) = (c / 2^n) * sum_{m <= M} 2^m / m^2, the exact partial sum of
    // the divergent integral <V^{1/2}, P_n^* nu>.
    std::function<double(int, int)> partial_sum;
};

inline constexpr double kHeavyTailC = 0.60792710185402662866; // 6 / pi^2

// Heavy-tailed initial law nu(2^{2m}) = c/m^2 with its monotone divergence
// certificate: S(n, M) grows without bound in M for every n.
inline HeavyTailResult heavy_tail_nu(int truncation_M) {
    if (truncation_M < 1) throw std::invalid_argument("heavy_tail_nu: M must be >= 1");
    std::vector<Atom> atoms;
    double mass = 0.0;
    for (int m = 1; m <= truncation_M; ++m) {
        double w = kHeavyTailC / (static_cast<double>(m) * m);
        atoms.push_back({State(DyadicState::level(2 * m)), w});
        mass += w;
    }
    for (auto& a : atoms) a.weight /= mass;
    HeavyTailResult res;
    res.truncated = SparseDistribution::from_atoms(std::move(atoms));
    res.retained_mass = mass;
    res.partial_sum = [](int n, int M) {
        double sum = 0.0;
        for (int m = 1; m <= M; ++m) sum += std::exp2(m) / (static_cast<double>(m) * m);
        return kHeavyTailC * std::exp2(-n) * sum;
    };
    return res;
}

// Representative members for each family kind on the dyadic chain: truncated
// envelopes +-min(envelope, K) over a dyadic ladder of caps plus bounded
// probes.
inline std::vector<NamedFunction> truncated_envelope_reps(
    const std::function<double(const State&)>& envelope, int ladder = 5) {
    std::vector<NamedFunction> reps;
    for (int l = 0; l <= ladder; ++l) {
        double cap = std::exp2(2 * l);
        reps.push_back({"env_cap_" + std::to_string(l),
                        [envelope, cap](const State& s) { return std::min(envelope(s), cap); }});
    }
    reps.push_back({"env_full", envelope});
    return reps;
}

inline std::vector<TestFunctionFamily> family_presets_dyadic() {
    auto V = [](const State& s) { return dyadic_V(s); };
    std::vector<NamedFunction> bounded = {
        {"one", [](const State&) { return 1.0; }},
        {"sign_nonzero", [](const State& s) { return s.as<DyadicState>().is_zero() ? -1.0 : 1.0; }},
        {"cos_log", [](const State& s) {
             const auto& d = s.as<DyadicState>();
             return std::cos(d.is_zero() ? 0.0 : static_cast<double>(d.exp));
         }},
    };
    std::vector<NamedFunction> lip = {
        {"min_x_1", [V](const State& s) { return std::min(V(s), 1.0); }},
        {"neg_exp", [V](const State& s) { return std::exp(-V(s)) - 0.5; }},
    };
    Metric abs = absolute_metric();
    State zero{DyadicState::zero()};
    std::vector<TestFunctionFamily> out;
    out.push_back(families::lip_bounded(1.0, lip));
    out.push_back(families::sup_norm(bounded));
    out.push_back(families::growth(1.0, zero, abs, truncated_envelope_reps([abs, zero](const State& s) {
        return 1.0 + abs(zero, s);
    })));
    for (double a : {0.25, 0.5, 0.75, 1.0}) {
        auto env = [V, a](const State& s) { return std::pow(V(s), a); };
        auto reps = truncated_envelope_reps(env);
        out.push_back(families::alpha(a, V, std::move(reps)));
    }
    out.push_back(families::weighted(V, truncated_envelope_reps(
        [V](const State& s) { return 1.0 + V(s); })));
    return out;
}

inline std::vector<TestFunctionFamily> family_presets_ifs() {
    auto V = [](const State& s) { return s.as<TorusPoint>().radial; };
    std::vector<NamedFunction> reps = {
        {"cos_angle", [](const State& s) { return std::cos(s.as<TorusPoint>().angle); }},
        {"sin_angle", [](const State& s) { return std::sin(s.as<TorusPoint>().angle); }},
        {"min_x_1", [](const State& s) { return std::min(s.as<TorusPoint>().radial, 1.0); }},
        {"radial", V},
    };
    std::vector<TestFunctionFamily> out;
    out.push_back(families::sup_norm({reps[0], reps[1], reps[2]}));
    out.push_back(families::weighted(V, reps));
    return out;
}

// Registry addressable by id.
inline ModelDescriptor model_by_id(const std::string& id) {
    if (id == "dyadic") return dyadic_chain();
    if (id == "ifs") return ifs_torus();
    if (id == "lattice") return lattice_model_default();
    throw std::invalid_argument("unknown model id '" + id + "'");
}

inline std::vector<std::string> model_ids() { return {"dyadic", "ifs", "lattice"}; }

}  // namespace ergodiag
