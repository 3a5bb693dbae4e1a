#pragma once

// Composite stability report: distance-to-mu curves deciding asymptotic
// stability and mean ergodicity w.r.t. a family, the matching condition
// checks (EvC + C1, Cesaro-EvC + C2), and the cross-check that both sides of
// the stability equivalences agree. The equivalence is enforced only when the
// uniform-integrability hypothesis on the family envelope holds, since the
// theorems assume it; a mismatch with the hypothesis in force is an
// implementation bug and throws.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergodiag/diagnostics.hpp"
#include "ergodiag/distances.hpp"
#include "ergodiag/kernel.hpp"
#include "ergodiag/models.hpp"
#include "ergodiag/test_functions.hpp"

namespace ergodiag {

struct StabilityReport {
    std::string model_id;
    std::string family_name;
    DiagnosticReport as;           // asymptotic stability: P_t gap to mu
    DiagnosticReport me;           // mean ergodicity: Q_t gap to mu
    DiagnosticReport evc;
    DiagnosticReport evc_cesaro;
    DiagnosticReport c1;
    DiagnosticReport c2;
    DiagnosticReport h1;           // UI of the family envelope from the start
    bool equivalence_enforced = false;
    bool consistent = true;
    std::string notes;
};

namespace detail {

// Verdict for a single decay curve g(t): pass when it visibly decays or is
// already negligible, fail when it stays at its initial level.
inline Verdict decay_verdict(const Curve& g, double margin) {
    const double negligible = 1e-9;
    bool monotone = true;
    for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i].value > g[i - 1].value + margin) monotone = false;
    double first = g.front().value, last = g.back().value;
    if ((monotone && last <= 0.5 * first + margin) || last <= negligible + margin)
        return Verdict::Pass;
    if (last - margin > 0.9 * first && first > negligible) return Verdict::Fail;
    return Verdict::Inconclusive;
}

// Conjunction of condition verdicts: fail dominates, then inconclusive.
inline Verdict conjunction(Verdict a, Verdict b) {
    if (a == Verdict::Fail || b == Verdict::Fail) return Verdict::Fail;
    if (a == Verdict::Pass && b == Verdict::Pass) return Verdict::Pass;
    return Verdict::Inconclusive;
}

// sup over the family of |<f, law> - <f, mu>| at one time, exact-mode.
inline double exact_gap_to_mu(const SparseDistribution& law, const ModelDescriptor& model,
                              const TestFunctionFamily& family) {
    bool closed = family.kind == FamilyKind::SupNorm || family.kind == FamilyKind::Weighted ||
                  family.kind == FamilyKind::LipBounded;
    if (closed && model.invariant_sparse)
        return family_sup_gap(law, *model.invariant_sparse, family, model.metric);
    double gap = 0.0;
    for (const auto& repfn : family.representatives) {
        double target = model.invariant_sparse ? integrate(*model.invariant_sparse, repfn.fn)
                                               : model.invariant_integrator(repfn.fn);
        gap = std::max(gap, std::fabs(integrate(law, repfn.fn) - target));
    }
    return gap;
}

}  // namespace detail

// Time ladder {T/8, T/4, T/2, T} used for the distance-to-mu curves.
inline std::vector<double> stability_time_ladder(double t_max) {
    std::vector<double> ladder = {t_max / 8.0, t_max / 4.0, t_max / 2.0, t_max};
    for (double& t : ladder) t = std::max(1.0, std::floor(t));
    return ladder;
}

inline StabilityReport stability_report(const ModelDescriptor& model,
                                        const TestFunctionFamily& family,
                                        const LimitGridSpec& grid,
                                        std::vector<double> lbc_radii = {0.5}) {
    grid.validate();
    StabilityReport rep;
    rep.model_id = model.id;
    rep.family_name = family.name;

    const State& x = model.default_start;
    const State& z = model.ball_center;
    const bool exact = model.countable.has_value();

    // Distance-to-mu curves for AS (P_t) and ME (Q_t).
    auto ladder = stability_time_ladder(grid.t_grid.back());
    Curve as_curve, me_curve;
    double as_sigma = 0.0, me_sigma = 0.0;
    if (!model.has_invariant_measure) {
        rep.as.verdict = rep.me.verdict = Verdict::Fail;
        rep.notes = "no invariant measure certified; AS and ME fail by definition";
    } else if (exact) {
        int t_max = static_cast<int>(ladder.back());
        auto laws = detail::law_sequence(*model.countable, x, t_max);
        for (double t : ladder) {
            int ti = static_cast<int>(t);
            as_curve.push_back({t, detail::exact_gap_to_mu(laws[ti - 1], model, family), 0.0});
            me_curve.push_back(
                {t, detail::exact_gap_to_mu(detail::cesaro_mixture(laws, ti), model, family), 0.0});
        }
    } else {
        auto paths = simulate_paths(*model.sampling, x, ladder.back(), grid.samples, grid.seed + 3);
        for (double t : ladder) {
            double as_gap = 0.0, me_gap = 0.0, sa = 0.0, sm = 0.0;
            for (const auto& repfn : family.representatives) {
                double target = model.invariant_integrator(repfn.fn);
                std::vector<double> pv, qv;
                pv.reserve(paths.size());
                qv.reserve(paths.size());
                for (std::size_t p = 0; p < paths.size(); ++p) {
                    pv.push_back(repfn.fn(paths[p].position(t)));
                    qv.push_back(detail::path_time_average(paths[p], t, repfn.fn,
                                                           grid.seed + 3 + 977, p));
                }
                auto mp = detail::mean_stderr(pv), mq = detail::mean_stderr(qv);
                if (std::fabs(mp.mean - target) > as_gap) {
                    as_gap = std::fabs(mp.mean - target);
                    sa = mp.stderr_;
                }
                if (std::fabs(mq.mean - target) > me_gap) {
                    me_gap = std::fabs(mq.mean - target);
                    sm = mq.stderr_;
                }
                as_sigma = std::max(as_sigma, mp.stderr_);
                me_sigma = std::max(me_sigma, mq.stderr_);
            }
            as_curve.push_back({t, as_gap, sa});
            me_curve.push_back({t, me_gap, sm});
        }
    }
    if (model.has_invariant_measure) {
        rep.as.verdict = detail::decay_verdict(as_curve, exact ? 0.0 : 3.0 * as_sigma);
        rep.me.verdict = detail::decay_verdict(me_curve, exact ? 0.0 : 3.0 * me_sigma);
    }
    rep.as.condition = "asymptotic_stability";
    rep.me.condition = "mean_ergodicity";
    rep.as.model_id = rep.me.model_id = model.id;
    rep.as.exact_mode = rep.me.exact_mode = exact;
    rep.as.seed = rep.me.seed = grid.seed;
    rep.as.curves["g"] = as_curve;
    rep.me.curves["g"] = me_curve;

    // Condition side.
    rep.evc = check_evc(model, family, z, grid, EvcVariant::Plain);
    rep.evc_cesaro = check_evc(model, family, z, grid, EvcVariant::Cesaro);
    rep.c1 = check_lbc_C1(model, z, lbc_radii, model.default_probes, grid);
    rep.c2 = check_lbc_C2(model, z, lbc_radii, model.default_probes, grid);

    // Hypothesis: uniform integrability of the family envelope.
    std::vector<double> K_grid;
    for (int e = 2; e <= 20; e += 2) K_grid.push_back(std::exp2(e));
    rep.h1 = check_uniform_integrability(model, x, family.envelope, K_grid, grid);

    rep.equivalence_enforced = rep.h1.verdict == Verdict::Pass;
    if (rep.equivalence_enforced) {
        Verdict as_rhs = detail::conjunction(rep.evc.verdict, rep.c1.verdict);
        Verdict me_rhs = detail::conjunction(rep.evc_cesaro.verdict, rep.c2.verdict);
        auto decided = [](Verdict v) { return v != Verdict::Inconclusive; };
        if (decided(rep.as.verdict) && decided(as_rhs) && rep.as.verdict != as_rhs) {
            rep.consistent = false;
            throw std::logic_error("stability_report: AS verdict '" +
                                   std::string(verdict_name(rep.as.verdict)) +
                                   "' contradicts EvC+C1 verdict '" +
                                   std::string(verdict_name(as_rhs)) + "' on model " + model.id);
        }
        if (decided(rep.me.verdict) && decided(me_rhs) && rep.me.verdict != me_rhs) {
            rep.consistent = false;
            throw std::logic_error("stability_report: ME verdict '" +
                                   std::string(verdict_name(rep.me.verdict)) +
                                   "' contradicts Cesaro-EvC+C2 verdict '" +
                                   std::string(verdict_name(me_rhs)) + "' on model " + model.id);
        }
    } else {
        rep.notes += (rep.notes.empty() ? "" : "; ");
        rep.notes += "envelope not uniformly integrable; equivalence out of scope";
    }
    return rep;
}

}  // namespace ergodiag
