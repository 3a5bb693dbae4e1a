#pragma once

// Estimators and verdicts for the named conditions: lower bound conditions
// C1/C2, (Cesaro/uniform) eventual continuity, uniform integrability (H1/H2),
// the Lyapunov comparison ODE, tightness of the Cesaro occupation measures,
// Cesaro divergence along a path, and the composite stability report that
// cross-checks both sides of the stability equivalences.
//
// The double limits (x' -> x after t -> infinity) are not computable; they
// become nested finite grids. "t -> infinity" is the tail of t_grid selected
// by tail_fraction, "x' -> x" walks probe_radii downward, and a pass/fail
// needs either exact-mode data or a 3-sigma margin; everything else is
// inconclusive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodiag/distances.hpp"
#include "ergodiag/distribution.hpp"
#include "ergodiag/kernel.hpp"
#include "ergodiag/models.hpp"
#include "ergodiag/state.hpp"
#include "ergodiag/test_functions.hpp"

namespace ergodiag {

struct LimitGridSpec {
    std::vector<double> t_grid;       // strictly increasing times
    double tail_fraction = 0.5;       // trailing portion treated as t -> infinity
    std::vector<double> probe_radii;  // strictly decreasing radii for x' -> x
    int samples = 2000;
    std::uint64_t seed = 0;

    void validate() const {
        if (t_grid.empty()) throw std::invalid_argument("LimitGridSpec: empty t_grid");
        for (std::size_t i = 1; i < t_grid.size(); ++i)
            if (!(t_grid[i] > t_grid[i - 1]))
                throw std::invalid_argument("LimitGridSpec: t_grid must be strictly increasing");
        for (std::size_t i = 1; i < probe_radii.size(); ++i)
            if (!(probe_radii[i] < probe_radii[i - 1]))
                throw std::invalid_argument("LimitGridSpec: radii must be strictly decreasing");
        if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
            throw std::invalid_argument("LimitGridSpec: tail_fraction must be in (0,1]");
        if (samples < 2) throw std::invalid_argument("LimitGridSpec: samples must be >= 2");
    }

    std::size_t tail_start() const {
        return static_cast<std::size_t>(t_grid.size() * (1.0 - tail_fraction));
    }

    static LimitGridSpec defaults(std::uint64_t seed) {
        LimitGridSpec g;
        for (int t = 1; t <= 60; ++t) g.t_grid.push_back(t);
        g.probe_radii = {16.0, 8.0, 4.0, 2.0};
        g.samples = 2000;
        g.seed = seed;
        return g;
    }
};

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct CurvePoint {
    double x = 0.0;
    double value = 0.0;
    double sigma = 0.0;  // Monte Carlo standard error; 0 in exact mode
};

using Curve = std::vector<CurvePoint>;

struct DiagnosticReport {
    std::string condition;
    std::string model_id;
    Verdict verdict = Verdict::Inconclusive;
    std::map<std::string, Curve> curves;
    std::map<std::string, double> tolerances;
    std::string notes;
    std::uint64_t seed = 0;
    bool exact_mode = false;
};

// Exact-mode floor for "bounded away from zero"; a declared convention, the
// source conditions give no decision rule.
inline constexpr double kLbcFloor = 1e-3;

namespace detail {

// Exact laws P_1^* delta_x .. P_n^* delta_x for integer grids.
inline std::vector<SparseDistribution> law_sequence(const CountableKernel& k, const State& x,
                                                    int t_max) {
    std::vector<SparseDistribution> laws;
    laws.reserve(t_max);
    SparseDistribution cur = SparseDistribution::delta(x);
    for (int t = 1; t <= t_max; ++t) {
        cur = propagate(k, cur, 1);
        laws.push_back(cur);
    }
    return laws;
}

inline double ball_mass(const SparseDistribution& law, const State& z, double r,
                        const Metric& metric) {
    double mass = 0.0;
    for (const auto& [s, w] : law.atoms())
        if (metric(s, z) <= r) mass += w;
    return mass;
}

// Monte Carlo P_t(x, B(z,r)) over the grid, one path set per probe.
inline Curve mc_ball_curve(const SamplingKernel& k, const State& x, const State& z, double r,
                           const Metric& metric, const LimitGridSpec& grid,
                           std::uint64_t stream_salt, bool cesaro) {
    auto paths = simulate_paths(k, x, grid.t_grid.back(), grid.samples, grid.seed + stream_salt);
    Curve curve;
    std::vector<double> occupation(paths.size(), 0.0);
    double prev_t = 0.0;
    for (double t : grid.t_grid) {
        int hits = 0;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            bool in = metric(paths[p].position(t), z) <= r;
            if (cesaro) {
                // Occupation approximated on the t_grid itself (left rule).
                occupation[p] += (in ? 1.0 : 0.0) * (t - prev_t);
            }
            if (in) ++hits;
        }
        double value, sigma;
        if (cesaro) {
            std::vector<double> fractions;
            fractions.reserve(occupation.size());
            for (double o : occupation) fractions.push_back(o / t);
            auto ms = ergodiag::detail::mean_stderr(fractions);
            value = ms.mean;
            sigma = ms.stderr_;
        } else {
            value = static_cast<double>(hits) / paths.size();
            sigma = std::sqrt(std::max(value * (1.0 - value), 1e-12) / paths.size());
        }
        curve.push_back({t, value, sigma});
        prev_t = t;
    }
    return curve;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lower bound conditions

// C1: inf_x liminf_t P_t(x, B(z,r)) > 0, with liminf -> tail-min and
// inf -> min over probes. C2 replaces P_t by the Cesaro occupation Q_t and
// liminf by limsup (tail-max).
inline DiagnosticReport check_lbc(const ModelDescriptor& model, const State& z,
                                  const std::vector<double>& r_list,
                                  const std::vector<State>& probes, const LimitGridSpec& grid,
                                  bool cesaro) {
    grid.validate();
    if (probes.empty()) throw std::invalid_argument("check_lbc: empty probe set");
    DiagnosticReport rep;
    rep.condition = cesaro ? "lbc_C2" : "lbc_C1";
    rep.model_id = model.id;
    rep.seed = grid.seed;
    rep.tolerances["floor"] = kLbcFloor;
    rep.exact_mode = model.countable.has_value();

    const std::size_t tail = grid.tail_start();
    double worst_stat = 1.0, worst_sigma = 0.0;
    for (double r : r_list) {
        Curve stat_curve;  // per probe: the tail statistic
        for (std::size_t pi = 0; pi < probes.size(); ++pi) {
            double stat;
            double sigma = 0.0;
            if (rep.exact_mode) {
                auto laws = detail::law_sequence(*model.countable, probes[pi],
                                                 static_cast<int>(grid.t_grid.back()));
                double best = cesaro ? 0.0 : 1.0;
                for (std::size_t ti = 0; ti < grid.t_grid.size(); ++ti) {
                    int t = static_cast<int>(grid.t_grid[ti]);
                    double v;
                    if (cesaro) {
                        double sum = 0.0;
                        for (int s = 1; s <= t; ++s)
                            sum += detail::ball_mass(laws[s - 1], z, r, model.metric);
                        v = sum / t;
                    } else {
                        v = detail::ball_mass(laws[t - 1], z, r, model.metric);
                    }
                    if (ti >= tail) best = cesaro ? std::max(best, v) : std::min(best, v);
                }
                stat = best;
            } else {
                Curve c = detail::mc_ball_curve(*model.sampling, probes[pi], z, r, model.metric,
                                                grid, pi, cesaro);
                double best = cesaro ? 0.0 : 1.0;
                for (std::size_t ti = tail; ti < c.size(); ++ti) {
                    if (cesaro) {
                        if (c[ti].value > best) {
                            best = c[ti].value;
                            sigma = c[ti].sigma;
                        }
                    } else {
                        if (c[ti].value < best) {
                            best = c[ti].value;
                            sigma = c[ti].sigma;
                        }
                    }
                }
                stat = best;
            }
            stat_curve.push_back({static_cast<double>(pi), stat, sigma});
            if (stat < worst_stat) {
                worst_stat = stat;
                worst_sigma = sigma;
            }
        }
        rep.curves["r=" + std::to_string(r)] = stat_curve;
    }

    if (rep.exact_mode) {
        rep.verdict = worst_stat >= kLbcFloor ? Verdict::Pass
                      : (worst_stat == 0.0 ? Verdict::Fail : Verdict::Inconclusive);
    } else {
        if (worst_stat - 3.0 * worst_sigma >= kLbcFloor)
            rep.verdict = Verdict::Pass;
        else if (worst_stat + 3.0 * worst_sigma < kLbcFloor)
            rep.verdict = Verdict::Fail;
        else
            rep.verdict = Verdict::Inconclusive;
    }
    rep.notes = "statistic = min over probes of tail-" + std::string(cesaro ? "max" : "min");
    return rep;
}

inline DiagnosticReport check_lbc_C1(const ModelDescriptor& model, const State& z,
                                     const std::vector<double>& r_list,
                                     const std::vector<State>& probes,
                                     const LimitGridSpec& grid) {
    return check_lbc(model, z, r_list, probes, grid, /*cesaro=*/false);
}

inline DiagnosticReport check_lbc_C2(const ModelDescriptor& model, const State& z,
                                     const std::vector<double>& r_list,
                                     const std::vector<State>& probes,
                                     const LimitGridSpec& grid) {
    return check_lbc(model, z, r_list, probes, grid, /*cesaro=*/true);
}

// ---------------------------------------------------------------------------
// Eventual continuity

enum class EvcVariant { Plain, Cesaro, Uniform, UniformCesaro };

inline const char* evc_variant_name(EvcVariant v) {
    switch (v) {
        case EvcVariant::Plain: return "evc";
        case EvcVariant::Cesaro: return "evc_cesaro";
        case EvcVariant::Uniform: return "evc_uniform";
        case EvcVariant::UniformCesaro: return "evc_uniform_cesaro";
    }
    return "?";
}

namespace detail {

// Time averages of f over a stored trajectory at uniform random times in
// (0, t]; one stream per path so the estimate is unbiased and reproducible.
inline double path_time_average(const Trajectory& traj, double t,
                                const std::function<double(const State&)>& f,
                                std::uint64_t seed, std::uint64_t path_index, int draws = 8) {
    RngStream rng = stream_for(seed ^ 0x5ca1ab1e0ddba11ULL, path_index);
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) acc += f(traj.position(t * rng.uniform_positive()));
    return acc / draws;
}

inline MeanStderr gap_over_paths(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b,
                                 double t, const std::function<double(const State&)>& f,
                                 bool cesaro, std::uint64_t seed_a, std::uint64_t seed_b,
                                 std::uint64_t time_salt) {
    std::vector<double> va, vb;
    va.reserve(a.size());
    vb.reserve(b.size());
    for (std::size_t p = 0; p < a.size(); ++p)
        va.push_back(cesaro ? path_time_average(a[p], t, f, seed_a + time_salt, p)
                            : f(a[p].position(t)));
    for (std::size_t p = 0; p < b.size(); ++p)
        vb.push_back(cesaro ? path_time_average(b[p], t, f, seed_b + time_salt, p)
                            : f(b[p].position(t)));
    auto ma = mean_stderr(va), mb = mean_stderr(vb);
    MeanStderr out;
    out.mean = std::fabs(ma.mean - mb.mean);
    out.stderr_ = std::hypot(ma.stderr_, mb.stderr_);
    return out;
}

// Exact Cesaro mixture (1/t) sum_{s=1..t} law_s.
inline SparseDistribution cesaro_mixture(const std::vector<SparseDistribution>& laws, int t) {
    std::map<State, double> acc;
    for (int s = 1; s <= t; ++s)
        for (const auto& [st, w] : laws[s - 1].atoms()) acc[st] += w / t;
    return SparseDistribution::collect(acc);
}

}  // namespace detail

// D(r) = tail-max over t of the semigroup gap between probes at distance <= r
// and x. Uniform variants on a countable kernel with a sup-norm, weighted or
// Lipschitz family use the exact family sup via family_sup_gap; everything
// else walks the representatives.
//
// The pass rule accepts two kinds of evidence: D(r) decays along the radius
// ladder, or every radius's gap curve is still decaying in t (then the
// tail-max overestimates a vanishing limsup and the flat-in-r level is a
// finite-horizon artifact, as for Cesaro gaps of order 1/t).
inline DiagnosticReport check_evc(const ModelDescriptor& model, const TestFunctionFamily& family,
                                  const State& x, const LimitGridSpec& grid, EvcVariant variant) {
    grid.validate();
    if (grid.probe_radii.size() < 3)
        throw std::invalid_argument("check_evc: need at least 3 probe radii for a trend verdict");
    const bool cesaro = variant == EvcVariant::Cesaro || variant == EvcVariant::UniformCesaro;
    const bool uniform = variant == EvcVariant::Uniform || variant == EvcVariant::UniformCesaro;
    const bool closed_sup =
        uniform && (family.kind == FamilyKind::SupNorm || family.kind == FamilyKind::Weighted ||
                    family.kind == FamilyKind::LipBounded);
    if (uniform && family.kind == FamilyKind::SupNorm && !model.countable)
        throw std::invalid_argument(
            "check_evc: uniform sup-norm gap on a continuous-state model is degenerate; "
            "use a countable kernel or structural laws");

    DiagnosticReport rep;
    rep.condition = evc_variant_name(variant);
    rep.model_id = model.id;
    rep.seed = grid.seed;
    rep.exact_mode = model.countable.has_value();

    // Tail time indices; Monte Carlo mode subsamples at most 6 of them.
    std::vector<std::size_t> tail_idx;
    for (std::size_t ti = grid.tail_start(); ti < grid.t_grid.size(); ++ti) tail_idx.push_back(ti);
    if (!rep.exact_mode && tail_idx.size() > 6) {
        std::vector<std::size_t> sub;
        for (int i = 0; i < 6; ++i)
            sub.push_back(tail_idx[i * (tail_idx.size() - 1) / 5]);
        sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
        tail_idx = sub;
    }
    const int t_max = static_cast<int>(grid.t_grid.back());

    Curve D;
    std::vector<Curve> per_radius;
    double max_sigma = 0.0;

    std::vector<SparseDistribution> base_laws;
    std::vector<Trajectory> base_paths;
    if (rep.exact_mode)
        base_laws = detail::law_sequence(*model.countable, x, t_max);
    else
        base_paths = simulate_paths(*model.sampling, x, grid.t_grid.back(), grid.samples,
                                    grid.seed + 7);

    for (double r : grid.probe_radii) {
        auto probes = model.probes_within(x, r);
        if (probes.empty())
            throw std::invalid_argument("check_evc: no probes within r=" + std::to_string(r));
        Curve g(tail_idx.size());
        for (std::size_t gi = 0; gi < tail_idx.size(); ++gi)
            g[gi] = {grid.t_grid[tail_idx[gi]], 0.0, 0.0};

        for (std::size_t pi = 0; pi < probes.size(); ++pi) {
            std::vector<SparseDistribution> probe_laws;
            std::vector<Trajectory> probe_paths;
            if (rep.exact_mode)
                probe_laws = detail::law_sequence(*model.countable, probes[pi], t_max);
            else
                probe_paths = simulate_paths(*model.sampling, probes[pi], grid.t_grid.back(),
                                             grid.samples, grid.seed + 101 + pi);
            for (std::size_t gi = 0; gi < tail_idx.size(); ++gi) {
                double t = grid.t_grid[tail_idx[gi]];
                double gap = 0.0, sigma = 0.0;
                if (rep.exact_mode) {
                    int ti = static_cast<int>(t);
                    if (closed_sup) {
                        if (cesaro)
                            gap = family_sup_gap(detail::cesaro_mixture(probe_laws, ti),
                                                 detail::cesaro_mixture(base_laws, ti), family,
                                                 model.metric);
                        else
                            gap = family_sup_gap(probe_laws[ti - 1], base_laws[ti - 1], family,
                                                 model.metric);
                    } else {
                        for (const auto& repfn : family.representatives) {
                            double ga;
                            if (cesaro) {
                                double qa = 0.0, qb = 0.0;
                                for (int s = 1; s <= ti; ++s) {
                                    qa += integrate(probe_laws[s - 1], repfn.fn) / ti;
                                    qb += integrate(base_laws[s - 1], repfn.fn) / ti;
                                }
                                ga = std::fabs(qa - qb);
                            } else {
                                ga = std::fabs(integrate(probe_laws[ti - 1], repfn.fn) -
                                               integrate(base_laws[ti - 1], repfn.fn));
                            }
                            gap = std::max(gap, ga);
                        }
                    }
                } else {
                    for (const auto& repfn : family.representatives) {
                        auto e = detail::gap_over_paths(probe_paths, base_paths, t, repfn.fn,
                                                        cesaro, grid.seed + 101 + pi,
                                                        grid.seed + 7, 977 * gi);
                        if (e.mean > gap) {
                            gap = e.mean;
                            sigma = e.stderr_;
                        }
                        max_sigma = std::max(max_sigma, e.stderr_);
                    }
                }
                if (gap > g[gi].value) {
                    g[gi].value = gap;
                    g[gi].sigma = sigma;
                }
            }
        }
        double worst = 0.0, worst_sigma = 0.0;
        for (const auto& pt : g)
            if (pt.value > worst) {
                worst = pt.value;
                worst_sigma = pt.sigma;
            }
        D.push_back({r, worst, worst_sigma});
        per_radius.push_back(g);
        rep.curves["g@r=" + std::to_string(r)] = g;
    }
    rep.curves["D"] = D;

    const double margin = rep.exact_mode ? 0.0 : 3.0 * max_sigma;
    rep.tolerances["margin"] = margin;
    const double negligible = 1e-9;

    bool monotone = true;
    for (std::size_t i = 1; i < D.size(); ++i)
        if (D[i].value > D[i - 1].value + margin) monotone = false;
    double first = D.front().value, last = D.back().value;
    bool r_trend = (monotone && last <= 0.5 * first + margin) || last <= negligible + margin;

    bool t_decay = true;
    for (const auto& g : per_radius) {
        double peak = 0.0;
        for (const auto& pt : g) peak = std::max(peak, pt.value);
        if (!(g.back().value <= 0.6 * peak + margin || peak <= negligible + margin))
            t_decay = false;
    }

    if (r_trend || t_decay)
        rep.verdict = Verdict::Pass;
    else if (last - margin > 0.9 * first && first > negligible)
        rep.verdict = Verdict::Fail;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

// ---------------------------------------------------------------------------
// Uniform integrability (H1 / H2)

// T(K) = sup over grid times of E[|f(Phi_t)|; |f(Phi_t)| >= K], exact on
// countable kernels. Pass when the tail curve decays below pass_tol at the
// largest K; fail when it plateaus above the floor.
inline DiagnosticReport check_uniform_integrability(const ModelDescriptor& model, const State& x,
                                                    const std::function<double(const State&)>& f,
                                                    const std::vector<double>& K_grid,
                                                    const LimitGridSpec& grid,
                                                    double pass_tol = 1e-3) {
    grid.validate();
    for (std::size_t i = 1; i < K_grid.size(); ++i)
        if (!(K_grid[i] > K_grid[i - 1]))
            throw std::invalid_argument("check_uniform_integrability: K_grid must be increasing");
    DiagnosticReport rep;
    rep.condition = "uniform_integrability";
    rep.model_id = model.id;
    rep.seed = grid.seed;
    rep.tolerances["pass_tol"] = pass_tol;

    Curve T;
    if (model.countable) {
        rep.exact_mode = true;
        auto laws = detail::law_sequence(*model.countable, x,
                                         static_cast<int>(grid.t_grid.back()));
        for (double K : K_grid) {
            double sup = 0.0;
            // t = 0 term included: the family is indexed by all t >= 0.
            double v0 = std::fabs(f(x));
            if (v0 >= K) sup = v0;
            for (const auto& law : laws) {
                double tail_exp = 0.0;
                for (const auto& [s, w] : law.atoms()) {
                    double v = std::fabs(f(s));
                    if (v >= K) tail_exp += w * v;
                }
                sup = std::max(sup, tail_exp);
            }
            T.push_back({K, sup, 0.0});
        }
    } else {
        auto paths = simulate_paths(*model.sampling, x, grid.t_grid.back(), grid.samples,
                                    grid.seed + 11);
        // One path set evaluated at up to 20 grid times for every K.
        std::vector<double> eval_times;
        std::size_t stride = std::max<std::size_t>(1, grid.t_grid.size() / 20);
        for (std::size_t ti = 0; ti < grid.t_grid.size(); ti += stride)
            eval_times.push_back(grid.t_grid[ti]);
        eval_times.push_back(grid.t_grid.back());
        for (double K : K_grid) {
            double sup = 0.0, sup_sigma = 0.0;
            for (double t : eval_times) {
                std::vector<double> vals;
                vals.reserve(paths.size());
                for (const auto& traj : paths) {
                    double v = std::fabs(f(traj.position(t)));
                    vals.push_back(v >= K ? v : 0.0);
                }
                auto est = detail::mean_stderr(vals);
                if (est.mean > sup) {
                    sup = est.mean;
                    sup_sigma = est.stderr_;
                }
            }
            T.push_back({K, sup, sup_sigma});
        }
    }
    rep.curves["T"] = T;

    double last = T.back().value, last_sigma = T.back().sigma;
    double first = T.front().value;
    const double margin = rep.exact_mode ? 0.0 : 3.0 * last_sigma;
    if (last <= pass_tol + margin)
        rep.verdict = Verdict::Pass;
    else if (last - margin >= 0.5 * first && first > pass_tol)
        rep.verdict = Verdict::Fail;  // plateau above a positive floor
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

// ---------------------------------------------------------------------------
// Lyapunov comparison ODE

struct LyapunovSpec {
    std::function<double(double)> phi;        // increasing nonnegative concave
    std::function<double(double)> phi_prime;  // > 0 on the integration range
    double C = 0.0;
    double U0 = 0.0;  // phi(V(x))
};

struct LyapunovResult {
    double bound = 0.0;     // sup_{[0, t_max]} f(t), dominates sup_t E phi(V)
    double terminal = 0.0;  // f(t_max)
    bool monotone = true;
    int fixed_point_crossings = 0;
    Curve trajectory;
};

namespace detail {

// phi^{-1} by bisection; phi is strictly increasing.
inline double phi_inverse(const std::function<double(double)>& phi, double y, double hi_hint) {
    double lo = 0.0, hi = std::max(hi_hint, 1.0);
    while (phi(hi) < y) {
        hi *= 2.0;
        if (hi > 1e300) throw std::domain_error("phi_inverse: target not reachable");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (phi(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Integrates f' = (-f + C) phi'(phi^{-1}(f)), f(0) = U0 with an adaptive
// embedded Cash--Karp 4(5) pair, relative tolerance 1e-8. The trajectory
// approaches the fixed point C monotonically and never crosses it; both
// properties are verified on the numeric solution.
inline LyapunovResult lyapunov_bound(const LyapunovSpec& spec, double t_max, double initial_step,
                                     double rel_tol = 1e-8) {
    if (!(initial_step > 0.0)) throw std::invalid_argument("lyapunov_bound: step must be > 0");
    const double range = std::max({spec.U0, spec.C, 1.0});
    // Contract checks: phi' > 0 and concavity by sampled second differences.
    const int probes = 64;
    const double h = range / probes;
    for (int i = 0; i <= probes; ++i) {
        double v = i * h;
        if (!(spec.phi_prime(v) > 0.0))
            throw std::domain_error("lyapunov_bound: phi' must be > 0 on the range");
        if (i >= 2) {
            double second = spec.phi(v) - 2.0 * spec.phi(v - h) + spec.phi(v - 2.0 * h);
            if (second > 1e-9 * (1.0 + std::fabs(spec.phi(v))))
                throw std::domain_error("lyapunov_bound: phi is not concave");
        }
    }

    auto rhs = [&](double f) {
        double v = detail::phi_inverse(spec.phi, f, range * 2.0);
        double d = spec.phi_prime(v);
        if (!std::isfinite(d)) throw std::domain_error("lyapunov_bound: phi' evaluation failed");
        return (-f + spec.C) * d;
    };

    // Cash-Karp coefficients.
    static const double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;
    (void)a2; (void)a3; (void)a4; (void)a5; (void)a6;
    static const double b21 = 1.0 / 5;
    static const double b31 = 3.0 / 40, b32 = 9.0 / 40;
    static const double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
    static const double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
    static const double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824,
                        b64 = 44275.0 / 110592, b65 = 253.0 / 4096;
    static const double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
    static const double d1 = 2825.0 / 27648, d3 = 18575.0 / 48384, d4 = 13525.0 / 55296,
                        d5 = 277.0 / 14336, d6 = 1.0 / 4;

    LyapunovResult res;
    double t = 0.0, f = spec.U0, dt = initial_step;
    res.trajectory.push_back({0.0, f, 0.0});
    res.bound = f;
    const double sign0 = f - spec.C;
    double prev = f;
    int guard = 0;
    while (t < t_max && guard++ < 2000000) {
        if (t + dt > t_max) dt = t_max - t;
        double k1 = rhs(f);
        double k2 = rhs(f + dt * b21 * k1);
        double k3 = rhs(f + dt * (b31 * k1 + b32 * k2));
        double k4 = rhs(f + dt * (b41 * k1 + b42 * k2 + b43 * k3));
        double k5 = rhs(f + dt * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
        double k6 = rhs(f + dt * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));
        double f5 = f + dt * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
        double f4 = f + dt * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6);
        double err = std::fabs(f5 - f4);
        double tol = rel_tol * (std::fabs(f) + std::fabs(dt * k1)) + 1e-14;
        if (err > tol) {
            dt *= std::max(0.1, 0.9 * std::pow(tol / err, 0.25));
            continue;  // reject the step
        }
        t += dt;
        f = f5;
        res.trajectory.push_back({t, f, 0.0});
        res.bound = std::max(res.bound, f);
        // Monotonicity and crossings are judged at the integrator's accuracy.
        const double jitter = 10.0 * rel_tol * (std::fabs(f) + 1.0);
        if (sign0 > 0.0 && f > prev + jitter) res.monotone = false;
        if (sign0 < 0.0 && f < prev - jitter) res.monotone = false;
        if ((f - spec.C) * sign0 < -jitter) ++res.fixed_point_crossings;
        prev = f;
        if (err > 0.0) dt *= std::min(5.0, 0.9 * std::pow(tol / err, 0.2));
    }
    res.terminal = f;
    return res;
}

// ---------------------------------------------------------------------------
// Cesaro divergence along a path

struct BirkhoffReport {
    bool diverging = false;
    Curve running_averages;  // at the checkpoints
};

// Running Cesaro averages of f over a discrete trajectory at the given
// checkpoints; diverging when every threshold is exceeded by the last
// checkpoint.
inline BirkhoffReport birkhoff_divergence_check(const std::vector<double>& f_values,
                                                const std::vector<std::size_t>& checkpoints,
                                                const std::vector<double>& thresholds) {
    if (checkpoints.empty()) throw std::invalid_argument("birkhoff: no checkpoints");
    for (std::size_t c : checkpoints)
        if (c == 0 || c > f_values.size())
            throw std::invalid_argument("birkhoff: checkpoint outside the trajectory");
    BirkhoffReport rep;
    std::vector<double> prefix(f_values.size() + 1, 0.0);
    for (std::size_t i = 0; i < f_values.size(); ++i) prefix[i + 1] = prefix[i] + f_values[i];
    for (std::size_t c : checkpoints)
        rep.running_averages.push_back({static_cast<double>(c), prefix[c] / c, 0.0});
    double last = rep.running_averages.back().value;
    rep.diverging = true;
    for (double th : thresholds)
        if (!(last > th)) rep.diverging = false;
    return rep;
}

// ---------------------------------------------------------------------------
// Tightness of Cesaro occupation measures

// m(R) = tail-min over t of Q_t(x, B(x, R)) along an increasing exhaustion;
// tight when the curve reaches 1, failed when mass escapes every ball.
inline DiagnosticReport check_tightness(const ModelDescriptor& model, const State& x,
                                        const std::vector<double>& radii,
                                        const LimitGridSpec& grid) {
    grid.validate();
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1]))
            throw std::invalid_argument("check_tightness: exhaustion must be increasing");
    DiagnosticReport rep;
    rep.condition = "tightness";
    rep.model_id = model.id;
    rep.seed = grid.seed;
    rep.exact_mode = model.countable.has_value();
    const std::size_t tail = grid.tail_start();

    Curve m;
    double max_sigma = 0.0;
    if (rep.exact_mode) {
        auto laws = detail::law_sequence(*model.countable, x,
                                         static_cast<int>(grid.t_grid.back()));
        for (double R : radii) {
            double stat = 1.0;
            for (std::size_t ti = tail; ti < grid.t_grid.size(); ++ti) {
                int t = static_cast<int>(grid.t_grid[ti]);
                double sum = 0.0;
                for (int s = 1; s <= t; ++s)
                    sum += detail::ball_mass(laws[s - 1], x, R, model.metric);
                stat = std::min(stat, sum / t);
            }
            m.push_back({R, stat, 0.0});
        }
    } else {
        for (double R : radii) {
            Curve c = detail::mc_ball_curve(*model.sampling, x, x, R, model.metric, grid,
                                            static_cast<std::uint64_t>(R * 997), /*cesaro=*/true);
            double stat = 1.0, sigma = 0.0;
            for (std::size_t ti = tail; ti < c.size(); ++ti)
                if (c[ti].value < stat) {
                    stat = c[ti].value;
                    sigma = c[ti].sigma;
                }
            m.push_back({R, stat, sigma});
            max_sigma = std::max(max_sigma, sigma);
        }
    }
    rep.curves["m"] = m;
    const double margin = rep.exact_mode ? 0.0 : 3.0 * max_sigma;
    rep.tolerances["margin"] = margin;
    double last = m.back().value;
    if (last + margin >= 0.95)
        rep.verdict = Verdict::Pass;
    else if (last - margin < 0.5)
        rep.verdict = Verdict::Fail;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

}  // namespace ergodiag
