#pragma once

// Transition kernels and the semigroup operators built on them: exact
// propagation P_t^* for countable chains, path simulation for sampling
// kernels, and the Cesaro averages Q_t in exact and Monte Carlo modes.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodiag/distribution.hpp"
#include "ergodiag/rng.hpp"
#include "ergodiag/state.hpp"

namespace ergodiag {

// Exact one-step law over a countable state space. Rows have finite support
// and must sum to 1 within 1e-12.
struct CountableKernel {
    std::string name;
    std::function<std::vector<Atom>(const State&)> row;
};

inline std::vector<Atom> kernel_row(const CountableKernel& k, const State& x) {
    auto r = k.row(x);
    double total = 0.0;
    for (const auto& a : r) {
        if (a.weight < 0.0)
            throw std::invalid_argument("kernel '" + k.name + "': negative probability in row " +
                                        x.to_string());
        total += a.weight;
    }
    if (std::fabs(total - 1.0) > kMassTolerance)
        throw std::invalid_argument("kernel '" + k.name + "': row at " + x.to_string() +
                                    " sums to " + std::to_string(total));
    return r;
}

// Exact n-step law P_n^* init. Atoms falling below the prune threshold are
// dropped and the mass renormalized; the cut is accumulated in pruned_mass.
inline SparseDistribution propagate(const CountableKernel& kernel, const SparseDistribution& init,
                                    int n, double* pruned_mass = nullptr) {
    if (n < 0) throw std::invalid_argument("propagate: n must be >= 0");
    SparseDistribution current = init;
    double pruned_total = 0.0;
    for (int step = 0; step < n; ++step) {
        std::map<State, double> next;
        for (const auto& [s, w] : current.atoms())
            for (const auto& a : kernel_row(kernel, s)) next[a.state] += w * a.weight;
        double pruned = 0.0;
        current = SparseDistribution::collect(next, &pruned);
        pruned_total += pruned;
    }
    if (pruned_mass) *pruned_mass = pruned_total;
    return current;
}

enum class TimeKind { Discrete, JumpChain };

// Stochastic one-step sampler. In JumpChain mode holding times are Exp(1) and
// `flow` advances the deterministic component between jumps (identity when
// absent); in Discrete mode holding times are exactly 0 and steps count time 1.
struct SamplingKernel {
    std::string name;
    TimeKind time_kind = TimeKind::Discrete;
    std::function<std::pair<State, double>(const State&, RngStream&)> sample_next;
    std::function<State(const State&, double)> flow;  // optional, JumpChain only

    State flow_state(const State& s, double dt) const {
        if (!flow || dt == 0.0) return s;
        return flow(s, dt);
    }
};

// One sampled path: the jump skeleton plus the kernel's flow. position(t)
// resolves the state at any time in [0, horizon].
struct Trajectory {
    TimeKind time_kind = TimeKind::Discrete;
    std::vector<double> jump_times;  // jump_times[0] == 0, the start
    std::vector<State> states;       // state entered at jump_times[i]
    double horizon = 0.0;
    const SamplingKernel* kernel = nullptr;

    State position(double t) const {
        if (t < 0.0 || t > horizon) throw std::out_of_range("Trajectory::position: time outside horizon");
        std::size_t i = states.size() - 1;
        while (i > 0 && jump_times[i] > t) --i;
        if (time_kind == TimeKind::Discrete) return states[i];
        return kernel->flow_state(states[i], t - jump_times[i]);
    }
};

// Simulates n_paths independent paths to the given horizon. Path p uses the
// stream stream_for(seed, p); identical seeds give identical trajectories.
inline std::vector<Trajectory> simulate_paths(const SamplingKernel& kernel, const State& start,
                                              double horizon, int n_paths, std::uint64_t seed) {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_paths: horizon must be > 0");
    if (n_paths < 1) throw std::invalid_argument("simulate_paths: n_paths must be >= 1");
    std::vector<Trajectory> out;
    out.reserve(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        RngStream rng = stream_for(seed, static_cast<std::uint64_t>(p));
        Trajectory traj;
        traj.time_kind = kernel.time_kind;
        traj.horizon = horizon;
        traj.kernel = &kernel;
        traj.jump_times.push_back(0.0);
        traj.states.push_back(start);
        double t = 0.0;
        while (true) {
            const State& cur = traj.states.back();
            auto [next, hold] = kernel.sample_next(cur, rng);
            double dt = kernel.time_kind == TimeKind::Discrete ? 1.0 : hold;
            if (kernel.time_kind == TimeKind::Discrete && hold != 0.0)
                throw std::logic_error("simulate_paths: discrete kernel emitted a holding time");
            if (kernel.time_kind == TimeKind::JumpChain && !(hold > 0.0))
                throw std::logic_error("simulate_paths: jump-chain holding time must be > 0");
            if (t + dt > horizon) break;
            t += dt;
            traj.jump_times.push_back(t);
            traj.states.push_back(next);
        }
        out.push_back(std::move(traj));
    }
    return out;
}

// Discrete sampling view of a countable kernel (categorical row draws).
inline SamplingKernel sampling_from_countable(const CountableKernel& base) {
    SamplingKernel k;
    k.name = base.name + "/sampled";
    k.time_kind = TimeKind::Discrete;
    k.sample_next = [base](const State& x, RngStream& rng) {
        auto row = kernel_row(base, x);
        std::vector<double> w;
        w.reserve(row.size());
        for (const auto& a : row) w.push_back(a.weight);
        return std::make_pair(row[rng.categorical(w)].state, 0.0);
    };
    return k;
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    int excluded = 0;
};

namespace detail {
inline MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr r;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) r.mean += x;
    r.mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    if (xs.size() > 1) r.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return r;
}
}  // namespace detail

// Monte Carlo estimate of P_t f(x) over independent paths. Non-finite values
// of f are excluded and counted; strict mode turns any exclusion into an error.
inline MeanStderr estimate_Ptf(const SamplingKernel& kernel, const State& x, double t,
                               const std::function<double(const State&)>& f, int n_samples,
                               std::uint64_t seed, bool strict = false) {
    if (n_samples < 2) throw std::invalid_argument("estimate_Ptf: need at least 2 samples");
    auto paths = simulate_paths(kernel, x, t, n_samples, seed);
    std::vector<double> values;
    values.reserve(paths.size());
    int excluded = 0;
    for (const auto& traj : paths) {
        double v = f(traj.position(t));
        if (!std::isfinite(v)) {
            ++excluded;
            continue;
        }
        values.push_back(v);
    }
    if (excluded > 0 && strict)
        throw std::domain_error("estimate_Ptf: " + std::to_string(excluded) +
                                " non-finite f values under strict mode");
    if (values.size() < 2) throw std::domain_error("estimate_Ptf: too few finite samples");
    auto r = detail::mean_stderr(values);
    r.excluded = excluded;
    return r;
}

// Exact discrete Cesaro average (1/t) * sum_{s=1..t} P_s f(x).
inline double cesaro_Qtf_exact(const CountableKernel& kernel, const State& x, int t,
                               const std::function<double(const State&)>& f) {
    if (t < 1) throw std::invalid_argument("cesaro_Qtf_exact: t must be >= 1");
    SparseDistribution law = SparseDistribution::delta(x);
    double sum = 0.0;
    for (int s = 1; s <= t; ++s) {
        law = propagate(kernel, law, 1);
        sum += integrate(law, f);
    }
    return sum / static_cast<double>(t);
}

// Monte Carlo Q_t f(x): each path contributes the average of f at
// times_per_path uniform draws from (0, t], an unbiased estimate of the
// path's time average; the standard error is across paths.
inline MeanStderr cesaro_Qtf_mc(const SamplingKernel& kernel, const State& x, double t,
                                const std::function<double(const State&)>& f, int n_paths,
                                std::uint64_t seed, int times_per_path = 8) {
    if (!(t > 0.0)) throw std::invalid_argument("cesaro_Qtf_mc: t must be > 0");
    if (n_paths < 2 || times_per_path < 1)
        throw std::invalid_argument("cesaro_Qtf_mc: bad sample counts");
    std::vector<double> path_means;
    path_means.reserve(n_paths);
    auto paths = simulate_paths(kernel, x, t, n_paths, seed);
    for (int p = 0; p < n_paths; ++p) {
        // Evaluation times come from a separate stream so the path law is
        // unchanged; offset avoids colliding with path streams.
        RngStream trng = stream_for(seed ^ 0x5ca1ab1e0ddba11ULL, static_cast<std::uint64_t>(p));
        double acc = 0.0;
        for (int i = 0; i < times_per_path; ++i) {
            double u = t * trng.uniform_positive();
            acc += f(paths[p].position(u));
        }
        path_means.push_back(acc / times_per_path);
    }
    return detail::mean_stderr(path_means);
}

}  // namespace ergodiag
