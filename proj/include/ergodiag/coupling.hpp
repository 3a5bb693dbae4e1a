#pragma once

// Independent product coupling and hitting-time machinery: the product kernel
// R_t((x,y), A x B) = P_t(x,A) P_t(y,B), first entry times of the pair into
// B(z,r) x B(z,r), the plug-in gamma_z(r) estimate, and the blockwise
// (1 - gamma/2)^n survival bound check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergodiag/kernel.hpp"
#include "ergodiag/rng.hpp"
#include "ergodiag/state.hpp"

namespace ergodiag {

// Independent componentwise coupling of a base chain, acting on pair states.
// Exact rows exist when the base is countable; the sampling form draws the
// two components from one stream in a fixed order.
struct CoupledKernel {
    std::optional<CountableKernel> countable;
    SamplingKernel sampling;
};

inline CoupledKernel product_kernel(const CountableKernel& base) {
    CoupledKernel ck;
    CountableKernel pk;
    pk.name = base.name + "^2";
    pk.row = [base](const State& s) {
        auto r1 = kernel_row(base, s.pair_first());
        auto r2 = kernel_row(base, s.pair_second());
        std::vector<Atom> out;
        out.reserve(r1.size() * r2.size());
        for (const auto& a : r1)
            for (const auto& b : r2)
                out.push_back({State(a.state, b.state), a.weight * b.weight});
        return out;
    };
    ck.countable = pk;

    SamplingKernel base_sampler = sampling_from_countable(base);
    SamplingKernel sk;
    sk.name = base.name + "^2/sampled";
    sk.time_kind = TimeKind::Discrete;
    sk.sample_next = [base_sampler](const State& s, RngStream& rng) {
        State first = base_sampler.sample_next(s.pair_first(), rng).first;
        State second = base_sampler.sample_next(s.pair_second(), rng).first;
        return std::make_pair(State(first, second), 0.0);
    };
    ck.sampling = sk;
    return ck;
}

inline CoupledKernel product_kernel(const SamplingKernel& base) {
    if (base.time_kind != TimeKind::Discrete)
        throw std::invalid_argument("product_kernel: only discrete base kernels are coupled");
    CoupledKernel ck;
    SamplingKernel sk;
    sk.name = base.name + "^2";
    sk.time_kind = TimeKind::Discrete;
    sk.sample_next = [base](const State& s, RngStream& rng) {
        State first = base.sample_next(s.pair_first(), rng).first;
        State second = base.sample_next(s.pair_second(), rng).first;
        return std::make_pair(State(first, second), 0.0);
    };
    ck.sampling = sk;
    return ck;
}

struct HittingRecord {
    State start;
    State center;
    double radius = 0.0;
    bool censored = true;
    int tau = 0;          // valid when !censored; tau = 0 means the start is in B
    int path_length = 0;  // steps actually simulated
};

inline bool pair_in_ball(const State& pair, const State& z, double r, const Metric& metric) {
    return metric(pair.pair_first(), z) <= r && metric(pair.pair_second(), z) <= r;
}

// First entry time of the coupled pair into closed B(z,r) x B(z,r), censored
// at the horizon.
inline HittingRecord sample_hitting_time(const CoupledKernel& ck, const State& start,
                                         const State& z, double r, const Metric& metric,
                                         int horizon, std::uint64_t seed) {
    if (!(r > 0.0)) throw std::invalid_argument("sample_hitting_time: r must be > 0");
    if (horizon < 0) throw std::invalid_argument("sample_hitting_time: horizon must be >= 0");
    HittingRecord rec;
    rec.start = start;
    rec.center = z;
    rec.radius = r;
    if (pair_in_ball(start, z, r, metric)) {
        rec.censored = false;
        rec.tau = 0;
        return rec;
    }
    RngStream rng = stream_for(seed, 0);
    State cur = start;
    for (int t = 1; t <= horizon; ++t) {
        cur = ck.sampling.sample_next(cur, rng).first;
        rec.path_length = t;
        if (pair_in_ball(cur, z, r, metric)) {
            rec.censored = false;
            rec.tau = t;
            return rec;
        }
    }
    return rec;
}

struct GammaEstimate {
    double gamma = 0.0;         // (min-over-probes tail statistic / 2)^2
    double min_probability = 0.0;
    bool inconclusive = false;  // degenerate (estimate 0)
    std::vector<double> per_probe_tail_min;
};

// Plug-in estimate of gamma_z(r): the liminf over t is approximated by the
// minimum over the upper half of t_grid, the inf over x by the minimum over
// the probe set.
inline GammaEstimate estimate_gamma(const SamplingKernel& kernel, const State& z, double r,
                                    const Metric& metric, const std::vector<State>& probes,
                                    const std::vector<double>& t_grid, int samples,
                                    std::uint64_t seed) {
    if (probes.empty()) throw std::invalid_argument("estimate_gamma: empty probe set");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw std::invalid_argument("estimate_gamma: t_grid must be increasing");
    GammaEstimate est;
    const std::size_t tail_start = t_grid.size() / 2;
    const double horizon = t_grid.back();
    double overall_min = 1.0;
    for (std::size_t pi = 0; pi < probes.size(); ++pi) {
        auto paths = simulate_paths(kernel, probes[pi], horizon, samples, seed + pi);
        double tail_min = 1.0;
        for (std::size_t ti = tail_start; ti < t_grid.size(); ++ti) {
            int hits = 0;
            for (const auto& traj : paths)
                if (metric(traj.position(t_grid[ti]), z) <= r) ++hits;
            tail_min = std::min(tail_min, static_cast<double>(hits) / samples);
        }
        est.per_probe_tail_min.push_back(tail_min);
        overall_min = std::min(overall_min, tail_min);
    }
    est.min_probability = overall_min;
    est.gamma = (overall_min / 2.0) * (overall_min / 2.0);
    est.inconclusive = !(est.gamma > 0.0);
    return est;
}

struct TailBoundBlock {
    int block = 0;           // n, 1-based
    int horizon_steps = 0;   // steps added by this block
    double entry_rate = 0.0; // fraction of entrants among this block's starters
    double survival = 0.0;   // empirical P(tau > cumulative horizon)
    double bound = 0.0;      // (1 - gamma/2)^n
    double sigma = 0.0;      // binomial standard error of survival
    bool pass = false;
};

struct TailBoundReport {
    bool inconclusive = false;
    bool all_pass = false;
    double gamma = 0.0;
    std::vector<TailBoundBlock> blocks;
};

// Checks the recursive survival bound P(tau > t_0 + ... + t_n) <= (1-gamma/2)^n
// empirically. Each block's horizon is found by doubling until the surviving
// population enters B at rate >= gamma/2, realizing the Theta_i restart
// construction by conditioning on surviving paths.
inline TailBoundReport verify_tail_bound(const CoupledKernel& ck, const State& start,
                                         const State& z, double r, const Metric& metric,
                                         double gamma, int n_blocks, int samples,
                                         std::uint64_t seed, int horizon_cap = 4096) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("verify_tail_bound: gamma must be in (0, 1]");
    TailBoundReport report;
    report.gamma = gamma;

    std::vector<State> population(samples, start);
    std::vector<RngStream> streams;
    streams.reserve(samples);
    for (int p = 0; p < samples; ++p) streams.push_back(stream_for(seed, p));

    const double target = gamma / 2.0;
    double cumulative_survival = 1.0;
    int alive = samples;

    // Paths already inside B at the start survive no block.
    if (pair_in_ball(start, z, r, metric)) alive = 0;

    for (int n = 1; n <= n_blocks && alive > 0; ++n) {
        // Doubling search for a block horizon achieving entry rate >= gamma/2.
        int h = 1;
        std::vector<State> advanced;
        std::vector<char> entered;
        double rate = 0.0;
        while (true) {
            advanced.assign(population.begin(), population.begin() + alive);
            entered.assign(alive, 0);
            int hits = 0;
            for (int p = 0; p < alive; ++p) {
                RngStream probe = streams[p];  // copy; the real advance happens below
                State cur = advanced[p];
                for (int s = 0; s < h && !entered[p]; ++s) {
                    cur = ck.sampling.sample_next(cur, probe).first;
                    if (pair_in_ball(cur, z, r, metric)) entered[p] = 1;
                }
                advanced[p] = cur;
                if (entered[p]) ++hits;
            }
            rate = static_cast<double>(hits) / alive;
            if (rate >= target || h >= horizon_cap) break;
            h *= 2;
        }
        if (rate < target) {
            report.inconclusive = true;
            return report;
        }
        // Commit the advance: replay the same h steps on the real streams.
        int survivors = 0;
        std::vector<State> next_population;
        std::vector<RngStream> next_streams;
        for (int p = 0; p < alive; ++p) {
            State cur = population[p];
            bool hit = false;
            for (int s = 0; s < h && !hit; ++s) {
                cur = ck.sampling.sample_next(cur, streams[p]).first;
                if (pair_in_ball(cur, z, r, metric)) hit = true;
            }
            if (!hit) {
                next_population.push_back(cur);
                next_streams.push_back(streams[p]);
                ++survivors;
            }
        }
        cumulative_survival *= static_cast<double>(survivors) / alive;

        TailBoundBlock blk;
        blk.block = n;
        blk.horizon_steps = h;
        blk.entry_rate = rate;
        blk.survival = cumulative_survival;
        blk.bound = std::pow(1.0 - gamma / 2.0, n);
        blk.sigma = std::sqrt(std::max(cumulative_survival * (1.0 - cumulative_survival), 0.0) /
                              samples);
        blk.pass = blk.survival <= blk.bound + 3.0 * blk.sigma;
        report.blocks.push_back(blk);

        population = std::move(next_population);
        streams = std::move(next_streams);
        alive = survivors;
    }
    // Blocks after extinction have survival 0, trivially below the bound.
    for (int n = static_cast<int>(report.blocks.size()) + 1; n <= n_blocks; ++n) {
        TailBoundBlock blk;
        blk.block = n;
        blk.survival = 0.0;
        blk.bound = std::pow(1.0 - gamma / 2.0, n);
        blk.pass = true;
        report.blocks.push_back(blk);
    }
    report.all_pass = true;
    for (const auto& b : report.blocks) report.all_pass = report.all_pass && b.pass;
    return report;
}

}  // namespace ergodiag
