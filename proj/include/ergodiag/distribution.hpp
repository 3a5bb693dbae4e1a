#pragma once

// Finitely supported measures: SparseDistribution carries exact weights for
// countable chains, EmpiricalMeasure is the Monte Carlo surrogate.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodiag/state.hpp"

namespace ergodiag {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kPruneWeight = 1e-15;

struct Atom {
    State state;
    double weight;
};

class SparseDistribution {
public:
    SparseDistribution() = default;

    // Atoms must be distinct, weights positive, total mass 1 within 1e-12.
    static SparseDistribution from_atoms(std::vector<Atom> atoms) {
        SparseDistribution d;
        std::map<State, double> acc;
        double total = 0.0;
        for (auto& a : atoms) {
            if (!(a.weight > 0.0))
                throw std::invalid_argument("SparseDistribution: nonpositive weight");
            if (!acc.emplace(a.state, a.weight).second)
                throw std::invalid_argument("SparseDistribution: duplicate atom " +
                                            a.state.to_string());
            total += a.weight;
        }
        if (std::fabs(total - 1.0) > kMassTolerance)
            throw std::invalid_argument("SparseDistribution: mass " + std::to_string(total) +
                                        " not within 1e-12 of 1");
        d.atoms_.assign(acc.begin(), acc.end());
        return d;
    }

    static SparseDistribution delta(const State& s) { return from_atoms({{s, 1.0}}); }

    // Collects possibly repeated (state, weight) contributions, prunes atoms
    // below kPruneWeight and renormalizes. pruned_mass reports what was cut.
    static SparseDistribution collect(const std::map<State, double>& acc,
                                      double* pruned_mass = nullptr) {
        double total = 0.0, pruned = 0.0;
        SparseDistribution d;
        d.atoms_.reserve(acc.size());
        for (const auto& [s, w] : acc) {
            if (w < kPruneWeight) {
                pruned += w;
                continue;
            }
            d.atoms_.push_back({s, w});
            total += w;
        }
        if (!(total > 0.0)) throw std::invalid_argument("SparseDistribution: zero total mass");
        for (auto& [s2, w2] : d.atoms_) w2 /= total;
        if (pruned_mass) *pruned_mass = pruned;
        return d;
    }

    const std::vector<std::pair<State, double>>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    double mass_at(const State& s) const {
        for (const auto& [st, w] : atoms_)
            if (st == s) return w;
        return 0.0;
    }

    double total_mass() const {
        double m = 0.0;
        for (const auto& [s, w] : atoms_) m += w;
        return m;
    }

private:
    std::vector<std::pair<State, double>> atoms_;
};

// <f, mu> as an exact weighted sum.
inline double integrate(const SparseDistribution& dist,
                        const std::function<double(const State&)>& f) {
    double sum = 0.0;
    for (const auto& [s, w] : dist.atoms()) {
        double v = f(s);
        if (!std::isfinite(v))
            throw std::domain_error("integrate: f is not finite at " + s.to_string());
        sum += w * v;
    }
    return sum;
}

// Weighted sample cloud with provenance. Weights are positive and sum to 1.
struct EmpiricalMeasure {
    std::vector<std::pair<State, double>> points;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;

    static EmpiricalMeasure from_samples(std::vector<State> samples, std::uint64_t seed) {
        EmpiricalMeasure m;
        m.seed = seed;
        m.sample_count = samples.size();
        if (samples.empty()) throw std::invalid_argument("EmpiricalMeasure: no samples");
        const double w = 1.0 / static_cast<double>(samples.size());
        m.points.reserve(samples.size());
        for (auto& s : samples) m.points.emplace_back(std::move(s), w);
        return m;
    }
};

}  // namespace ergodiag
