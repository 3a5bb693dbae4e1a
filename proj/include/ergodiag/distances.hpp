#pragma once

// Probability metrics on exact sparse measures: total variation in the
// two-sided test-function convention sup_{||f||<=1} |<f,mu> - <f,nu>| (range
// [0,2]), the V-weighted total variation d_V, and the family-sup gap that
// realizes Kantorovich--Rubinstein duality per family kind.

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

#include "ergodiag/distribution.hpp"
#include "ergodiag/state.hpp"
#include "ergodiag/test_functions.hpp"
#include "ergodiag/transport.hpp"

namespace ergodiag {

namespace detail {
inline std::map<State, double> signed_difference(const SparseDistribution& mu,
                                                 const SparseDistribution& nu) {
    std::map<State, double> diff;
    for (const auto& [s, w] : mu.atoms()) diff[s] += w;
    for (const auto& [s, w] : nu.atoms()) diff[s] -= w;
    return diff;
}
}  // namespace detail

// sup_{||f||_inf <= 1} |<f,mu> - <f,nu>| = sum_s |mu(s) - nu(s)|. Twice the
// common sup_A |mu(A) - nu(A)| convention.
inline double tv_distance(const SparseDistribution& mu, const SparseDistribution& nu) {
    double total = 0.0;
    for (const auto& [s, d] : detail::signed_difference(mu, nu)) total += std::fabs(d);
    return total;
}

// d_V(mu, nu) = sum_s |mu(s) - nu(s)| (1 + V(s)); equals the coupling infimum
// of chi_{x != y} (2 + V(x) + V(y)) on countable spaces.
inline double weighted_tv(const SparseDistribution& mu, const SparseDistribution& nu,
                          const std::function<double(const State&)>& V) {
    double total = 0.0;
    for (const auto& [s, d] : detail::signed_difference(mu, nu)) {
        double v = V(s);
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::domain_error("weighted_tv: V must be finite and >= 0, got " +
                                    std::to_string(v) + " at " + s.to_string());
        total += std::fabs(d) * (1.0 + v);
    }
    return total;
}

// Exact sup over the family of |<f,mu> - <f,nu>|: TV for the sup-norm ball,
// d_V for the weighted family, W_1 under d (duality) for bounded Lipschitz.
// Growth/alpha families have no closed sup; callers use representatives.
inline double family_sup_gap(const SparseDistribution& mu, const SparseDistribution& nu,
                             const TestFunctionFamily& family, const Metric& d) {
    switch (family.kind) {
        case FamilyKind::SupNorm:
            return tv_distance(mu, nu);
        case FamilyKind::Weighted:
            return weighted_tv(mu, nu, family.weight);
        case FamilyKind::LipBounded:
            return wasserstein_exact(mu, nu, 1.0, d).value;
        default:
            throw std::invalid_argument(
                std::string("family_sup_gap: no closed-form sup for family kind '") +
                family_kind_name(family.kind) + "'; evaluate representatives instead");
    }
}

}  // namespace ergodiag
