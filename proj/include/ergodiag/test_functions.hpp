#pragma once

// Test-function families: bounded Lipschitz balls, the sup-norm ball, growth
// classes 1 + rho(x0,x)^p, the V^alpha classes of the dyadic example, and
// V-weighted envelopes. Estimators work with a finite list of representative
// members; the exact sup over the whole family is available only for the
// sup-norm and weighted kinds (see distances.hpp).

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodiag/state.hpp"

namespace ergodiag {

enum class FamilyKind { LipBounded, SupNorm, Growth, Alpha, Weighted };

inline const char* family_kind_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::LipBounded: return "lip_bounded";
        case FamilyKind::SupNorm: return "sup_norm";
        case FamilyKind::Growth: return "growth";
        case FamilyKind::Alpha: return "alpha";
        case FamilyKind::Weighted: return "weighted";
    }
    return "?";
}

struct NamedFunction {
    std::string name;
    std::function<double(const State&)> fn;
};

struct TestFunctionFamily {
    FamilyKind kind = FamilyKind::SupNorm;
    std::string name;
    std::function<double(const State&)> envelope;
    std::vector<NamedFunction> representatives;

    // Parameters, populated per kind.
    double lip_bound = 1.0;     // LipBounded
    double growth_exponent = 1; // Growth
    double alpha = 1.0;         // Alpha
    std::function<double(const State&)> weight;  // Weighted: V; Alpha: V
};

namespace families {

// {f : ||f||_inf <= 1}; representatives are +-1, sign probes and cosines of a
// coordinate when one exists.
inline TestFunctionFamily sup_norm(std::vector<NamedFunction> reps) {
    TestFunctionFamily fam;
    fam.kind = FamilyKind::SupNorm;
    fam.name = "sup_norm(1)";
    fam.envelope = [](const State&) { return 1.0; };
    fam.representatives = std::move(reps);
    return fam;
}

// Bounded Lipschitz ball w.r.t. a metric d: ||f||_inf <= bound and Lip <= 1.
inline TestFunctionFamily lip_bounded(double bound, std::vector<NamedFunction> reps) {
    TestFunctionFamily fam;
    fam.kind = FamilyKind::LipBounded;
    fam.name = "lip_bounded(" + std::to_string(bound) + ")";
    fam.lip_bound = bound;
    fam.envelope = [bound](const State&) { return bound; };
    fam.representatives = std::move(reps);
    return fam;
}

// {f in C : |f(x)| <= 1 + rho(x0, x)^p}.
inline TestFunctionFamily growth(double p, State x0, Metric metric,
                                 std::vector<NamedFunction> reps) {
    TestFunctionFamily fam;
    fam.kind = FamilyKind::Growth;
    fam.name = "growth(p=" + std::to_string(p) + ")";
    fam.growth_exponent = p;
    fam.envelope = [p, x0 = std::move(x0), metric = std::move(metric)](const State& s) {
        return 1.0 + std::pow(metric(x0, s), p);
    };
    fam.representatives = std::move(reps);
    return fam;
}

// {f : f(x) <= V^alpha(x)} for a nonnegative V.
inline TestFunctionFamily alpha(double a, std::function<double(const State&)> V,
                                std::vector<NamedFunction> reps) {
    TestFunctionFamily fam;
    fam.kind = FamilyKind::Alpha;
    fam.name = "alpha(" + std::to_string(a) + ")";
    fam.alpha = a;
    fam.weight = V;
    fam.envelope = [a, V = std::move(V)](const State& s) { return std::pow(V(s), a); };
    fam.representatives = std::move(reps);
    return fam;
}

// {f : |f(x)| <= 1 + V(x)}.
inline TestFunctionFamily weighted(std::function<double(const State&)> V,
                                   std::vector<NamedFunction> reps) {
    TestFunctionFamily fam;
    fam.kind = FamilyKind::Weighted;
    fam.name = "weighted";
    fam.weight = std::move(V);
    fam.envelope = [V2 = fam.weight](const State& s) { return 1.0 + V2(s); };
    fam.representatives = std::move(reps);
    return fam;
}

}  // namespace families

// Checks |f(x)| <= envelope(x) for every representative on the given states.
inline void check_envelope(const TestFunctionFamily& fam, const std::vector<State>& states,
                           double tol = 1e-12) {
    for (const auto& rep : fam.representatives)
        for (const auto& s : states)
            if (std::fabs(rep.fn(s)) > fam.envelope(s) + tol)
                throw std::logic_error("family '" + fam.name + "': representative '" + rep.name +
                                       "' exceeds envelope at " + s.to_string());
}

}  // namespace ergodiag
