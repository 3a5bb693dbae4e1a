#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ergodiag/distances.hpp"
#include "ergodiag/models.hpp"
#include "ergodiag/transport.hpp"
#include "oracles.hpp"

using namespace ergodiag;

namespace {

State real_state(double x) { return State(RealPoint{x}); }

SparseDistribution measure_on(const std::vector<double>& xs, const std::vector<double>& ws) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < xs.size(); ++i) atoms.push_back({real_state(xs[i]), ws[i]});
    return SparseDistribution::from_atoms(std::move(atoms));
}

// Random small instance on distinct real support points.
struct Instance {
    SparseDistribution mu, nu;
    std::vector<double> support_mu, support_nu;
};

Instance random_instance(RngStream& rng) {
    auto draw_side = [&](std::vector<double>& support) {
        int k = 1 + static_cast<int>(rng.uniform(0.0, 6.0));
        std::vector<double> ws;
        double total = 0.0;
        while (static_cast<int>(support.size()) < k) {
            double x = std::floor(rng.uniform(0.0, 40.0)) / 4.0;
            bool dup = false;
            for (double y : support) dup = dup || y == x;
            if (!dup) support.push_back(x);
        }
        for (int i = 0; i < k; ++i) {
            ws.push_back(rng.uniform(0.1, 1.0));
            total += ws.back();
        }
        for (auto& w : ws) w /= total;
        return ws;
    };
    Instance inst;
    auto wa = draw_side(inst.support_mu);
    auto wb = draw_side(inst.support_nu);
    inst.mu = measure_on(inst.support_mu, wa);
    inst.nu = measure_on(inst.support_nu, wb);
    return inst;
}

double oracle_wasserstein(const Instance& inst, double p) {
    std::vector<double> a, b;
    for (const auto& [s, w] : inst.mu.atoms()) a.push_back(w);
    for (const auto& [s, w] : inst.nu.atoms()) b.push_back(w);
    std::vector<std::vector<double>> cost;
    for (const auto& [s, w] : inst.mu.atoms()) {
        std::vector<double> row;
        for (const auto& [t, v] : inst.nu.atoms())
            row.push_back(std::pow(std::fabs(s.as<RealPoint>().x - t.as<RealPoint>().x), p));
        cost.push_back(row);
    }
    return std::pow(oracles::min_cost_transport(a, b, cost), 1.0 / p);
}

double oracle_weighted_tv(const Instance& inst,
                          const std::function<double(const State&)>& V) {
    std::vector<double> a, b;
    for (const auto& [s, w] : inst.mu.atoms()) a.push_back(w);
    for (const auto& [s, w] : inst.nu.atoms()) b.push_back(w);
    std::vector<std::vector<double>> cost;
    for (const auto& [s, w] : inst.mu.atoms()) {
        std::vector<double> row;
        for (const auto& [t, v] : inst.nu.atoms())
            row.push_back(s == t ? 0.0 : 2.0 + V(s) + V(t));
        cost.push_back(row);
    }
    return oracles::min_cost_transport(a, b, cost);
}

}  // namespace

TEST_CASE("two deltas") {
    Metric d = absolute_metric();
    for (double p : {1.0, 2.0, 3.0}) {
        auto res = wasserstein_exact(SparseDistribution::delta(real_state(1.0)),
                                     SparseDistribution::delta(real_state(4.0)), p, d);
        CHECK(res.value == Catch::Approx(3.0).margin(1e-9));
        REQUIRE(res.plan.entries.size() == 1);
        CHECK(res.plan.entries[0].mass == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("textbook 2x2 instance") {
    auto mu = measure_on({0.0, 1.0}, {0.5, 0.5});
    auto nu = measure_on({0.0, 2.0}, {0.5, 0.5});
    CHECK(wasserstein_exact(mu, nu, 1.0, absolute_metric()).value ==
          Catch::Approx(0.5).margin(1e-9));
    CHECK(wasserstein_1d(mu, nu, 1.0) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("dyadic escape keeps W1 constant") {
    Metric d = absolute_metric();
    auto zero = SparseDistribution::delta(State(DyadicState::zero()));
    for (int i : {1, 2, 5})
        for (int n : {1, 5, 10, 20}) {
            auto law = dyadic_exact_law(i, n);
            CHECK(wasserstein_exact(law, zero, 1.0, d).value ==
                  Catch::Approx(std::exp2(i)).margin(1e-9));
        }
}

TEST_CASE("quantile shift by one") {
    auto mu = measure_on({0.0, 1.0}, {0.5, 0.5});
    auto nu = measure_on({1.0, 2.0}, {0.5, 0.5});
    CHECK(wasserstein_1d(mu, nu, 2.0) == Catch::Approx(1.0).margin(1e-9));
    CHECK(wasserstein_exact(mu, nu, 2.0, absolute_metric()).value ==
          Catch::Approx(1.0).margin(1e-9));
    CHECK(wasserstein_1d(mu, mu, 1.0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("1d fast path rejects non-embeddable states") {
    auto mu = SparseDistribution::delta(State(TorusPoint::make(0.0, 0.0)));
    CHECK_THROWS_AS(wasserstein_1d(mu, mu, 1.0), std::invalid_argument);
}

TEST_CASE("support cap") {
    auto mu = SparseDistribution::delta(real_state(0.0));
    CHECK_THROWS_AS(wasserstein_exact(mu, mu, 1.0, absolute_metric(), 1), std::length_error);
}

TEST_CASE("plan satisfies the marginals") {
    RngStream rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = random_instance(rng);
        auto res = wasserstein_exact(inst.mu, inst.nu, 1.0, absolute_metric());
        auto rows = res.plan.row_sums();
        auto cols = res.plan.col_sums();
        std::size_t i = 0;
        for (const auto& [s, w] : inst.mu.atoms()) CHECK(std::fabs(rows[i++] - w) <= 1e-9);
        std::size_t j = 0;
        for (const auto& [s, w] : inst.nu.atoms()) CHECK(std::fabs(cols[j++] - w) <= 1e-9);
        for (const auto& e : res.plan.entries) CHECK(e.mass >= 0.0);
    }
}

TEST_CASE("simplex and weighted_tv match the flow oracle on 500 instances") {
    RngStream rng(123);
    auto V = [](const State& s) { return s.as<RealPoint>().x; };
    for (int trial = 0; trial < 500; ++trial) {
        auto inst = random_instance(rng);
        double p = trial % 2 == 0 ? 1.0 : 2.0;
        double got = wasserstein_exact(inst.mu, inst.nu, p, absolute_metric()).value;
        double want = oracle_wasserstein(inst, p);
        CHECK(std::fabs(got - want) <= 1e-9);
        if (p == 1.0)
            CHECK(std::fabs(got - wasserstein_1d(inst.mu, inst.nu, 1.0)) <= 1e-9);
        CHECK(std::fabs(weighted_tv(inst.mu, inst.nu, V) - oracle_weighted_tv(inst, V)) <= 1e-9);
    }
}

TEST_CASE("wasserstein metric axioms on random instances") {
    RngStream rng(555);
    Metric d = absolute_metric();
    for (int trial = 0; trial < 150; ++trial) {
        auto a = random_instance(rng), b = random_instance(rng), c = random_instance(rng);
        double ab = wasserstein_exact(a.mu, b.mu, 1.0, d).value;
        double ba = wasserstein_exact(b.mu, a.mu, 1.0, d).value;
        double ac = wasserstein_exact(a.mu, c.mu, 1.0, d).value;
        double cb = wasserstein_exact(c.mu, b.mu, 1.0, d).value;
        CHECK(ab >= 0.0);
        CHECK(std::fabs(ab - ba) <= 1e-9);
        CHECK(ab <= ac + cb + 1e-9);
        CHECK(wasserstein_exact(a.mu, a.mu, 1.0, d).value <= 1e-9);
    }
}

TEST_CASE("weak duality against Lipschitz candidates") {
    RngStream rng(777);
    std::vector<std::function<double(const State&)>> candidates = {
        [](const State& s) { return s.as<RealPoint>().x; },
        [](const State& s) { return -s.as<RealPoint>().x; },
        [](const State& s) { return std::fabs(s.as<RealPoint>().x - 3.0); },
        [](const State& s) { return std::min(s.as<RealPoint>().x, 2.0); },
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = random_instance(rng);
        double w1 = wasserstein_exact(inst.mu, inst.nu, 1.0, absolute_metric()).value;
        for (const auto& f : candidates)
            CHECK(std::fabs(integrate(inst.mu, f) - integrate(inst.nu, f)) <= w1 + 1e-9);
    }
}
