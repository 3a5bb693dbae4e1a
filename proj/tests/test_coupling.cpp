#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "ergodiag/coupling.hpp"
#include "ergodiag/models.hpp"

using namespace ergodiag;

namespace {

State pair_state(int i, int j) {
    State a = i == 0 ? State(DyadicState::zero()) : State(DyadicState::level(i));
    State b = j == 0 ? State(DyadicState::zero()) : State(DyadicState::level(j));
    return State(a, b);
}

SparseDistribution first_marginal(const SparseDistribution& joint) {
    std::map<State, double> acc;
    for (const auto& [s, w] : joint.atoms()) acc[s.pair_first()] += w;
    return SparseDistribution::collect(acc);
}

}  // namespace

TEST_CASE("product kernel rows") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    REQUIRE(ck.countable.has_value());

    auto row = kernel_row(*ck.countable, pair_state(1, 1));
    REQUIRE(row.size() == 4);
    for (const auto& a : row) CHECK(a.weight == Catch::Approx(0.25).margin(1e-12));

    auto absorbed = kernel_row(*ck.countable, pair_state(0, 0));
    REQUIRE(absorbed.size() == 1);
    CHECK(absorbed[0].state == pair_state(0, 0));
    CHECK(absorbed[0].weight == 1.0);
}

TEST_CASE("coupling preserves the marginals exactly") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    auto joint = propagate(*ck.countable, SparseDistribution::delta(pair_state(1, 1)), 2);
    auto marg = first_marginal(joint);
    auto want = dyadic_exact_law(1, 2);
    REQUIRE(marg.size() == want.size());
    for (const auto& [s, w] : want.atoms()) CHECK(std::fabs(marg.mass_at(s) - w) <= 1e-12);
}

TEST_CASE("hitting times") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    State z(DyadicState::zero());

    auto inside = sample_hitting_time(ck, pair_state(0, 0), z, 0.5, model.metric, 100, 3);
    CHECK_FALSE(inside.censored);
    CHECK(inside.tau == 0);

    auto zero_horizon = sample_hitting_time(ck, pair_state(1, 1), z, 0.5, model.metric, 0, 3);
    CHECK(zero_horizon.censored);

    CHECK_THROWS_AS(sample_hitting_time(ck, pair_state(1, 1), z, 0.0, model.metric, 10, 3),
                    std::invalid_argument);

    // P(tau <= 1) from (2,2) is 1/4: both components must jump to 0 at once.
    int n = 4000, hits = 0;
    for (int s = 0; s < n; ++s) {
        auto rec = sample_hitting_time(ck, pair_state(1, 1), z, 0.5, model.metric, 1, 100 + s);
        if (!rec.censored) ++hits;
    }
    double p = static_cast<double>(hits) / n;
    double sigma = std::sqrt(0.25 * 0.75 / n);
    CHECK(std::fabs(p - 0.25) <= 3.0 * sigma);
}

TEST_CASE("a larger target ball is hit no later under the same seed") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    State z(DyadicState::zero());
    for (int s = 0; s < 50; ++s) {
        auto small = sample_hitting_time(ck, pair_state(2, 3), z, 0.5, model.metric, 64, 900 + s);
        auto big = sample_hitting_time(ck, pair_state(2, 3), z, 2.5, model.metric, 64, 900 + s);
        if (!small.censored) {
            REQUIRE_FALSE(big.censored);
            CHECK(big.tau <= small.tau);
        }
    }
}

TEST_CASE("survival is nonincreasing in the horizon") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    State z(DyadicState::zero());
    int n = 1000;
    double prev = 1.0;
    for (int horizon : {1, 2, 4, 8, 16}) {
        int censored = 0;
        for (int s = 0; s < n; ++s)
            if (sample_hitting_time(ck, pair_state(1, 1), z, 0.5, model.metric, horizon, 40 + s)
                    .censored)
                ++censored;
        double survival = static_cast<double>(censored) / n;
        CHECK(survival <= prev + 1e-12);
        prev = survival;
        // Exact: 1 - (1 - 2^-n)^2.
        double exact = 1.0 - std::pow(1.0 - std::exp2(-horizon), 2.0);
        double sigma = std::sqrt(std::max(exact * (1.0 - exact), 1e-9) / n);
        CHECK(std::fabs(survival - exact) <= 4.0 * sigma);
    }
}

TEST_CASE("gamma estimate on the dyadic chain") {
    auto model = dyadic_chain();
    std::vector<double> t_grid;
    for (int t = 1; t <= 40; ++t) t_grid.push_back(t);
    auto est = estimate_gamma(*model.sampling, State(DyadicState::zero()), 0.5, model.metric,
                              model.default_probes, t_grid, 400, 5);
    CHECK_FALSE(est.inconclusive);
    CHECK(est.min_probability > 0.9);
    CHECK(est.gamma == Catch::Approx(est.min_probability * est.min_probability / 4.0));
    CHECK(est.gamma > 0.2);
}

TEST_CASE("gamma estimate degenerates on a frozen chain") {
    SamplingKernel frozen;
    frozen.name = "frozen";
    frozen.time_kind = TimeKind::Discrete;
    frozen.sample_next = [](const State& s, RngStream&) { return std::make_pair(s, 0.0); };

    std::vector<double> t_grid = {1, 2, 3, 4};
    Metric d = absolute_metric();
    State z(DyadicState::zero());

    auto stuck = estimate_gamma(frozen, z, 0.5, d, {State(DyadicState::level(3))}, t_grid, 50, 1);
    CHECK(stuck.inconclusive);
    CHECK(stuck.gamma == 0.0);

    auto at_center = estimate_gamma(frozen, z, 0.5, d, {z}, t_grid, 50, 1);
    CHECK_FALSE(at_center.inconclusive);
    CHECK(at_center.gamma == Catch::Approx(0.25));

    CHECK_THROWS_AS(estimate_gamma(frozen, z, 0.5, d, {}, t_grid, 50, 1), std::invalid_argument);
}

TEST_CASE("tail bound report") {
    auto model = dyadic_chain();
    auto ck = product_kernel(*model.countable);
    State z(DyadicState::zero());
    auto report = verify_tail_bound(ck, pair_state(1, 1), z, 0.5, model.metric, 0.25, 8, 8000, 21);
    CHECK_FALSE(report.inconclusive);
    CHECK(report.all_pass);
    REQUIRE(report.blocks.size() == 8);
    double prev = 1.0;
    for (const auto& blk : report.blocks) {
        CHECK(blk.pass);
        CHECK(blk.survival <= prev + 1e-12);
        CHECK(blk.bound == Catch::Approx(std::pow(0.875, blk.block)));
        prev = blk.survival;
    }
    CHECK_THROWS_AS(verify_tail_bound(ck, pair_state(1, 1), z, 0.5, model.metric, 0.0, 4, 100, 1),
                    std::invalid_argument);
}
