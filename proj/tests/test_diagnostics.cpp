#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ergodiag/diagnostics.hpp"
#include "ergodiag/models.hpp"

using namespace ergodiag;

namespace {

// Chain that never moves; the probe mass never reaches the target ball.
ModelDescriptor frozen_model() {
    ModelDescriptor m;
    m.id = "frozen";
    CountableKernel k;
    k.name = "frozen";
    k.row = [](const State& s) -> std::vector<Atom> { return {{s, 1.0}}; };
    m.countable = k;
    m.sampling = sampling_from_countable(k);
    m.metric = absolute_metric();
    m.default_start = State(DyadicState::level(3));
    m.ball_center = State(DyadicState::zero());
    m.default_probes = {State(DyadicState::level(3))};
    m.probes_within = [](const State&, double) {
        return std::vector<State>{State(DyadicState::level(1))};
    };
    return m;
}

}  // namespace

TEST_CASE("grid validation") {
    auto grid = LimitGridSpec::defaults(1);
    CHECK_NOTHROW(grid.validate());
    CHECK(grid.tail_start() == 30);

    auto bad = grid;
    bad.t_grid = {3.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = grid;
    bad.probe_radii = {1.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = grid;
    bad.tail_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = grid;
    bad.samples = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("C1 passes on the dyadic chain") {
    auto model = dyadic_chain();
    auto grid = LimitGridSpec::defaults(3);
    auto rep = check_lbc_C1(model, model.ball_center, {0.5}, model.default_probes, grid);
    CHECK(rep.exact_mode);
    CHECK(rep.verdict == Verdict::Pass);
    for (const auto& [name, curve] : rep.curves)
        for (const auto& pt : curve) CHECK(pt.value > 0.99);
}

TEST_CASE("C1 fails on a frozen chain away from the ball") {
    auto model = frozen_model();
    auto grid = LimitGridSpec::defaults(3);
    auto rep = check_lbc_C1(model, model.ball_center, {0.5}, model.default_probes, grid);
    CHECK(rep.exact_mode);
    CHECK(rep.verdict == Verdict::Fail);
    CHECK_THROWS_AS(check_lbc_C1(model, model.ball_center, {0.5}, {}, grid),
                    std::invalid_argument);
}

TEST_CASE("ifs fails C1 but passes C2") {
    auto model = ifs_torus();
    auto grid = LimitGridSpec::defaults(17);
    grid.samples = 400;
    auto c1 = check_lbc_C1(model, model.ball_center, {0.5}, model.default_probes, grid);
    CHECK_FALSE(c1.exact_mode);
    CHECK(c1.verdict == Verdict::Fail);

    auto c2 = check_lbc_C2(model, model.ball_center, {0.5}, model.default_probes, grid);
    CHECK(c2.verdict == Verdict::Pass);
}

TEST_CASE("eventual continuity passes at the dyadic absorbing point") {
    auto model = dyadic_chain();
    auto grid = LimitGridSpec::defaults(5);
    State x(DyadicState::zero());
    for (const auto& fam : family_presets_dyadic()) {
        auto rep = check_evc(model, fam, x, grid, EvcVariant::Plain);
        INFO(fam.name);
        CHECK(rep.exact_mode);
        CHECK(rep.verdict == Verdict::Pass);
    }
}

TEST_CASE("cesaro and uniform eventual continuity on the dyadic chain") {
    auto model = dyadic_chain();
    auto grid = LimitGridSpec::defaults(5);
    State x(DyadicState::zero());
    auto sup = family_presets_dyadic()[1];
    REQUIRE(sup.kind == FamilyKind::SupNorm);
    for (auto variant : {EvcVariant::Cesaro, EvcVariant::Uniform, EvcVariant::UniformCesaro}) {
        auto rep = check_evc(model, sup, x, grid, variant);
        INFO(evc_variant_name(variant));
        CHECK(rep.verdict == Verdict::Pass);
        CHECK(rep.curves.count("D") == 1);
    }
}

TEST_CASE("uniform sup-norm gap needs a countable kernel") {
    auto model = ifs_torus();
    auto grid = LimitGridSpec::defaults(5);
    auto sup = family_presets_ifs()[0];
    CHECK_THROWS_AS(check_evc(model, sup, model.default_start, grid, EvcVariant::Uniform),
                    std::invalid_argument);
    auto narrow = grid;
    narrow.probe_radii = {1.0, 0.5};
    CHECK_THROWS_AS(check_evc(dyadic_chain(), sup, State(DyadicState::zero()), narrow,
                              EvcVariant::Plain),
                    std::invalid_argument);
}

TEST_CASE("uniform integrability verdicts") {
    auto model = dyadic_chain();
    auto grid = LimitGridSpec::defaults(7);
    State x(DyadicState::level(2));
    std::vector<double> K_grid;
    for (double K = 4.0; K <= 1048576.0; K *= 4.0) K_grid.push_back(K);

    // E[V; V >= K] = 4 at every scale: the escaping atom carries constant mass.
    auto fail = check_uniform_integrability(model, x, dyadic_V, K_grid, grid);
    CHECK(fail.exact_mode);
    CHECK(fail.verdict == Verdict::Fail);
    CHECK(fail.curves.at("T").back().value == Catch::Approx(4.0).margin(1e-9));

    auto pass = check_uniform_integrability(model, x, [](const State& s) {
        return std::sqrt(dyadic_V(s));
    }, K_grid, grid);
    CHECK(pass.verdict == Verdict::Pass);

    const auto& T = pass.curves.at("T");
    for (std::size_t i = 1; i < T.size(); ++i) CHECK(T[i].value <= T[i - 1].value + 1e-12);

    CHECK_THROWS_AS(check_uniform_integrability(model, x, dyadic_V, {4.0, 2.0}, grid),
                    std::invalid_argument);
}

TEST_CASE("lyapunov comparison against the linear closed form") {
    LyapunovSpec spec;
    spec.phi = [](double v) { return v; };
    spec.phi_prime = [](double) { return 1.0; };
    spec.C = 1.0;
    spec.U0 = 5.0;
    auto res = lyapunov_bound(spec, 10.0, 0.1);
    CHECK(res.bound == Catch::Approx(5.0).margin(1e-9));
    CHECK(res.terminal == Catch::Approx(1.0 + 4.0 * std::exp(-10.0)).margin(1e-6));
    CHECK(res.monotone);
    CHECK(res.fixed_point_crossings == 0);

    spec.U0 = 1.0;  // start at the fixed point
    auto flat = lyapunov_bound(spec, 5.0, 0.1);
    CHECK(flat.bound == Catch::Approx(1.0).margin(1e-9));
    CHECK(flat.terminal == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("lyapunov with a concave phi rises monotonically to the fixed point") {
    LyapunovSpec spec;
    spec.phi = [](double v) { return std::log1p(v); };
    spec.phi_prime = [](double v) { return 1.0 / (1.0 + v); };
    spec.C = 2.0;
    spec.U0 = 0.1;
    auto res = lyapunov_bound(spec, 200.0, 0.1);
    CHECK(res.monotone);
    CHECK(res.fixed_point_crossings == 0);
    CHECK(res.terminal == Catch::Approx(2.0).margin(1e-4));
    CHECK(res.bound <= 2.0 + 1e-9);
}

TEST_CASE("lyapunov contract violations") {
    LyapunovSpec convex;
    convex.phi = [](double v) { return v * v + v; };
    convex.phi_prime = [](double v) { return 2.0 * v + 1.0; };
    convex.C = 1.0;
    convex.U0 = 2.0;
    CHECK_THROWS_AS(lyapunov_bound(convex, 1.0, 0.1), std::domain_error);

    LyapunovSpec flat;
    flat.phi = [](double v) { return v; };
    flat.phi_prime = [](double) { return 0.0; };
    flat.C = 1.0;
    flat.U0 = 2.0;
    CHECK_THROWS_AS(lyapunov_bound(flat, 1.0, 0.1), std::domain_error);
    CHECK_THROWS_AS(lyapunov_bound(LyapunovSpec{[](double v) { return v; },
                                                [](double) { return 1.0; }, 1.0, 2.0},
                                   1.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("tightness verdicts") {
    auto grid = LimitGridSpec::defaults(9);
    auto dyadic = dyadic_chain();
    auto tight = check_tightness(dyadic, dyadic.default_start, {1.0, 4.0, 16.0}, grid);
    CHECK(tight.verdict == Verdict::Pass);

    auto lattice = lattice_model_default();
    auto loose = check_tightness(lattice, lattice.default_start, {1.0, 4.0, 16.0}, grid);
    CHECK(loose.verdict == Verdict::Fail);

    CHECK_THROWS_AS(check_tightness(dyadic, dyadic.default_start, {4.0, 1.0}, grid),
                    std::invalid_argument);
}

TEST_CASE("birkhoff running averages") {
    auto rep = birkhoff_divergence_check({1.0, 2.0, 3.0, 4.0}, {2, 4}, {2.0});
    REQUIRE(rep.running_averages.size() == 2);
    CHECK(rep.running_averages[0].value == Catch::Approx(1.5));
    CHECK(rep.running_averages[1].value == Catch::Approx(2.5));
    CHECK(rep.diverging);

    CHECK_FALSE(birkhoff_divergence_check({1.0, 2.0, 3.0, 4.0}, {2, 4}, {2.0, 3.0}).diverging);
    CHECK_THROWS_AS(birkhoff_divergence_check({1.0}, {}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(birkhoff_divergence_check({1.0}, {2}, {0.0}), std::invalid_argument);
}
