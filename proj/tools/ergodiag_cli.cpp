// Command-line runner: simulation, exact distances, condition diagnostics,
// composite stability reports, and the reproduction tables. Every stochastic
// run requires an explicit seed; artifacts embed the config hash and a run
// with a different configuration refuses to overwrite them without --force.
//
// Exit codes: 0 pass (or inconclusive without --strict), 1 fail, 2
// inconclusive under --strict, 64 usage or configuration error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ergodiag/ergodiag.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInconclusiveStrict = 2;
constexpr int kExitUsage = 64;

struct OutputOptions {
    std::string path;
    std::string format = "json";
    bool force = false;
    bool strict = false;
};

void add_output_options(CLI::App* cmd, OutputOptions& out) {
    cmd->add_option("--output", out.path, "artifact path (stdout when omitted)");
    cmd->add_option("--format", out.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_flag("--force", out.force, "overwrite artifacts from a different config");
    cmd->add_flag("--strict", out.strict, "exit 2 on inconclusive verdicts");
}

// Hash of the exact command line, stamped into every artifact.
std::string config_line;

void write_artifact(const OutputOptions& out, const nlohmann::json& body,
                    const std::string& csv) {
    std::uint64_t hash = ergodiag::fnv1a(config_line);
    nlohmann::json doc = body;
    doc["manifest"] = {{"config", config_line},
                       {"config_hash", hash},
                       {"version", "1.0.0"}};
    if (out.path.empty()) {
        if (out.format == "csv")
            std::cout << csv;
        else
            std::cout << doc.dump(2) << "\n";
        return;
    }
    if (std::filesystem::exists(out.path) && !out.force) {
        std::ifstream in(out.path);
        nlohmann::json existing;
        bool mismatch = true;
        try {
            in >> existing;
            mismatch = existing.contains("manifest") &&
                       existing["manifest"].value("config_hash", std::uint64_t{0}) != hash;
        } catch (...) {
            mismatch = true;
        }
        if (mismatch)
            throw std::runtime_error("artifact " + out.path +
                                     " was produced by a different config; use --force");
    }
    std::ofstream f(out.path);
    f << doc.dump(2) << "\n";
    if (!csv.empty()) {
        std::ofstream c(out.path + ".csv");
        c << csv;
    }
}

int verdict_exit(ergodiag::Verdict v, bool strict) {
    switch (v) {
        case ergodiag::Verdict::Pass: return kExitPass;
        case ergodiag::Verdict::Fail: return kExitFail;
        case ergodiag::Verdict::Inconclusive: return strict ? kExitInconclusiveStrict : kExitPass;
    }
    return kExitUsage;
}

ergodiag::State parse_start(const ergodiag::ModelDescriptor& model,
                            std::optional<int> x_exp) {
    if (!x_exp) return model.default_start;
    if (model.id != "dyadic")
        throw CLI::ValidationError("--x", "start override is only defined for the dyadic model");
    if (*x_exp == 0) return ergodiag::State(ergodiag::DyadicState::zero());
    int e = static_cast<int>(std::log2(static_cast<double>(*x_exp)));
    if (std::ldexp(1.0, e) != static_cast<double>(*x_exp))
        throw CLI::ValidationError("--x", "dyadic start must be 0 or a power of two");
    return ergodiag::State(ergodiag::DyadicState::level(e));
}

ergodiag::LimitGridSpec make_grid(double horizon, int samples, std::uint64_t seed,
                                  const ergodiag::ModelDescriptor& model) {
    ergodiag::LimitGridSpec g;
    int t_max = std::max(4, static_cast<int>(horizon));
    for (int t = 1; t <= t_max; ++t) g.t_grid.push_back(t);
    g.probe_radii = model.id == "ifs" ? std::vector<double>{2.0, 1.0, 0.5}
                                      : std::vector<double>{16.0, 8.0, 4.0, 2.0};
    g.samples = samples;
    g.seed = seed;
    return g;
}

void require_seed_for_stochastic(const ergodiag::ModelDescriptor& model, bool seed_given) {
    if (!model.countable && !seed_given)
        throw CLI::ValidationError("--seed", "required for stochastic (Monte Carlo) runs");
}

std::string reproduce_csv_header() { return "quantity,computed,expected,tolerance,pass\n"; }

void csv_row(std::ostringstream& os, const std::string& q, double computed, double expected,
             double tol, bool pass) {
    os << q << ',' << ergodiag::format_real(computed) << ',' << ergodiag::format_real(expected)
       << ',' << ergodiag::format_real(tol) << ',' << (pass ? "true" : "false") << '\n';
}

int run_reproduce(const std::string& table, std::uint64_t seed, const OutputOptions& out) {
    using namespace ergodiag;
    std::ostringstream csv;
    csv << reproduce_csv_header();
    bool all_pass = true;
    auto dyadic = dyadic_chain();

    if (table == "dyadic-tv") {
        int i = 2;
        for (int n = 1; n <= 20; ++n) {
            auto law = propagate(*dyadic.countable,
                                 SparseDistribution::delta(State(DyadicState::level(i))), n);
            double got = tv_distance(law, *dyadic.invariant_sparse);
            double want = std::exp2(1 - n);
            bool ok = std::fabs(got - want) <= 1e-12;
            all_pass = all_pass && ok;
            csv_row(csv, "tv(P_" + std::to_string(n) + "*d_4, d_0)", got, want, 1e-12, ok);
        }
    } else if (table == "dyadic-moments") {
        for (int i : {1, 2, 3})
            for (int n : {1, 2, 5, 10})
                for (double a : {0.25, 0.5, 0.75, 1.0}) {
                    auto law = propagate(*dyadic.countable,
                                         SparseDistribution::delta(State(DyadicState::level(i))),
                                         n);
                    double got = integrate(law, [a](const State& s) {
                        return std::pow(dyadic_V(s), a);
                    });
                    double want = dyadic.oracles.at("alpha_moment")(
                        {static_cast<double>(i), static_cast<double>(n), a});
                    bool ok = std::fabs(got - want) <= 1e-12;
                    all_pass = all_pass && ok;
                    csv_row(csv,
                            "moment(i=" + std::to_string(i) + ",n=" + std::to_string(n) +
                                ",a=" + std::to_string(a) + ")",
                            got, want, 1e-12, ok);
                }
    } else if (table == "coupling-tail") {
        auto ck = product_kernel(*dyadic.countable);
        State start(State(DyadicState::level(1)), State(DyadicState::level(1)));
        auto rep = verify_tail_bound(ck, start, State(DyadicState::zero()), 0.5, dyadic.metric,
                                     0.25, 8, 20000, seed);
        if (rep.inconclusive) all_pass = false;
        for (const auto& b : rep.blocks) {
            double exact = 1.0;
            // With block horizon h_n, survival after n blocks is
            // (1 - (1 - 2^-H))^2 restricted to joint non-absorption.
            all_pass = all_pass && b.pass;
            csv_row(csv, "survival(block=" + std::to_string(b.block) + ")", b.survival,
                    b.bound, 3.0 * b.sigma, b.pass);
            (void)exact;
        }
    } else if (table == "heavy-tail-divergence") {
        auto nu = heavy_tail_nu(40);
        bool crossed = false;
        for (int M = 1; M <= 40; ++M) {
            double s = nu.partial_sum(0, M);
            if (s > 1e6 && !crossed) {
                crossed = true;
                csv_row(csv, "S(0," + std::to_string(M) + ")", s, 1e6, 0.0, true);
            }
        }
        all_pass = crossed;
        if (!crossed) csv_row(csv, "S(0,40)", nu.partial_sum(0, 40), 1e6, 0.0, false);
    } else {
        throw CLI::ValidationError("table", "unknown table '" + table + "'");
    }

    nlohmann::json body = {{"table", table}, {"pass", all_pass}};
    write_artifact(out, body, csv.str());
    return all_pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace ergodiag;
    CLI::App app{"Markov chain ergodicity diagnostics"};
    app.require_subcommand(1);
    {
        std::ostringstream os;
        for (int i = 1; i < argc; ++i) os << (i > 1 ? " " : "") << argv[i];
        config_line = os.str();
    }

    std::string model_id = "dyadic";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int samples = 2000;
    double horizon = 60.0;
    std::optional<int> x_value;

    auto add_common = [&](CLI::App* cmd, bool with_model = true) {
        if (with_model)
            cmd->add_option("--model", model_id, "model id")
                ->check(CLI::IsMember(model_ids()));
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; },
               "root seed (required for stochastic runs)");
        cmd->add_option("--samples", samples, "Monte Carlo paths per estimate");
        cmd->add_option("--horizon", horizon, "time horizon / largest grid time");
    };

    OutputOptions out;

    auto* sim = app.add_subcommand("simulate", "sample trajectories");
    int n_paths = 10;
    add_common(sim);
    sim->add_option("--paths", n_paths, "number of trajectories");
    add_output_options(sim, out);

    auto* dist = app.add_subcommand("distance",
                                    "exact distances between a dyadic n-step law and delta_0");
    int dist_i = 2, dist_n = 3;
    double dist_p = 1.0;
    dist->add_option("--i", dist_i, "start exponent (start = 2^i)");
    dist->add_option("--n", dist_n, "number of steps");
    dist->add_option("--p", dist_p, "Wasserstein order");
    add_output_options(dist, out);

    auto* diag = app.add_subcommand("diagnose", "run one condition diagnostic");
    diag->require_subcommand(1);
    auto* d_lbc = diag->add_subcommand("lbc", "lower bound conditions C1/C2");
    bool lbc_cesaro = false;
    add_common(d_lbc);
    d_lbc->add_flag("--cesaro", lbc_cesaro, "check C2 instead of C1");
    add_output_options(d_lbc, out);

    auto* d_evc = diag->add_subcommand("evc", "eventual continuity");
    std::string evc_variant = "plain", family_name = "sup_norm";
    add_common(d_evc);
    d_evc->add_option("--variant", evc_variant, "plain, cesaro, uniform, uniform-cesaro")
        ->check(CLI::IsMember({"plain", "cesaro", "uniform", "uniform-cesaro"}));
    d_evc->add_option("--family", family_name, "family preset name");
    add_output_options(d_evc, out);

    auto* d_ui = diag->add_subcommand("ui", "uniform integrability of f along the chain");
    std::string ui_f = "V";
    add_common(d_ui);
    d_ui->add_option("--f", ui_f, "V, sqrtV, or envelope:<family>")
        ->check(CLI::IsMember({"V", "sqrtV"}));
    d_ui->add_option("--x", x_value, "dyadic start value (0 or a power of two)");
    add_output_options(d_ui, out);

    auto* d_lyap = diag->add_subcommand("lyapunov", "comparison ODE bound");
    double lyap_C = 1.0, lyap_U0 = 5.0, lyap_tmax = 30.0;
    std::string lyap_phi = "identity";
    d_lyap->add_option("--phi", lyap_phi, "identity or log1p")
        ->check(CLI::IsMember({"identity", "log1p"}));
    d_lyap->add_option("--C", lyap_C, "drift constant");
    d_lyap->add_option("--U0", lyap_U0, "initial value phi(V(x))");
    d_lyap->add_option("--t-max", lyap_tmax, "integration horizon");
    add_output_options(d_lyap, out);

    auto* d_tight = diag->add_subcommand("tightness", "Cesaro occupation tightness");
    add_common(d_tight);
    add_output_options(d_tight, out);

    auto* d_birk = diag->add_subcommand("birkhoff", "Cesaro divergence along a synthetic path");
    int birk_M = 30;
    d_birk->add_option("--M", birk_M, "path visits 2^(2m) for m = 1..M");
    add_output_options(d_birk, out);

    auto* rep_cmd = app.add_subcommand("report", "composite stability report");
    std::string rep_family = "auto";
    add_common(rep_cmd);
    rep_cmd->add_option("--family", rep_family, "family preset name, or auto");
    add_output_options(rep_cmd, out);

    auto* repro = app.add_subcommand("reproduce", "acceptance reproduction tables");
    std::string table_id;
    repro->add_option("table", table_id, "table id")->required();
    repro->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; }, "root seed");
    add_output_options(repro, out);

    auto* list = app.add_subcommand("list", "list registries");
    std::string list_what = "models";
    list->add_option("what", list_what, "models, families, or tables")
        ->check(CLI::IsMember({"models", "families", "tables"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*list) {
            if (list_what == "models")
                for (const auto& id : model_ids()) std::cout << id << "\n";
            else if (list_what == "families")
                for (const auto& f : family_presets_dyadic()) std::cout << f.name << "\n";
            else
                for (const char* t :
                     {"dyadic-tv", "dyadic-moments", "coupling-tail", "heavy-tail-divergence"})
                    std::cout << t << "\n";
            return kExitPass;
        }

        if (*repro) return run_reproduce(table_id, seed, out);

        if (*dist) {
            auto model = dyadic_chain();
            auto law = propagate(*model.countable,
                                 SparseDistribution::delta(State(DyadicState::level(dist_i))),
                                 dist_n);
            const auto& mu = *model.invariant_sparse;
            nlohmann::json body = {
                {"i", dist_i},
                {"n", dist_n},
                {"tv", format_real(tv_distance(law, mu))},
                {"weighted_tv", format_real(weighted_tv(law, mu, dyadic_V))},
                {"wasserstein", format_real(
                     wasserstein_exact(law, mu, dist_p, model.metric).value)},
                {"law", to_json(law)}};
            write_artifact(out, body, "");
            return kExitPass;
        }

        auto model = model_by_id(model_id);

        if (*sim) {
            require_seed_for_stochastic(model, seed_given);
            if (!seed_given) throw CLI::ValidationError("--seed", "required for simulate");
            auto paths = simulate_paths(*model.sampling, model.default_start, horizon, n_paths,
                                        seed);
            nlohmann::json trajectories = nlohmann::json::array();
            for (const auto& t : paths) trajectories.push_back(to_json(t));
            write_artifact(out, {{"model", model_id}, {"trajectories", trajectories}}, "");
            return kExitPass;
        }

        require_seed_for_stochastic(model, seed_given);
        auto grid = make_grid(horizon, samples, seed, model);

        if (*d_lbc) {
            auto report = lbc_cesaro
                              ? check_lbc_C2(model, model.ball_center, {0.5},
                                             model.default_probes, grid)
                              : check_lbc_C1(model, model.ball_center, {0.5},
                                             model.default_probes, grid);
            write_artifact(out, to_json(report), curves_to_csv(report));
            return verdict_exit(report.verdict, out.strict);
        }
        if (*d_evc) {
            auto presets = model_id == "ifs" ? family_presets_ifs() : family_presets_dyadic();
            const TestFunctionFamily* fam = nullptr;
            for (const auto& f : presets)
                if (f.name == family_name || f.name.rfind(family_name, 0) == 0) fam = &f;
            if (!fam)
                throw CLI::ValidationError("--family", "unknown family '" + family_name + "'");
            EvcVariant v = evc_variant == "plain"    ? EvcVariant::Plain
                           : evc_variant == "cesaro" ? EvcVariant::Cesaro
                           : evc_variant == "uniform" ? EvcVariant::Uniform
                                                      : EvcVariant::UniformCesaro;
            auto report = check_evc(model, *fam, model.ball_center, grid, v);
            write_artifact(out, to_json(report), curves_to_csv(report));
            return verdict_exit(report.verdict, out.strict);
        }
        if (*d_ui) {
            State x = parse_start(model, x_value);
            std::function<double(const State&)> f =
                ui_f == "sqrtV"
                    ? std::function<double(const State&)>(
                          [](const State& s) { return std::sqrt(dyadic_V(s)); })
                    : std::function<double(const State&)>(dyadic_V);
            std::vector<double> K_grid;
            for (int e = 2; e <= 20; e += 2) K_grid.push_back(std::exp2(e));
            auto report = check_uniform_integrability(model, x, f, K_grid, grid);
            write_artifact(out, to_json(report), curves_to_csv(report));
            return verdict_exit(report.verdict, out.strict);
        }
        if (*d_lyap) {
            LyapunovSpec spec;
            if (lyap_phi == "identity") {
                spec.phi = [](double v) { return v; };
                spec.phi_prime = [](double) { return 1.0; };
            } else {
                spec.phi = [](double v) { return std::log1p(v); };
                spec.phi_prime = [](double v) { return 1.0 / (1.0 + v); };
            }
            spec.C = lyap_C;
            spec.U0 = lyap_U0;
            auto res = lyapunov_bound(spec, lyap_tmax, 0.01);
            nlohmann::json body = {{"bound", format_real(res.bound)},
                                   {"terminal", format_real(res.terminal)},
                                   {"monotone", res.monotone},
                                   {"fixed_point_crossings", res.fixed_point_crossings}};
            write_artifact(out, body, "");
            return res.monotone && res.fixed_point_crossings == 0 ? kExitPass : kExitFail;
        }
        if (*d_tight) {
            auto report = check_tightness(model, model.default_start, {1.0, 4.0, 16.0, 64.0},
                                          grid);
            write_artifact(out, to_json(report), curves_to_csv(report));
            return verdict_exit(report.verdict, out.strict);
        }
        if (*d_birk) {
            auto nu = heavy_tail_nu(birk_M);
            std::vector<double> values;
            for (int m = 1; m <= birk_M; ++m) values.push_back(std::exp2(m));  // V^{1/2}(2^{2m})
            std::vector<std::size_t> checkpoints;
            for (int m = 5; m <= birk_M; m += 5) checkpoints.push_back(m);
            auto rep = birkhoff_divergence_check(values, checkpoints, {1.0, 100.0, 1e4});
            nlohmann::json body = {{"diverging", rep.diverging},
                                   {"running_averages", to_json(rep.running_averages)}};
            write_artifact(out, body, "");
            return rep.diverging ? kExitPass : kExitFail;
        }
        if (*rep_cmd) {
            auto presets = model_id == "ifs" ? family_presets_ifs() : family_presets_dyadic();
            const TestFunctionFamily* fam = &presets.front();
            if (rep_family != "auto") {
                fam = nullptr;
                for (const auto& f : presets)
                    if (f.name == rep_family || f.name.rfind(rep_family, 0) == 0) fam = &f;
                if (!fam)
                    throw CLI::ValidationError("--family",
                                               "unknown family '" + rep_family + "'");
            }
            auto report = stability_report(model, *fam, grid);
            write_artifact(out, to_json(report), "");
            return report.consistent ? kExitPass : kExitFail;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitUsage;
}
