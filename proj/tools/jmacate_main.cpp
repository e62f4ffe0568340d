// jmacate command line: Monte Carlo studies, guided simulation on CSV data,
// and CATE estimation on user data.

#include "jmacate/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(const jmacate::Error& e) {
    switch (e.code()) {
        case jmacate::Err::ConfigInvalid:
        case jmacate::Err::CsvInvalid:
            return kExitConfig;
        default:
            return kExitRuntime;
    }
}

void print_summary(const jmacate::RunOutput& out, const jmacate::SimulateConfig& cfg) {
    std::printf("%-6s %6s %6s %6s %8s %18s\n", "method", "n", "r2", "rho", "design",
                "mean_norm_risk");
    for (int n : cfg.n_list)
        for (double r2 : cfg.r2_list)
            for (double rho : cfg.rho_list)
                for (int design : cfg.design_list)
                    for (const auto& method : jmacate::kMethods)
                        std::printf("%-6s %6d %6.2f %6.2f %8d %18.4f\n", method.c_str(), n, r2,
                                    rho, design,
                                    out.mean_normalized_risk(method, n, r2, rho, design));
}

struct GlobalOpts {
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::string out_dir;
    std::string config_path;
};

void apply_globals(jmacate::SimulateConfig& cfg, const GlobalOpts& g) {
    if (g.seed_set) cfg.seed = g.seed;
    if (g.threads > 0) cfg.threads = g.threads;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jackknife model averaging for conditional average treatment effects"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--threads", g.threads, "replication-level parallelism");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--config", g.config_path, "JSON config file (or a previous manifest.json)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study over an (n, r2, rho, design) grid");
    int sim_example = 0;
    sim->add_option("--example", sim_example, "candidate set: 1 or 2");

    auto* wc = app.add_subcommand("weights-consistency",
                                  "mean weight on the correct models per sample size");

    auto* guided = app.add_subcommand("guided", "guided simulation on a CSV dataset");
    std::string guided_data, guided_cands;
    int guided_true = 0, guided_reps = 100;
    bool guided_sigma_zero = false, guided_per_arm = false;
    auto* g_data = guided->add_option("--data", guided_data, "input CSV (columns y, t, u1..up)");
    auto* g_cands = guided->add_option("--candidates", guided_cands, "candidate models JSON file");
    auto* g_true =
        guided->add_option("--true-model", guided_true, "0-based index of the \"true\" candidate");
    auto* g_reps = guided->add_option("--reps", guided_reps, "replication count");
    guided->add_flag("--sigma-zero", guided_sigma_zero, "force error variance to zero");
    guided->add_flag("--per-arm-sigma", guided_per_arm, "estimate error variance per arm");

    auto* est = app.add_subcommand("estimate", "estimate CATE on a CSV dataset");
    std::string est_data, est_cands;
    double est_h = 0.0;
    int est_m_min = 0;
    auto* e_data = est->add_option("--data", est_data, "input CSV (columns y, t, u1..up)");
    auto* e_cands = est->add_option("--candidates", est_cands, "candidate models JSON file");
    auto* e_h = est->add_option("--side-length", est_h, "matching cell side length override");
    auto* e_mmin = est->add_option("--m-min", est_m_min, "minimum matched pairs before h doubles");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed() || wc->parsed()) {
            jmacate::SimulateConfig cfg;
            if (!g.config_path.empty()) cfg = jmacate::simulate_config_from_file(g.config_path);
            if (sim_example > 0) cfg.example = sim_example;
            apply_globals(cfg, g);
            if (cfg.out_dir.empty()) cfg.out_dir = "out";
            const jmacate::RunOutput out = sim->parsed() ? jmacate::run_simulate(cfg)
                                                         : jmacate::run_weights_consistency(cfg);
            print_summary(out, cfg);
            if (wc->parsed()) {
                std::printf("\n%6s %12s\n", "n", "mean_wdelta");
                for (int n : cfg.n_list)
                    std::printf("%6d %12.4f\n", n, out.mean_wdelta("JMA", n));
            }
            std::printf("outputs written to %s\n", cfg.out_dir.c_str());
        } else if (guided->parsed()) {
            jmacate::GuidedConfig cfg;
            if (!g.config_path.empty()) cfg = jmacate::guided_config_from_file(g.config_path);
            if (g_data->count()) {
                cfg.data_path = guided_data;
                cfg.data = jmacate::dataset_from_csv(guided_data);
            }
            if (g_cands->count()) cfg.candidates = jmacate::candidates_from_json_file(guided_cands);
            if (g_true->count()) cfg.true_model = guided_true;
            if (g_reps->count()) cfg.reps = guided_reps;
            if (guided_sigma_zero) cfg.sigma_zero = true;
            if (guided_per_arm) cfg.per_arm_sigma = true;
            if (cfg.data_path.empty() || cfg.candidates.empty())
                throw jmacate::Error(jmacate::Err::ConfigInvalid,
                                     "guided requires --data and --candidates (or --config)");
            if (g.seed_set) cfg.seed = g.seed;
            if (g.threads > 0) cfg.threads = g.threads;
            if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
            if (cfg.out_dir.empty()) cfg.out_dir = "out";
            const jmacate::RunOutput out = jmacate::run_guided(cfg);
            std::printf("%-6s %14s\n", "method", "mean_ase");
            for (const auto& method : jmacate::kMethods)
                std::printf("%-6s %14.6g\n", method.c_str(), out.mean_ase(method, cfg.data.n()));
            std::printf("outputs written to %s\n", cfg.out_dir.c_str());
        } else if (est->parsed()) {
            jmacate::EstimateConfig cfg;
            if (!g.config_path.empty()) cfg = jmacate::estimate_config_from_file(g.config_path);
            if (e_data->count()) {
                cfg.data_path = est_data;
                cfg.data = jmacate::dataset_from_csv(est_data);
            }
            if (e_cands->count()) cfg.candidates = jmacate::candidates_from_json_file(est_cands);
            if (cfg.data_path.empty() || cfg.candidates.empty())
                throw jmacate::Error(jmacate::Err::ConfigInvalid,
                                     "estimate requires --data and --candidates (or --config)");
            if (g.seed_set) cfg.seed = g.seed;
            if (e_h->count()) cfg.match.h_override = est_h;
            if (e_mmin->count()) cfg.match.m_min = est_m_min;
            if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
            if (cfg.out_dir.empty()) cfg.out_dir = "out";
            const jmacate::EstimateOutput out = jmacate::run_estimate(cfg);
            std::printf("n=%d K=%d M=%d h=%.6g skipped_cells=%d cv=%.6g\n",
                        cfg.data.n(), out.weights.k(), out.m_pairs, out.h_used,
                        out.skipped_cells, out.cv);
            std::printf("outputs written to %s\n", cfg.out_dir.c_str());
        }
    } catch (const jmacate::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
