#pragma once

#include "jmacate/baselines.hpp"
#include "jmacate/csv.hpp"
#include "jmacate/dgp.hpp"
#include "jmacate/jma.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jmacate {

inline const std::vector<std::string> kMethods = {"JMA", "AIC", "BIC", "SAIC", "SBIC", "TECV"};

struct MatchSettings {
    double h_override = 0.0;  // <= 0: default (log n / n)^(1/p_match) rule
    std::vector<int> dims;    // empty: union of the candidates' raw covariates
    int m_min = 0;            // <= 0: K
};

struct SimulateConfig {
    int example = 1;
    std::vector<int> n_list = {200, 400, 800};
    std::vector<double> r2_list = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> rho_list = {0.0, 0.5};
    std::vector<int> design_list = {1, 2};
    int reps = 100;
    int n_eval = 10000;
    uint64_t seed = 20240101;
    int threads = 1;
    long calib_n_mc = 1000000;
    double calib_tol = 5e-3;
    std::optional<double> c_override;        // explicit signal scale, skips calibration
    MatchSettings match;
    std::vector<CandidateSpec> candidates;   // empty: default_candidates(example)
    std::vector<int> correct_models;         // 0-based; empty + example 2 -> {0}
    std::string out_dir;                     // empty: no files written

    void validate() const;
};

struct ResultRow {
    std::string method;
    int n;
    double r2;
    double rho;
    int design;
    int rep;
    double ase;
    double normalizer;
};

struct WeightRow {
    int n;
    double r2;
    double rho;
    int design;
    int rep;
    std::string method;
    std::vector<double> w;
    double w_delta = 0.0;  // sum of weights on the correct candidates
};

struct RepDetail {
    int n;
    double r2;
    double rho;
    int design;
    int rep;
    std::vector<double> model_ase;  // per-candidate single-model ASE
    double cv_jma = 0.0;
    double cv_best_vertex = 0.0;
    double normalizer = 0.0;
    bool normalizer_zero = false;
    int m_pairs = 0;
    double h_used = 0.0;
    int attempts = 1;
};

struct RunOutput {
    std::vector<ResultRow> rows;
    std::vector<WeightRow> weights;
    std::vector<RepDetail> details;
    nlohmann::json manifest;

    // mean of ase/normalizer over replications matching the filter (NaN filter
    // fields are wildcards)
    double mean_normalized_risk(const std::string& method, int n, double r2 = -1.0,
                                double rho = -1.0, int design = -1) const;
    double mean_ase(const std::string& method, int n) const;
    double mean_wdelta(const std::string& method, int n) const;
};

RunOutput run_simulate(const SimulateConfig& cfg);

// Same machinery restricted to the Example 2 shape; reports mean w_delta per n.
RunOutput run_weights_consistency(const SimulateConfig& cfg);

struct GuidedConfig {
    Dataset data;
    std::string data_path;  // recorded in the manifest for reruns
    std::vector<CandidateSpec> candidates;
    int true_model = 0;  // 0-based index into candidates
    int reps = 100;
    uint64_t seed = 20240101;
    int threads = 1;
    bool sigma_zero = false;    // force sigma^2 = 0 (noiseless null)
    bool per_arm_sigma = false; // estimate one variance per arm instead of pooled
    MatchSettings match;
    std::string out_dir;
};

RunOutput run_guided(const GuidedConfig& cfg);

struct EstimateConfig {
    Dataset data;
    std::string data_path;
    std::vector<CandidateSpec> candidates;
    uint64_t seed = 20240101;
    MatchSettings match;
    std::string out_dir;
};

struct EstimateOutput {
    Vector estimates;  // JMA point estimate per observation
    WeightVector weights;
    double cv = 0.0;
    double kkt_residual = 0.0;
    bool converged = true;
    int m_pairs = 0;
    double h_used = 0.0;
    int skipped_cells = 0;
    nlohmann::json manifest;
};

EstimateOutput run_estimate(const EstimateConfig& cfg);

// Strict parsing: unknown keys are errors. Each loader accepts either a bare
// config object or a previously written manifest (its "config" member is used),
// so any run can be repeated from its manifest.
SimulateConfig simulate_config_from_json(const nlohmann::json& j);
SimulateConfig simulate_config_from_file(const std::string& path);
nlohmann::json simulate_config_to_json(const SimulateConfig& cfg);

GuidedConfig guided_config_from_json(const nlohmann::json& j);
GuidedConfig guided_config_from_file(const std::string& path);

EstimateConfig estimate_config_from_json(const nlohmann::json& j);
EstimateConfig estimate_config_from_file(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

void write_outputs(const RunOutput& out, const std::string& out_dir);

}  // namespace jmacate
