#pragma once

#include "jmacate/candidates.hpp"
#include "jmacate/ols.hpp"
#include "jmacate/partition.hpp"
#include "jmacate/types.hpp"

#include <vector>

namespace jmacate {

// Simplex weights: entries in [0,1] summing to 1.
struct WeightVector {
    Vector w;

    int k() const { return static_cast<int>(w.size()); }
    void validate() const;
    static WeightVector vertex(int k, int K);
    static WeightVector uniform(int K);
};

struct ArmSplit {
    std::vector<int> treated_rows, control_rows;
    std::vector<int> arm_pos;  // global row -> position within its arm

    static ArmSplit from(const std::vector<int>& t);
};

struct ModelFit {
    CandidateSpec spec;
    Matrix design_t, design_c;
    OlsFit ols_t, ols_c;
};

struct FittedModels {
    ArmSplit split;
    Vector y_t, y_c;
    std::vector<ModelFit> models;

    int k() const { return static_cast<int>(models.size()); }
};

FittedModels fit_all(const Dataset& data, const std::vector<CandidateSpec>& specs,
                     double rcond_min = 1e-10);

// u'beta_hat - u'gamma_hat at a raw covariate vector.
double delta_hat(const ModelFit& model, const Vector& u_raw);

// Leave-pair-out prediction matrix and pseudo-responses: entry (m, k) deletes
// the treated member from the treatment fit and the control member from the
// control fit, then predicts both at u_m^t. y_tilde_m = Y_m^t - Y_m^c.
struct JackknifeSystem {
    Matrix delta_tilde;  // M x K
    Vector y_tilde;      // length M
    MatchedPairSet pair_set;

    int m() const { return static_cast<int>(delta_tilde.rows()); }
    int k() const { return static_cast<int>(delta_tilde.cols()); }
};

JackknifeSystem build_jackknife_system(const Dataset& data, const FittedModels& fitted,
                                       const MatchedPairSet& pairs);
JackknifeSystem build_jackknife_system(const Dataset& data, const std::vector<CandidateSpec>& specs,
                                       const MatchedPairSet& pairs);

// CV(w) = ||delta_tilde * w - y_tilde||^2
double cv_value(const WeightVector& w, const JackknifeSystem& sys);

// Euclidean projection onto the probability simplex (sort-based).
Vector project_to_simplex(const Vector& v);

struct SolveResult {
    WeightVector w;
    double objective = 0.0;      // ||A w - b||^2 at the returned point
    double kkt_residual = 0.0;   // max_{k active} g_k - min_j g_j, relative scale
    int iterations = 0;
    bool converged = true;       // false => MaxIterationsExceeded warning
};

// min_w ||A w - b||^2 over the simplex, by accelerated projected gradient with
// function restarts; step 1/L with L from power iteration on 2 A'A.
SolveResult solve_simplex_lsq(const Matrix& a, const Vector& b, double tol = 1e-10,
                              int max_iter = 100000);

SolveResult solve_weights(const JackknifeSystem& sys, double tol = 1e-10, int max_iter = 100000);

struct CateEstimate {
    Matrix per_model;  // N x K full-sample estimates
    Vector point;      // per_model * w
    WeightVector weights;
};

// Full-sample per-model estimates at each eval row (raw covariates).
Matrix per_model_estimates(const FittedModels& fitted, const Matrix& eval_x);

CateEstimate jma_estimate(const FittedModels& fitted, const WeightVector& w, const Matrix& eval_x);

}  // namespace jmacate
