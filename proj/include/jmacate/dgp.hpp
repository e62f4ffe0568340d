#pragma once

#include "jmacate/candidates.hpp"
#include "jmacate/jma.hpp"
#include "jmacate/rng.hpp"
#include "jmacate/types.hpp"

#include <cstdint>
#include <vector>

namespace jmacate {

// Example 1/2 data-generating process:
//   f_t(u) = c (0.5 u1^2 + 0.5 u2 + 0.5 u1 + 0.5 u2^2)
//   f_c(u) = c (0.5 u1^2 + 0.5 u2)
//   delta(u) = c (0.5 u1 + 0.5 u2^2)
// with (u1..u4) ~ N4(0, Sigma), Sigma_kj = rho^|k-j|, T ~ Bernoulli(0.5) and
// errors design 1: zeta, nu ~ N(0, 9 u2^2); design 2: zeta ~ N(0, 16 u2^2),
// nu ~ N(0, 4 u1^2).
struct TrueEffect {
    double c = 1.0;

    double f_t(const Vector& u) const {
        return c * (0.5 * u(0) * u(0) + 0.5 * u(1) + 0.5 * u(0) + 0.5 * u(1) * u(1));
    }
    double f_c(const Vector& u) const { return c * (0.5 * u(0) * u(0) + 0.5 * u(1)); }
    double delta(const Vector& u) const { return c * (0.5 * u(0) + 0.5 * u(1) * u(1)); }
};

struct SimConfig {
    int n = 200;
    double rho = 0.0;
    int design = 1;       // error design 1 or 2
    double r2 = 0.5;      // target signal strength
    double c = 1.0;       // signal scale (calibrated from r2 upstream)
    uint64_t seed = 1;
    int n_eval = 10000;
    int reps = 100;       // replication count J

    void validate() const;
};

struct SimDraw {
    Dataset data;
    Vector delta_sample;  // true effect at the sample covariates
    Matrix x_eval;        // fresh evaluation covariates
    Vector delta_eval;    // true effect at the evaluation covariates
};

SimDraw generate_example1(const SimConfig& cfg, Rng& rng);

// Empirical R^2 = [Var(Y) - Var(noise)] / Var(Y) on n_mc Monte Carlo draws.
double empirical_r2(double c, double rho, int design, long n_mc, uint64_t seed);

inline constexpr uint64_t kCalibrationSeed = 0x5eedca11b8a7edULL;

// Bisection on c against a common-random-numbers Monte Carlo estimate of
// R^2(c), which is monotone in c. Errors: CalibrationFailed.
double calibrate_c(double target_r2, double rho, int design, long n_mc = 1000000,
                   double tol = 5e-3, uint64_t seed = kCalibrationSeed);

// Mean squared deviation between estimates and truth.
double ase(const Vector& estimates, const Vector& truth);

struct OracleResult {
    WeightVector w;
    double ase = 0.0;          // the normalizer
    bool normalizer_zero = false;
};

// Infeasible optimal weights: simplex minimizer of ||P w - truth||^2 at the
// evaluation points; its ASE normalizes every reported risk.
OracleResult oracle_weights(const Matrix& per_model, const Vector& truth);

// Candidate sets for the two simulation examples. Reconstructed: Example 1 is
// four all-misspecified linear specs, Example 2 puts the correct model first.
std::vector<CandidateSpec> default_candidates(int example);

// Synthetic stand-in with the NSWD shape (722 observations, 297 treated / 425
// control; sqrt-income, age, education, marital-status covariates). Test data
// for the guided-simulation and estimate pipelines.
Dataset nswd_standin(uint64_t seed);

}  // namespace jmacate
