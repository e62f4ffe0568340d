#include "jmacate/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jmacate {

void SimConfig::validate() const {
    if (!(r2 > 0.0 && r2 < 1.0)) fail(Err::ConfigInvalid, "SimConfig: r2 must lie in (0,1)");
    if (n < 20) fail(Err::ConfigInvalid, "SimConfig: n must be >= 20");
    if (n_eval < 1) fail(Err::ConfigInvalid, "SimConfig: n_eval must be >= 1");
    if (design != 1 && design != 2) fail(Err::ConfigInvalid, "SimConfig: design must be 1 or 2");
    if (!(rho >= 0.0 && rho < 1.0)) fail(Err::ConfigInvalid, "SimConfig: rho must lie in [0,1)");
    if (reps < 1) fail(Err::ConfigInvalid, "SimConfig: reps must be >= 1");
}

namespace {

constexpr int kDim = 4;

// AR(1)-correlated standard Gaussians: u_j = rho u_{j-1} + sqrt(1-rho^2) z_j
// reproduces Sigma_kj = rho^|k-j| exactly.
void draw_covariates(double rho, Rng& rng, Vector& u) {
    const double mix = std::sqrt(1.0 - rho * rho);
    u(0) = rng.normal();
    for (int j = 1; j < kDim; ++j) u(j) = rho * u(j - 1) + mix * rng.normal();
}

double noise_sd(int design, bool treated, const Vector& u) {
    if (design == 1) return 3.0 * std::abs(u(1));
    return treated ? 4.0 * std::abs(u(1)) : 2.0 * std::abs(u(0));
}

}  // namespace

SimDraw generate_example1(const SimConfig& cfg, Rng& rng) {
    cfg.validate();
    const TrueEffect effect{cfg.c};

    SimDraw draw;
    draw.data.x.resize(cfg.n, kDim);
    draw.data.t.resize(cfg.n);
    draw.data.y.resize(cfg.n);
    draw.delta_sample.resize(cfg.n);

    Vector u(kDim);
    for (int i = 0; i < cfg.n; ++i) {
        draw_covariates(cfg.rho, rng, u);
        const bool treated = rng.bernoulli(0.5);
        const double eps = rng.normal(0.0, noise_sd(cfg.design, treated, u));
        draw.data.x.row(i) = u.transpose();
        draw.data.t[i] = treated ? 1 : 0;
        draw.data.y(i) = (treated ? effect.f_t(u) : effect.f_c(u)) + eps;
        draw.delta_sample(i) = effect.delta(u);
    }

    draw.x_eval.resize(cfg.n_eval, kDim);
    draw.delta_eval.resize(cfg.n_eval);
    for (int i = 0; i < cfg.n_eval; ++i) {
        draw_covariates(cfg.rho, rng, u);
        draw.x_eval.row(i) = u.transpose();
        draw.delta_eval(i) = effect.delta(u);
    }
    return draw;
}

namespace {

struct CalibrationSample {
    Vector signal;  // signal at c = 1
    Vector noise;

    // R^2(c) on the fixed draws; monotone increasing in c >= 0.
    double r2(double c) const {
        const int n = static_cast<int>(signal.size());
        const Vector y = c * signal + noise;
        const double my = y.mean();
        const double me = noise.mean();
        double var_y = 0.0, var_e = 0.0;
        for (int i = 0; i < n; ++i) {
            var_y += (y(i) - my) * (y(i) - my);
            var_e += (noise(i) - me) * (noise(i) - me);
        }
        if (var_y <= 0.0) return 0.0;
        return (var_y - var_e) / var_y;
    }
};

CalibrationSample draw_calibration_sample(double rho, int design, long n_mc, uint64_t seed) {
    Rng rng(seed);
    CalibrationSample s;
    s.signal.resize(n_mc);
    s.noise.resize(n_mc);
    const TrueEffect unit{1.0};
    Vector u(kDim);
    for (long i = 0; i < n_mc; ++i) {
        draw_covariates(rho, rng, u);
        const bool treated = rng.bernoulli(0.5);
        s.signal(i) = treated ? unit.f_t(u) : unit.f_c(u);
        s.noise(i) = rng.normal(0.0, noise_sd(design, treated, u));
    }
    return s;
}

}  // namespace

double empirical_r2(double c, double rho, int design, long n_mc, uint64_t seed) {
    if (n_mc < 100) fail(Err::ConfigInvalid, "empirical_r2: n_mc too small");
    return draw_calibration_sample(rho, design, n_mc, seed).r2(c);
}

double calibrate_c(double target_r2, double rho, int design, long n_mc, double tol,
                   uint64_t seed) {
    if (!(target_r2 > 0.0 && target_r2 < 1.0))
        fail(Err::ConfigInvalid, "calibrate_c: target_r2 must lie in (0,1)");
    const CalibrationSample sample = draw_calibration_sample(rho, design, n_mc, seed);

    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (sample.r2(hi) < target_r2) {
        hi *= 2.0;
        if (++guard > 60) fail(Err::CalibrationFailed, "calibrate_c: no bracket for target R^2");
    }
    double mid = hi;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double r2 = sample.r2(mid);
        if (std::abs(r2 - target_r2) <= 0.5 * tol) return mid;
        (r2 < target_r2 ? lo : hi) = mid;
    }
    if (std::abs(sample.r2(mid) - target_r2) <= tol) return mid;
    fail(Err::CalibrationFailed, "calibrate_c: bisection did not reach tolerance");
}

double ase(const Vector& estimates, const Vector& truth) {
    if (estimates.size() != truth.size() || estimates.size() < 1)
        fail(Err::DimensionMismatch, "ase: estimate/truth lengths differ");
    return (estimates - truth).squaredNorm() / static_cast<double>(estimates.size());
}

OracleResult oracle_weights(const Matrix& per_model, const Vector& truth) {
    if (!per_model.allFinite() || !truth.allFinite())
        fail(Err::ConfigInvalid, "oracle_weights: non-finite inputs");
    const SolveResult sol = solve_simplex_lsq(per_model, truth);
    OracleResult out;
    out.w = sol.w;
    out.ase = ase(per_model * sol.w.w, truth);
    out.normalizer_zero = out.ase <= 1e-18 * std::max(1.0, truth.squaredNorm() / truth.size());
    return out;
}

std::vector<CandidateSpec> default_candidates(int example) {
    std::vector<CandidateSpec> specs;
    if (example == 1) {
        // All-misspecified linear specs: every one omits the quadratic truth terms.
        specs.push_back({0, true, {lin(0)}});
        specs.push_back({1, true, {lin(1)}});
        specs.push_back({2, true, {lin(0), lin(1)}});
        specs.push_back({3, true, {lin(0), lin(1), lin(2), lin(3)}});
    } else if (example == 2) {
        // First spec spans f_t and f_c exactly; the rest are misspecified.
        specs.push_back({0, true, {lin(0), lin(1), sq(0), sq(1)}});
        specs.push_back({1, true, {lin(0)}});
        specs.push_back({2, true, {lin(1), lin(2)}});
        specs.push_back({3, true, {lin(2), lin(3)}});
    } else {
        fail(Err::ConfigInvalid, "default_candidates: example must be 1 or 2");
    }
    return specs;
}

Dataset nswd_standin(uint64_t seed) {
    constexpr int kN = 722, kTreated = 297;
    Rng rng(seed);
    Dataset data;
    data.x.resize(kN, 4);
    data.t.assign(kN, 0);
    data.y.resize(kN);
    for (int i = 0; i < kTreated; ++i) data.t[i] = 1;
    // Covariates shaped like (sqrt 1975 income, age, education, marital status).
    for (int i = 0; i < kN; ++i) {
        const bool employed75 = rng.bernoulli(0.65);
        const double sqrt_income = employed75 ? std::abs(rng.normal(55.0, 25.0)) : 0.0;
        const double age = std::floor(rng.uniform(17.0, 56.0));
        const double edu = std::clamp(std::floor(rng.normal(10.3, 2.0) + 0.5), 3.0, 16.0);
        const double married = rng.bernoulli(0.3) ? 1.0 : 0.0;
        data.x(i, 0) = sqrt_income;
        data.x(i, 1) = age;
        data.x(i, 2) = edu;
        data.x(i, 3) = married;
        const double base = 0.15 * sqrt_income - 0.4 * (age - 35.0) / 10.0 + 1.2 * (edu - 10.0) +
                            3.0 * married;
        const double effect = 4.0 + 0.05 * sqrt_income;
        data.y(i) = base + (data.t[i] == 1 ? effect : 0.0) + rng.normal(0.0, 8.0);
    }
    return data;
}

}  // namespace jmacate
