#include "jmacate/baselines.hpp"

#include <cmath>
#include <limits>

namespace jmacate {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// -2 * Gaussian profile log-likelihood of one arm
double neg2_loglik(double rss, int n) { return n * (std::log(kTwoPi * rss / n) + 1.0); }

// rss measured against the response scale; ||y||^2 = ||fitted||^2 + rss
bool effectively_zero_rss(const OlsFit& fit, const Matrix& design) {
    const double fitted2 = (design * fit.coef).squaredNorm();
    return fit.rss <= 1e-12 * std::max(1.0, fitted2 + fit.rss);
}

}  // namespace

ModelScore information_scores(const ModelFit& model) {
    const int n_t = model.ols_t.n();
    const int n_c = model.ols_c.n();
    const int p_k = model.ols_t.p();
    ModelScore s;
    // A vanishing rss sends the profile likelihood to +inf; that model wins
    // selection, flagged via the sentinel.
    if (effectively_zero_rss(model.ols_t, model.design_t) ||
        effectively_zero_rss(model.ols_c, model.design_c)) {
        s.zero_residual = true;
        s.aic = kZeroResidualSentinel;
        s.bic = kZeroResidualSentinel;
        return s;
    }
    const double dev = neg2_loglik(model.ols_t.rss, n_t) + neg2_loglik(model.ols_c.rss, n_c);
    // p_k coefficients plus one variance parameter per arm
    s.aic = dev + 2.0 * (p_k + 1) + 2.0 * (p_k + 1);
    s.bic = dev + (std::log(static_cast<double>(n_t)) + std::log(static_cast<double>(n_c))) * (p_k + 1);
    return s;
}

ModelScore information_scores(const Dataset& data, const CandidateSpec& spec) {
    return information_scores(fit_all(data, {spec}).models[0]);
}

ScoreTable score_table(const FittedModels& fitted, const JackknifeSystem& sys) {
    if (sys.k() != fitted.k()) fail(Err::DimensionMismatch, "score_table: K mismatch");
    ScoreTable table;
    for (int k = 0; k < fitted.k(); ++k) {
        const ModelScore s = information_scores(fitted.models[k]);
        table.aic.push_back(s.aic);
        table.bic.push_back(s.bic);
        table.zero_residual.push_back(s.zero_residual);
        table.tecv.push_back((sys.delta_tilde.col(k) - sys.y_tilde).squaredNorm());
    }
    return table;
}

WeightVector smoothed_weights(const std::vector<double>& scores) {
    const int K = static_cast<int>(scores.size());
    if (K < 1) fail(Err::DimensionMismatch, "smoothed_weights: empty score list");
    double smin = std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (std::isnan(s)) fail(Err::ConfigInvalid, "smoothed_weights: NaN score");
        smin = std::min(smin, s);
    }
    if (!std::isfinite(smin))
        fail(Err::ConfigInvalid, "smoothed_weights: no finite score");
    Vector w(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        w(k) = std::exp(-0.5 * (scores[k] - smin));  // min-shifted for overflow safety
        total += w(k);
    }
    w /= total;
    WeightVector out{w};
    out.validate();
    return out;
}

int select_min(const std::vector<double>& scores) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(scores.size()); ++k)
        if (scores[k] < scores[best]) best = k;
    return best;
}

int tecv_select(const JackknifeSystem& sys) {
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k < sys.k(); ++k) {
        const double val = (sys.delta_tilde.col(k) - sys.y_tilde).squaredNorm();
        if (val < best_val) {
            best_val = val;
            best = k;
        }
    }
    return best;
}

}  // namespace jmacate
