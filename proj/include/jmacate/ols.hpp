#pragma once

#include "jmacate/types.hpp"

namespace jmacate {

// Per-arm least-squares fit. gram_inverse and hat_diag are kept around for the
// exact leave-one-out downdates used by the jackknife criterion.
struct OlsFit {
    Vector coef;
    Matrix gram_inverse;  // (U'U)^{-1}
    Vector hat_diag;      // leverage h_jj per retained row
    Vector residuals;
    double rss = 0.0;

    int n() const { return static_cast<int>(residuals.size()); }
    int p() const { return static_cast<int>(coef.size()); }
};

// QR-based fit. Errors: Underdetermined when p >= n, RankDeficient when the
// reciprocal condition number of the design falls below rcond_min.
OlsFit fit_ols(const Matrix& design, const Vector& y, double rcond_min = 1e-10);

double predict(const OlsFit& fit, const Vector& u);

// Coefficients with row j deleted, via the Sherman-Morrison rank-one downdate
//   coef_(-j) = coef - gram_inverse * u_j * e_j / (1 - h_jj).
// Errors: LeverageOne when h_jj >= 1 - leverage_eps, DowndateRankLoss when the
// deleted fit would no longer be overdetermined.
Vector loo_coef(const OlsFit& fit, const Matrix& design, const Vector& y, int j,
                double leverage_eps = 1e-10);

}  // namespace jmacate
