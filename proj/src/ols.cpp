#include "jmacate/ols.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace jmacate {

OlsFit fit_ols(const Matrix& design, const Vector& y, double rcond_min) {
    const int n = static_cast<int>(design.rows());
    const int p = static_cast<int>(design.cols());
    if (y.size() != n) fail(Err::DimensionMismatch, "fit_ols: rows(design) != len(y)");
    if (p < 1) fail(Err::DimensionMismatch, "fit_ols: empty design");
    if (p > n - 1)
        fail(Err::Underdetermined, "fit_ols: p_k = " + std::to_string(p) +
                                       " exceeds n - 1 = " + std::to_string(n - 1));

    Eigen::HouseholderQR<Matrix> qr(design);
    Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

    // Condition estimate from the singular values of the p x p R factor.
    Eigen::JacobiSVD<Matrix> svd(r);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(p - 1);
    if (!(smax > 0.0) || smin / smax < rcond_min)
        fail(Err::RankDeficient, "fit_ols: reciprocal condition estimate " +
                                     std::to_string(smax > 0.0 ? smin / smax : 0.0) +
                                     " below threshold");

    OlsFit fit;
    fit.coef = qr.solve(y);

    // (U'U)^{-1} = R^{-1} R^{-T}
    Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    fit.gram_inverse = rinv * rinv.transpose();

    fit.residuals = y - design * fit.coef;
    fit.rss = fit.residuals.squaredNorm();
    fit.hat_diag.resize(n);
    for (int j = 0; j < n; ++j) {
        const auto row = design.row(j);
        fit.hat_diag(j) = row * fit.gram_inverse * row.transpose();
    }
    return fit;
}

double predict(const OlsFit& fit, const Vector& u) {
    if (u.size() != fit.coef.size())
        fail(Err::DimensionMismatch, "predict: basis length != p_k");
    return u.dot(fit.coef);
}

Vector loo_coef(const OlsFit& fit, const Matrix& design, const Vector& y, int j,
                double leverage_eps) {
    const int n = fit.n();
    const int p = fit.p();
    if (j < 0 || j >= n) fail(Err::IndexOutOfRange, "loo_coef: row index out of range");
    if (design.rows() != n || design.cols() != p || y.size() != n)
        fail(Err::DimensionMismatch, "loo_coef: fit/design shape mismatch");
    if (n - 1 < p)
        fail(Err::DowndateRankLoss, "loo_coef: deletion leaves fewer rows than columns");
    const double h = fit.hat_diag(j);
    if (h >= 1.0 - leverage_eps)
        fail(Err::LeverageOne,
             "loo_coef: leverage " + std::to_string(h) + " at row " + std::to_string(j));
    return fit.coef - fit.gram_inverse * design.row(j).transpose() *
                          (fit.residuals(j) / (1.0 - h));
}

}  // namespace jmacate
