#include "jmacate/jma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace jmacate {

void WeightVector::validate() const {
    double sum = 0.0;
    for (int i = 0; i < w.size(); ++i) {
        if (w(i) < -1e-12 || w(i) > 1.0 + 1e-12)
            fail(Err::ConfigInvalid, "weight outside [0,1]");
        sum += w(i);
    }
    if (std::abs(sum - 1.0) > 1e-10) fail(Err::ConfigInvalid, "weights do not sum to 1");
}

WeightVector WeightVector::vertex(int k, int K) {
    Vector w = Vector::Zero(K);
    w(k) = 1.0;
    return {w};
}

WeightVector WeightVector::uniform(int K) { return {Vector::Constant(K, 1.0 / K)}; }

ArmSplit ArmSplit::from(const std::vector<int>& t) {
    ArmSplit split;
    split.arm_pos.resize(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == 1) {
            split.arm_pos[i] = static_cast<int>(split.treated_rows.size());
            split.treated_rows.push_back(static_cast<int>(i));
        } else {
            split.arm_pos[i] = static_cast<int>(split.control_rows.size());
            split.control_rows.push_back(static_cast<int>(i));
        }
    }
    return split;
}

FittedModels fit_all(const Dataset& data, const std::vector<CandidateSpec>& specs,
                     double rcond_min) {
    data.validate();
    if (specs.empty()) fail(Err::ConfigInvalid, "fit_all: empty candidate set");
    FittedModels out;
    out.split = ArmSplit::from(data.t);
    if (out.split.treated_rows.empty() || out.split.control_rows.empty())
        fail(Err::NoPairs, "fit_all: one arm is empty");

    const auto gather = [&](const std::vector<int>& rows) {
        Vector v(static_cast<int>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i) v(static_cast<int>(i)) = data.y(rows[i]);
        return v;
    };
    out.y_t = gather(out.split.treated_rows);
    out.y_c = gather(out.split.control_rows);

    for (const auto& spec : specs) {
        spec.validate(data.p());
        ModelFit mf;
        mf.spec = spec;
        mf.design_t = build_design(spec, data.x, out.split.treated_rows);
        mf.design_c = build_design(spec, data.x, out.split.control_rows);
        try {
            mf.ols_t = fit_ols(mf.design_t, out.y_t, rcond_min);
            mf.ols_c = fit_ols(mf.design_c, out.y_c, rcond_min);
        } catch (const Error& e) {
            throw Error(e.code(), "candidate " + std::to_string(spec.id) + ": " + e.what());
        }
        out.models.push_back(std::move(mf));
    }
    return out;
}

double delta_hat(const ModelFit& model, const Vector& u_raw) {
    const Vector basis = expand_basis(model.spec, u_raw);
    return predict(model.ols_t, basis) - predict(model.ols_c, basis);
}

JackknifeSystem build_jackknife_system(const Dataset& data, const FittedModels& fitted,
                                       const MatchedPairSet& pairs) {
    const int M = pairs.m();
    const int K = fitted.k();
    JackknifeSystem sys;
    sys.pair_set = pairs;
    sys.delta_tilde.resize(M, K);
    sys.y_tilde.resize(M);

    for (int m = 0; m < M; ++m) {
        const MatchedPair& pr = pairs.pairs[m];
        if (data.t[pr.treated] != 1 || data.t[pr.control] != 0)
            fail(Err::ConfigInvalid, "jackknife: pair arms do not match treatment vector");
        sys.y_tilde(m) = data.y(pr.treated) - data.y(pr.control);
        const int jt = fitted.split.arm_pos[pr.treated];
        const int jc = fitted.split.arm_pos[pr.control];
        const Vector u_t = data.x.row(pr.treated).transpose();
        for (int k = 0; k < K; ++k) {
            const ModelFit& mf = fitted.models[k];
            const Vector basis = expand_basis(mf.spec, u_t);
            try {
                const Vector bt = loo_coef(mf.ols_t, mf.design_t, fitted.y_t, jt);
                const Vector bc = loo_coef(mf.ols_c, mf.design_c, fitted.y_c, jc);
                sys.delta_tilde(m, k) = basis.dot(bt) - basis.dot(bc);
            } catch (const Error& e) {
                throw Error(e.code(), "jackknife entry (pair " + std::to_string(m) +
                                          ", candidate " + std::to_string(mf.spec.id) +
                                          "): " + e.what());
            }
        }
    }
    if (!sys.delta_tilde.allFinite() || !sys.y_tilde.allFinite())
        fail(Err::ConfigInvalid, "jackknife: non-finite entries");
    return sys;
}

JackknifeSystem build_jackknife_system(const Dataset& data, const std::vector<CandidateSpec>& specs,
                                       const MatchedPairSet& pairs) {
    return build_jackknife_system(data, fit_all(data, specs), pairs);
}

double cv_value(const WeightVector& w, const JackknifeSystem& sys) {
    if (w.k() != sys.k()) fail(Err::DimensionMismatch, "cv_value: weight length != K");
    return (sys.delta_tilde * w.w - sys.y_tilde).squaredNorm();
}

Vector project_to_simplex(const Vector& v) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    for (int i = 0; i < n; ++i) {
        css += u[i];
        const double cand = (css - 1.0) / (i + 1);
        if (u[i] - cand > 0.0) tau = cand;
    }
    Vector out(n);
    for (int i = 0; i < n; ++i) out(i) = std::max(0.0, v(i) - tau);
    return out;
}

namespace {

// Largest eigenvalue of the symmetric PSD matrix g by power iteration.
double power_iteration_lmax(const Matrix& g) {
    const int k = static_cast<int>(g.rows());
    Vector v = Vector::Constant(k, 1.0 / std::sqrt(static_cast<double>(k)));
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vector gv = g * v;
        const double norm = gv.norm();
        if (norm <= 0.0) return 0.0;
        gv /= norm;
        const double next = gv.dot(g * gv);
        const bool settled = std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next));
        lambda = next;
        v = gv;
        if (settled && it > 2) break;
    }
    return lambda;
}

struct KktInfo {
    double residual;  // max over active coordinates of g_k - min_j g_j
    double scale;     // max(1, ||g||_inf)
};

KktInfo kkt_residual(const Vector& w, const Vector& grad, double active_eps) {
    const double gmin = grad.minCoeff();
    double worst = 0.0;
    for (int i = 0; i < w.size(); ++i)
        if (w(i) > active_eps) worst = std::max(worst, grad(i) - gmin);
    return {worst, std::max(1.0, grad.cwiseAbs().maxCoeff())};
}

}  // namespace

SolveResult solve_simplex_lsq(const Matrix& a, const Vector& b, double tol, int max_iter) {
    const int K = static_cast<int>(a.cols());
    const int M = static_cast<int>(a.rows());
    if (K < 1 || M < 1) fail(Err::DimensionMismatch, "solve_simplex_lsq: empty system");
    if (b.size() != M) fail(Err::DimensionMismatch, "solve_simplex_lsq: rhs length mismatch");

    SolveResult res;
    if (K == 1) {
        res.w = WeightVector::vertex(0, 1);
        res.objective = (a * res.w.w - b).squaredNorm();
        return res;
    }

    const Matrix gram = a.transpose() * a;            // K x K
    const Vector atb = a.transpose() * b;             // K
    const double btb = b.squaredNorm();
    const auto grad = [&](const Vector& w) -> Vector { return 2.0 * (gram * w - atb); };
    const auto objective = [&](const Vector& w) -> double {
        return std::max(0.0, w.dot(gram * w) - 2.0 * atb.dot(w) + btb);
    };

    const double lmax = 2.0 * power_iteration_lmax(gram);
    Vector x = WeightVector::uniform(K).w;
    if (lmax <= 1e-300) {
        // Zero prediction matrix: CV constant over the simplex.
        res.w = {x};
        res.objective = objective(x);
        return res;
    }
    const double step = 1.0 / (1.01 * lmax);

    Vector y = x;
    double fx = objective(x);
    double t = 1.0;
    int it = 0;
    bool converged = false;
    double kkt = 0.0;
    constexpr double kActiveEps = 1e-10;

    for (; it < max_iter; ++it) {
        Vector x_next = project_to_simplex(y - step * grad(y));
        double f_next = objective(x_next);
        if (f_next > fx) {  // restart acceleration from the last accepted point
            y = x;
            t = 1.0;
            x_next = project_to_simplex(y - step * grad(y));
            f_next = objective(x_next);
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = x_next + ((t - 1.0) / t_next) * (x_next - x);
        x = x_next;
        fx = f_next;
        t = t_next;

        const KktInfo info = kkt_residual(x, grad(x), kActiveEps);
        kkt = info.residual;
        if (info.residual <= tol * info.scale) {
            converged = true;
            ++it;
            break;
        }
    }

    // The best vertex is always feasible; never return anything worse.
    int best_vertex = 0;
    double best_vertex_obj = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const double f = objective(Vector::Unit(K, k));
        if (f < best_vertex_obj) {
            best_vertex_obj = f;
            best_vertex = k;
        }
    }
    if (best_vertex_obj < fx) {
        x = Vector::Unit(K, best_vertex);
        fx = best_vertex_obj;
        kkt = kkt_residual(x, grad(x), kActiveEps).residual;
    }

    res.w = {x};
    res.w.validate();
    res.objective = fx;
    res.kkt_residual = kkt;
    res.iterations = it;
    res.converged = converged;
    return res;
}

SolveResult solve_weights(const JackknifeSystem& sys, double tol, int max_iter) {
    return solve_simplex_lsq(sys.delta_tilde, sys.y_tilde, tol, max_iter);
}

Matrix per_model_estimates(const FittedModels& fitted, const Matrix& eval_x) {
    const int N = static_cast<int>(eval_x.rows());
    Matrix out(N, fitted.k());
    for (int k = 0; k < fitted.k(); ++k) {
        const ModelFit& mf = fitted.models[k];
        for (int i = 0; i < N; ++i) out(i, k) = delta_hat(mf, eval_x.row(i).transpose());
    }
    return out;
}

CateEstimate jma_estimate(const FittedModels& fitted, const WeightVector& w, const Matrix& eval_x) {
    if (w.k() != fitted.k()) fail(Err::DimensionMismatch, "jma_estimate: weight length != K");
    w.validate();
    CateEstimate est;
    est.per_model = per_model_estimates(fitted, eval_x);
    est.point = est.per_model * w.w;
    est.weights = w;
    return est;
}

}  // namespace jmacate
