#include "jmacate/jma.hpp"
#include "jmacate/rng.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace jmacate;
using testutil::brute_force_jackknife_entry;
using testutil::grid_min_objective;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

// Balanced dataset with standard-normal covariates and y = delta(u) * t + base(u) + noise.
Dataset make_dataset(int n, int p, Rng& rng, double noise_sd = 0.5) {
    Dataset data;
    data.x = random_matrix(n, p, rng);
    data.t.resize(n);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        data.t[i] = i % 2;
        const double base = 0.3 * data.x(i, 0);
        const double effect = 1.0 + 0.5 * data.x(i, 0);
        data.y(i) = base + (data.t[i] == 1 ? effect : 0.0) + rng.normal(0.0, noise_sd);
    }
    return data;
}

MatchedPairSet trivial_pairs(const Dataset& data, int count) {
    MatchedPairSet set;
    set.h = 1.0;
    std::vector<int> treated, control;
    for (int i = 0; i < data.n(); ++i)
        (data.t[i] == 1 ? treated : control).push_back(i);
    for (int m = 0; m < count; ++m) set.pairs.push_back({treated[m], control[m], m});
    return set;
}

}  // namespace

TEST_SUITE("jma") {

TEST_CASE("expand_basis follows the candidate's term order") {
    Vector u(2);
    u << 3, 7;
    CandidateSpec s1{0, true, {lin(0)}};
    const Vector b1 = expand_basis(s1, u);
    CHECK(b1(0) == 1.0);
    CHECK(b1(1) == 3.0);

    Vector v(2);
    v << 2, 5;
    CandidateSpec s2{1, false, {sq(0), lin(1)}};
    const Vector b2 = expand_basis(s2, v);
    CHECK(b2(0) == 4.0);
    CHECK(b2(1) == 5.0);

    CandidateSpec s3{2, false, {inter(0, 1)}};
    const Vector b3 = expand_basis(s3, v);
    CHECK(b3(0) == 10.0);

    CandidateSpec bad{3, true, {lin(5)}};
    try {
        expand_basis(bad, u);
        FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == Err::IndexOutOfRange);
    }
}

TEST_CASE("duplicate terms are rejected") {
    CandidateSpec dup{0, true, {lin(0), lin(0)}};
    CHECK_THROWS_AS(dup.validate(3), Error);
}

TEST_CASE("delta_hat is zero for identical arms") {
    Rng rng(2);
    const Matrix half = random_matrix(12, 2, rng);
    const Vector yhalf = random_vector(12, rng);
    Dataset data;
    data.x.resize(24, 2);
    data.x << half, half;
    data.y.resize(24);
    data.y << yhalf, yhalf;
    data.t.assign(24, 0);
    for (int i = 0; i < 12; ++i) data.t[i] = 1;

    const auto fitted = fit_all(data, {{0, true, {lin(0), lin(1)}}});
    for (int trial = 0; trial < 5; ++trial) {
        const Vector u = random_vector(2, rng);
        CHECK(std::abs(delta_hat(fitted.models[0], u)) < 1e-10);
    }
}

TEST_CASE("delta_hat recovers a noiseless linear effect") {
    Rng rng(3);
    Dataset data = make_dataset(40, 2, rng, 0.0);
    // y = 0.3 u1 + t (1 + 0.5 u1): both arms linear in {1, u1}
    const auto fitted = fit_all(data, {{0, true, {lin(0)}}});
    for (int trial = 0; trial < 10; ++trial) {
        const Vector u = random_vector(2, rng);
        CHECK(delta_hat(fitted.models[0], u) == doctest::Approx(1.0 + 0.5 * u(0)).epsilon(1e-10));
    }
}

TEST_CASE("hand-computed jackknife entry for intercept-only arms") {
    Dataset data;
    data.x = Matrix::Zero(6, 1);
    data.x << 0.1, 0.2, 0.3, 0.15, 0.25, 0.12;
    data.t = {1, 1, 1, 0, 0, 0};
    data.y.resize(6);
    data.y << 1, 2, 3, 0, 0, 3;

    MatchedPairSet pairs;
    pairs.h = 1.0;
    pairs.pairs.push_back({0, 5, 0});  // treated y = 1, control y = 3

    const std::vector<CandidateSpec> specs = {{0, true, {}}};
    const JackknifeSystem sys = build_jackknife_system(data, specs, pairs);
    REQUIRE(sys.m() == 1);
    CHECK(sys.delta_tilde(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(sys.y_tilde(0) == doctest::Approx(-2.0));
}

TEST_CASE("zero-residual fits make deletion inert: entries equal delta_hat") {
    Rng rng(5);
    Dataset data = make_dataset(30, 2, rng, 0.0);  // noiseless
    const std::vector<CandidateSpec> specs = {{0, true, {lin(0)}}};
    const auto fitted = fit_all(data, specs);
    const MatchedPairSet pairs = trivial_pairs(data, 6);
    const JackknifeSystem sys = build_jackknife_system(data, fitted, pairs);
    for (int m = 0; m < sys.m(); ++m) {
        const double full =
            delta_hat(fitted.models[0], data.x.row(pairs.pairs[m].treated).transpose());
        CHECK(sys.delta_tilde(m, 0) == doctest::Approx(full).epsilon(1e-10));
    }
}

TEST_CASE("jackknife system equals brute-force refits entrywise") {
    Rng rng(7);
    Dataset data = make_dataset(50, 3, rng);
    const std::vector<CandidateSpec> specs = {
        {0, true, {lin(0)}},
        {1, true, {lin(0), lin(1)}},
        {2, true, {lin(0), lin(1), lin(2)}},
    };
    const auto fitted = fit_all(data, specs);
    const MatchedPairSet pairs = trivial_pairs(data, 10);
    const JackknifeSystem sys = build_jackknife_system(data, fitted, pairs);
    for (int m = 0; m < sys.m(); ++m)
        for (int k = 0; k < sys.k(); ++k) {
            const double slow = brute_force_jackknife_entry(data, fitted, k, pairs.pairs[m]);
            CHECK(sys.delta_tilde(m, k) ==
                  doctest::Approx(slow).epsilon(1e-8));
        }
}

TEST_CASE("cv_value is an exact sum of squares") {
    Rng rng(9);
    JackknifeSystem sys;
    sys.delta_tilde = random_matrix(20, 3, rng);
    sys.y_tilde = random_vector(20, rng);

    SUBCASE("perfect fit gives zero") {
        WeightVector w = WeightVector::vertex(1, 3);
        JackknifeSystem exact = sys;
        exact.y_tilde = exact.delta_tilde.col(1);
        CHECK(cv_value(w, exact) == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("K = 1 reduces to a residual sum") {
        JackknifeSystem one;
        one.delta_tilde = sys.delta_tilde.leftCols(1);
        one.y_tilde = sys.y_tilde;
        double direct = 0.0;
        for (int m = 0; m < 20; ++m)
            direct += std::pow(one.delta_tilde(m, 0) - one.y_tilde(m), 2);
        CHECK(cv_value(WeightVector::vertex(0, 1), one) == doctest::Approx(direct).epsilon(1e-12));
    }
    SUBCASE("random simplex point matches direct summation") {
        Vector raw = random_vector(3, rng);
        WeightVector w{project_to_simplex(raw)};
        double direct = 0.0;
        for (int m = 0; m < 20; ++m) {
            double pred = 0.0;
            for (int k = 0; k < 3; ++k) pred += sys.delta_tilde(m, k) * w.w(k);
            direct += (pred - sys.y_tilde(m)) * (pred - sys.y_tilde(m));
        }
        CHECK(cv_value(w, sys) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("simplex projection basics") {
    Vector v(3);
    v << 2.0, 0.0, 0.0;
    const Vector p1 = project_to_simplex(v);
    CHECK(p1(0) == doctest::Approx(1.0));
    CHECK(p1(1) == doctest::Approx(0.0));

    Vector sym = Vector::Constant(4, -3.0);
    const Vector p2 = project_to_simplex(sym);
    for (int i = 0; i < 4; ++i) CHECK(p2(i) == doctest::Approx(0.25));

    Vector already(2);
    already << 0.3, 0.7;
    const Vector p3 = project_to_simplex(already);
    CHECK(p3(0) == doctest::Approx(0.3).epsilon(1e-12));

    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector x = 3.0 * random_vector(5, rng);
        const Vector p = project_to_simplex(x);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-10));
        // projection optimality vs random feasible points
        for (int probe = 0; probe < 10; ++probe) {
            const Vector q = project_to_simplex(random_vector(5, rng));
            CHECK((p - x).squaredNorm() <= (q - x).squaredNorm() + 1e-9);
        }
    }
}

TEST_CASE("solve_weights: singleton simplex") {
    JackknifeSystem sys;
    sys.delta_tilde = Matrix::Constant(5, 1, 2.0);
    sys.y_tilde = Vector::Ones(5);
    const SolveResult res = solve_weights(sys);
    CHECK(res.w.w(0) == doctest::Approx(1.0));
    CHECK(res.objective == doctest::Approx(5.0));
}

TEST_CASE("solve_weights: perfect column takes all weight") {
    Rng rng(15);
    JackknifeSystem sys;
    sys.y_tilde = random_vector(30, rng);
    sys.delta_tilde.resize(30, 2);
    sys.delta_tilde.col(0) = sys.y_tilde;
    sys.delta_tilde.col(1) = sys.y_tilde + random_vector(30, rng);
    const SolveResult res = solve_weights(sys);
    CHECK(res.w.w(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.objective < 1e-12);
}

TEST_CASE("solve_weights beats the 0.01-step simplex grid") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix a = random_matrix(25, 3, rng);
        const Vector b = random_vector(25, rng);
        const SolveResult res = solve_simplex_lsq(a, b);
        CHECK(res.converged);
        const double grid = grid_min_objective(a, b, 0.01);
        CHECK(res.objective <= grid + 1e-6);
    }
}

TEST_CASE("solve_weights satisfies the KKT certificate and the vertex bound") {
    Rng rng(19);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 10 + rng.uniform_int(40);
        const int k = 2 + rng.uniform_int(4);
        JackknifeSystem sys;
        sys.delta_tilde = random_matrix(m, k, rng);
        sys.y_tilde = random_vector(m, rng);
        const SolveResult res = solve_weights(sys);

        res.w.validate();
        const Vector g =
            2.0 * sys.delta_tilde.transpose() * (sys.delta_tilde * res.w.w - sys.y_tilde);
        const double gmin = g.minCoeff();
        const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
        for (int j = 0; j < k; ++j)
            if (res.w.w(j) > 1e-8) CHECK(g(j) - gmin <= 1e-6 * scale);

        double best_vertex = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j)
            best_vertex = std::min(best_vertex,
                                   cv_value(WeightVector::vertex(j, k), sys));
        CHECK(res.objective <= best_vertex + 1e-9);
    }
}

TEST_CASE("iteration cap returns the best feasible iterate with a warning flag") {
    Rng rng(27);
    const Matrix a = random_matrix(30, 4, rng);
    const Vector b = random_vector(30, rng);
    const SolveResult res = solve_simplex_lsq(a, b, 1e-10, 2);
    CHECK_FALSE(res.converged);
    res.w.validate();  // still a simplex point
    double best_vertex = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k)
        best_vertex = std::min(best_vertex, (a * Vector::Unit(4, k) - b).squaredNorm());
    CHECK(res.objective <= best_vertex + 1e-9);
}

TEST_CASE("solver is deterministic") {
    Rng rng(21);
    const Matrix a = random_matrix(40, 4, rng);
    const Vector b = random_vector(40, rng);
    const SolveResult r1 = solve_simplex_lsq(a, b);
    const SolveResult r2 = solve_simplex_lsq(a, b);
    CHECK((r1.w.w - r2.w.w).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("jma_estimate: vertices, duplicates, convexity") {
    Rng rng(23);
    Dataset data = make_dataset(60, 2, rng);
    const std::vector<CandidateSpec> specs = {
        {0, true, {lin(0)}},
        {1, true, {lin(1)}},
        {2, true, {lin(0), lin(1)}},
    };
    const auto fitted = fit_all(data, specs);
    const Matrix eval = random_matrix(15, 2, rng);

    const CateEstimate vertex = jma_estimate(fitted, WeightVector::vertex(1, 3), eval);
    for (int i = 0; i < eval.rows(); ++i)
        CHECK(vertex.point(i) ==
              doctest::Approx(delta_hat(fitted.models[1], eval.row(i).transpose())));

    // equal weights over identical specs = any single spec
    const std::vector<CandidateSpec> twins = {{0, true, {lin(0)}}, {1, true, {lin(0)}}};
    const auto twin_fit = fit_all(data, twins);
    const CateEstimate avg = jma_estimate(twin_fit, WeightVector::uniform(2), eval);
    for (int i = 0; i < eval.rows(); ++i)
        CHECK(avg.point(i) ==
              doctest::Approx(delta_hat(twin_fit.models[0], eval.row(i).transpose())).epsilon(1e-10));

    Vector raw = random_vector(3, rng);
    const WeightVector w{project_to_simplex(raw)};
    const CateEstimate mixed = jma_estimate(fitted, w, eval);
    for (int i = 0; i < eval.rows(); ++i) {
        const double lo = mixed.per_model.row(i).minCoeff();
        const double hi = mixed.per_model.row(i).maxCoeff();
        CHECK(mixed.point(i) >= lo - 1e-10);
        CHECK(mixed.point(i) <= hi + 1e-10);
        CHECK(mixed.point(i) ==
              doctest::Approx(mixed.per_model.row(i).dot(w.w)).epsilon(1e-10));
    }
}

TEST_CASE("adding a constant to every response changes nothing (intercepts present)") {
    Rng rng(29);
    Dataset data = make_dataset(80, 3, rng);
    const std::vector<CandidateSpec> specs = {
        {0, true, {lin(0)}},
        {1, true, {lin(1), lin(2)}},
        {2, true, {lin(0), lin(1), lin(2)}},
    };
    const MatchedPairSet pairs = trivial_pairs(data, 12);
    const Matrix eval = random_matrix(10, 3, rng);

    Dataset shifted = data;
    shifted.y.array() += 7.25;

    const auto f1 = fit_all(data, specs);
    const auto f2 = fit_all(shifted, specs);
    const Matrix p1 = per_model_estimates(f1, eval);
    const Matrix p2 = per_model_estimates(f2, eval);
    CHECK((p1 - p2).lpNorm<Eigen::Infinity>() < 1e-9);

    const JackknifeSystem s1 = build_jackknife_system(data, f1, pairs);
    const JackknifeSystem s2 = build_jackknife_system(shifted, f2, pairs);
    CHECK((s1.delta_tilde - s2.delta_tilde).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((s1.y_tilde - s2.y_tilde).lpNorm<Eigen::Infinity>() < 1e-9);

    const SolveResult w1 = solve_weights(s1);
    const SolveResult w2 = solve_weights(s2);
    CHECK((w1.w.w - w2.w.w).lpNorm<Eigen::Infinity>() < 1e-9);
}

}  // TEST_SUITE
