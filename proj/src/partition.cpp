#include "jmacate/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace jmacate {

Matrix CubeTransform::apply(const Matrix& x) const {
    Matrix out(x.rows(), static_cast<int>(dims.size()));
    for (size_t d = 0; d < dims.size(); ++d)
        out.col(static_cast<int>(d)) =
            (x.col(dims[d]).array() - lo(static_cast<int>(d))) /
            (hi(static_cast<int>(d)) - lo(static_cast<int>(d)));
    return out;
}

Vector CubeTransform::apply_row(const Vector& u_raw) const {
    Vector out(static_cast<int>(dims.size()));
    for (size_t d = 0; d < dims.size(); ++d)
        out(static_cast<int>(d)) =
            (u_raw(dims[d]) - lo(static_cast<int>(d))) / (hi(static_cast<int>(d)) - lo(static_cast<int>(d)));
    return out;
}

Vector CubeTransform::invert_row(const Vector& u_scaled) const {
    if (u_scaled.size() != static_cast<int>(dims.size()))
        fail(Err::DimensionMismatch, "CubeTransform: scaled coordinate length mismatch");
    Vector out(u_scaled.size());
    for (int d = 0; d < u_scaled.size(); ++d) out(d) = lo(d) + u_scaled(d) * (hi(d) - lo(d));
    return out;
}

CubeTransform fit_cube_transform(const Matrix& x, const std::vector<int>& dims) {
    if (dims.empty()) fail(Err::DimensionMismatch, "fit_cube_transform: no matching dimensions");
    CubeTransform tr;
    tr.dims = dims;
    tr.lo.resize(static_cast<int>(dims.size()));
    tr.hi.resize(static_cast<int>(dims.size()));
    for (size_t d = 0; d < dims.size(); ++d) {
        if (dims[d] < 0 || dims[d] >= x.cols())
            fail(Err::IndexOutOfRange, "fit_cube_transform: dimension index out of range");
        const double mn = x.col(dims[d]).minCoeff();
        const double mx = x.col(dims[d]).maxCoeff();
        if (!(mx > mn))
            fail(Err::DegenerateDimension,
                 "fit_cube_transform: covariate " + std::to_string(dims[d]) + " is constant");
        tr.lo(static_cast<int>(d)) = mn;
        tr.hi(static_cast<int>(d)) = mx;
    }
    return tr;
}

double default_side_length(double n, int p_match) {
    if (!(n >= 2.0)) fail(Err::ConfigInvalid, "default_side_length: n must be >= 2");
    if (p_match < 1) fail(Err::ConfigInvalid, "default_side_length: p_match must be >= 1");
    const double h = std::pow(std::log(n) / n, 1.0 / p_match);
    return std::min(1.0, std::max(h, 1e-12));
}

namespace {

std::vector<int> cell_coords(const Matrix& x_scaled, int row, double h) {
    const int p = static_cast<int>(x_scaled.cols());
    const long last = static_cast<long>(std::ceil(1.0 / h)) - 1;
    std::vector<int> c(p);
    for (int d = 0; d < p; ++d) {
        const double u = x_scaled(row, d);
        long idx = static_cast<long>(std::floor(u / h));
        idx = std::min(idx, last);  // fold u = 1 into the last cell
        c[d] = static_cast<int>(idx);
    }
    return c;
}

}  // namespace

int matchable_pair_count(const Matrix& x_scaled, const std::vector<int>& t, double h) {
    const int n = static_cast<int>(x_scaled.rows());
    std::map<std::vector<int>, std::pair<bool, bool>> cells;  // has treated / has control
    for (int i = 0; i < n; ++i) {
        auto& [has_t, has_c] = cells[cell_coords(x_scaled, i, h)];
        (t[i] == 1 ? has_t : has_c) = true;
    }
    int count = 0;
    for (const auto& [coords, arms] : cells) count += arms.first && arms.second;
    return count;
}

double pair_maximizing_side_length(const Matrix& x_scaled, const std::vector<int>& t,
                                   double h_base) {
    double best_h = std::min(h_base, 1.0);
    int best_m = -1;
    for (int j = 0; j <= 8; ++j) {
        const double h = std::min(1.0, h_base * std::pow(2.0, -0.5 * j));
        const int m = matchable_pair_count(x_scaled, t, h);
        if (m >= best_m) {  // ties go to the smaller h
            best_m = m;
            best_h = h;
        }
        if (m == 0 && j > 0) break;  // cells have emptied out; no point going finer
    }
    return best_h;
}

MatchedPairSet partition_and_match(const Matrix& x_scaled, const std::vector<int>& t, double h,
                                   Rng& rng) {
    const int n = static_cast<int>(x_scaled.rows());
    if (static_cast<int>(t.size()) != n)
        fail(Err::DimensionMismatch, "partition_and_match: t length mismatch");
    if (!(h > 0.0 && h <= 1.0)) fail(Err::ConfigInvalid, "partition_and_match: h must be in (0,1]");
    if (x_scaled.size() > 0 && (x_scaled.minCoeff() < -1e-12 || x_scaled.maxCoeff() > 1.0 + 1e-12))
        fail(Err::ConfigInvalid, "partition_and_match: coordinates must lie in [0,1]");

    struct Cell {
        std::vector<int> treated, control;
    };
    // std::map keeps cell visitation order deterministic for the rng draws.
    std::map<std::vector<int>, Cell> cells;
    for (int i = 0; i < n; ++i) {
        Cell& cell = cells[cell_coords(x_scaled, i, h)];
        (t[i] == 1 ? cell.treated : cell.control).push_back(i);
    }

    MatchedPairSet out;
    out.h = h;
    long cell_id = 0;
    for (const auto& [coords, cell] : cells) {
        if (cell.treated.empty() || cell.control.empty()) {
            ++out.skipped_cells;
            ++cell_id;
            continue;
        }
        const int mi = cell.treated[rng.uniform_int(static_cast<int>(cell.treated.size()))];
        const int mj = cell.control[rng.uniform_int(static_cast<int>(cell.control.size()))];
        out.pairs.push_back({mi, mj, cell_id});
        ++cell_id;
    }
    if (out.pairs.empty()) fail(Err::NoPairs, "partition_and_match: no cell holds both arms");
    return out;
}

MatchedPairSet adaptive_match(const Matrix& x_scaled, const std::vector<int>& t, double h0,
                              int m_min, Rng& rng) {
    if (m_min < 1) fail(Err::ConfigInvalid, "adaptive_match: m_min must be >= 1");
    double h = std::min(h0, 1.0);
    for (;;) {
        try {
            MatchedPairSet set = partition_and_match(x_scaled, t, h, rng);
            if (set.m() >= m_min || h >= 1.0) return set;
        } catch (const Error& e) {
            if (e.code() != Err::NoPairs || h >= 1.0) throw;
        }
        h = std::min(2.0 * h, 1.0);
    }
}

}  // namespace jmacate
