#pragma once

#include "jmacate/rng.hpp"
#include "jmacate/types.hpp"

#include <vector>

namespace jmacate {

// Affine map of the selected matching covariates onto [0,1] per dimension.
struct CubeTransform {
    std::vector<int> dims;  // raw covariate indices used for matching
    Vector lo, hi;          // per selected dimension

    // n x dims.size() matrix of scaled coordinates
    Matrix apply(const Matrix& x) const;
    Vector apply_row(const Vector& u_raw) const;
    Vector invert_row(const Vector& u_scaled) const;
};

CubeTransform fit_cube_transform(const Matrix& x, const std::vector<int>& dims);

// h = (log n / n)^(1/p_match), clamped to (0, 1].
double default_side_length(double n, int p_match);

// Pair count at side h: cells holding at least one observation of each arm.
// No rng involved; the count is a property of the lattice alone.
int matchable_pair_count(const Matrix& x_scaled, const std::vector<int>& t, double h);

// Data-adaptive side length: walks a short dyadic ladder downward from h_base
// and returns the h with the most matchable pairs (ties to the smaller h,
// which carries less matching bias). Concentrated covariates leave the base
// rule's cells oversized; one pair per cell makes the surplus pure waste.
double pair_maximizing_side_length(const Matrix& x_scaled, const std::vector<int>& t,
                                   double h_base);

struct MatchedPair {
    int treated;
    int control;
    long cell_id;
};

struct MatchedPairSet {
    std::vector<MatchedPair> pairs;
    double h = 0.0;
    int skipped_cells = 0;  // nonempty cells lacking one arm

    int m() const { return static_cast<int>(pairs.size()); }
};

// One uniformly random treated/control pair per cell holding at least one of
// each arm. Cells are lattice cubes of side h; the upper boundary u = 1 folds
// into the last cell. Deterministic given the rng state. Errors: NoPairs.
MatchedPairSet partition_and_match(const Matrix& x_scaled, const std::vector<int>& t, double h,
                                   Rng& rng);

// Doubles h (capped at 1) until at least m_min pairs are found; returns the
// h = 1 matching if nothing smaller suffices. Errors: NoPairs even at h = 1.
MatchedPairSet adaptive_match(const Matrix& x_scaled, const std::vector<int>& t, double h0,
                              int m_min, Rng& rng);

}  // namespace jmacate
