#pragma once

#include "jmacate/jma.hpp"

#include <vector>

namespace jmacate {

// Score models with an exact zero-residual arm win selection outright; their
// score is pinned to this sentinel instead of -inf so smoothing stays finite.
inline constexpr double kZeroResidualSentinel = -1e300;

struct ModelScore {
    double aic = 0.0;
    double bic = 0.0;
    bool zero_residual = false;
};

// Two-arm Gaussian information criteria: per arm a,
//   l_a = -(n_a/2) (log(2 pi rss_a / n_a) + 1)
//   aic = sum_a [-2 l_a + 2 (p_k + 1)],  bic = sum_a [-2 l_a + log(n_a) (p_k + 1)].
ModelScore information_scores(const ModelFit& model);
ModelScore information_scores(const Dataset& data, const CandidateSpec& spec);

struct ScoreTable {
    std::vector<double> aic, bic, tecv;
    std::vector<bool> zero_residual;
};

ScoreTable score_table(const FittedModels& fitted, const JackknifeSystem& sys);

// w_k proportional to exp(-(score_k - min score) / 2).
WeightVector smoothed_weights(const std::vector<double>& scores);

// argmin with ties broken by smallest index
int select_min(const std::vector<double>& scores);

// argmin_k ||delta_tilde_k - y_tilde||^2
int tecv_select(const JackknifeSystem& sys);

}  // namespace jmacate
