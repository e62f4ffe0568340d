#pragma once

#include "jmacate/types.hpp"

#include <string>
#include <vector>

namespace jmacate {

// One basis term: a covariate raised to power 1 or 2, or a pairwise
// interaction when var_b >= 0. Indices are 0-based.
struct Term {
    int var_a = 0;
    int var_b = -1;
    int power = 1;

    bool is_interaction() const { return var_b >= 0; }
    bool operator==(const Term& o) const {
        return var_a == o.var_a && var_b == o.var_b && power == o.power;
    }
};

inline Term lin(int i) { return Term{i, -1, 1}; }
inline Term sq(int i) { return Term{i, -1, 2}; }
inline Term inter(int i, int j) { return Term{i, j, 1}; }

// A candidate model: the basis columns used for both arms. The intercept is an
// ordinary column (leading, when present), not implicit.
struct CandidateSpec {
    int id = 0;
    bool intercept = true;
    std::vector<Term> terms;

    int width() const { return static_cast<int>(terms.size()) + (intercept ? 1 : 0); }
    void validate(int p_raw) const;
};

// Expand raw covariates into the candidate's basis, intercept first then
// terms in listed order. Errors: IndexOutOfRange.
Vector expand_basis(const CandidateSpec& spec, const Vector& u_raw);

// Design matrix for the given rows of x.
Matrix build_design(const CandidateSpec& spec, const Matrix& x, const std::vector<int>& rows);

// Covariates referenced by any spec (sorted, unique); the default matching space.
std::vector<int> raw_covariates_used(const std::vector<CandidateSpec>& specs);

// JSON list-of-specs format used by the CLI:
//   [ {"intercept": true, "terms": [{"var": 1, "pow": 2}, {"inter": [1, 2]}]}, ... ]
// "var"/"inter" indices are 1-based (columns u1..up).
std::vector<CandidateSpec> candidates_from_json_text(const std::string& text);
std::vector<CandidateSpec> candidates_from_json_file(const std::string& path);

}  // namespace jmacate
