#include "jmacate/candidates.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace jmacate {

void CandidateSpec::validate(int p_raw) const {
    if (width() < 1) fail(Err::ConfigInvalid, "candidate spec has no basis columns");
    for (size_t a = 0; a < terms.size(); ++a) {
        const Term& t = terms[a];
        if (t.var_a < 0 || t.var_a >= p_raw ||
            (t.is_interaction() && (t.var_b < 0 || t.var_b >= p_raw)))
            fail(Err::IndexOutOfRange, "candidate spec references covariate beyond p");
        if (!t.is_interaction() && t.power != 1 && t.power != 2)
            fail(Err::ConfigInvalid, "term power must be 1 or 2");
        for (size_t b = a + 1; b < terms.size(); ++b)
            if (terms[b] == t) fail(Err::ConfigInvalid, "duplicate term in candidate spec");
    }
}

Vector expand_basis(const CandidateSpec& spec, const Vector& u_raw) {
    Vector out(spec.width());
    int pos = 0;
    if (spec.intercept) out(pos++) = 1.0;
    for (const Term& t : spec.terms) {
        if (t.var_a < 0 || t.var_a >= u_raw.size() ||
            (t.is_interaction() && t.var_b >= u_raw.size()))
            fail(Err::IndexOutOfRange, "expand_basis: covariate index out of range");
        if (t.is_interaction())
            out(pos++) = u_raw(t.var_a) * u_raw(t.var_b);
        else if (t.power == 2)
            out(pos++) = u_raw(t.var_a) * u_raw(t.var_a);
        else
            out(pos++) = u_raw(t.var_a);
    }
    return out;
}

Matrix build_design(const CandidateSpec& spec, const Matrix& x, const std::vector<int>& rows) {
    Matrix d(static_cast<int>(rows.size()), spec.width());
    for (size_t r = 0; r < rows.size(); ++r)
        d.row(static_cast<int>(r)) = expand_basis(spec, x.row(rows[r]).transpose()).transpose();
    return d;
}

std::vector<int> raw_covariates_used(const std::vector<CandidateSpec>& specs) {
    std::set<int> used;
    for (const auto& s : specs)
        for (const Term& t : s.terms) {
            used.insert(t.var_a);
            if (t.is_interaction()) used.insert(t.var_b);
        }
    return {used.begin(), used.end()};
}

namespace {

CandidateSpec spec_from_json(const nlohmann::json& j, int id) {
    if (!j.is_object()) fail(Err::ConfigInvalid, "candidate spec must be a JSON object");
    CandidateSpec spec;
    spec.id = id;
    spec.intercept = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "intercept") {
            spec.intercept = it.value().get<bool>();
        } else if (it.key() == "terms") {
            for (const auto& tj : it.value()) {
                Term t;
                if (tj.contains("inter")) {
                    auto pair = tj.at("inter");
                    if (!pair.is_array() || pair.size() != 2)
                        fail(Err::ConfigInvalid, "\"inter\" must be a two-element array");
                    t.var_a = pair[0].get<int>() - 1;
                    t.var_b = pair[1].get<int>() - 1;
                } else if (tj.contains("var")) {
                    t.var_a = tj.at("var").get<int>() - 1;
                    t.power = tj.value("pow", 1);
                } else {
                    fail(Err::ConfigInvalid, "term must carry \"var\" or \"inter\"");
                }
                if (t.var_a < 0 || (t.is_interaction() && t.var_b < 0))
                    fail(Err::ConfigInvalid, "covariate indices in candidate files are 1-based");
                spec.terms.push_back(t);
            }
        } else {
            fail(Err::ConfigInvalid, "unknown key \"" + it.key() + "\" in candidate spec");
        }
    }
    return spec;
}

}  // namespace

std::vector<CandidateSpec> candidates_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(Err::ConfigInvalid, std::string("candidates JSON parse error: ") + e.what());
    }
    if (!j.is_array() || j.empty())
        fail(Err::ConfigInvalid, "candidates file must be a nonempty JSON array");
    std::vector<CandidateSpec> specs;
    for (size_t k = 0; k < j.size(); ++k) specs.push_back(spec_from_json(j[k], static_cast<int>(k)));
    return specs;
}

std::vector<CandidateSpec> candidates_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::ConfigInvalid, "cannot open candidates file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return candidates_from_json_text(ss.str());
}

}  // namespace jmacate
