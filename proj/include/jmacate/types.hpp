#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmacate {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Err {
    RankDeficient,
    Underdetermined,
    DimensionMismatch,
    LeverageOne,
    DowndateRankLoss,
    DegenerateDimension,
    NoPairs,
    IndexOutOfRange,
    ZeroResidual,
    CalibrationFailed,
    ConfigInvalid,
    CsvInvalid,
    NormalizerZero,
    MaxIterationsExceeded,
};

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Err code() const { return code_; }

private:
    Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

// Observational unit for everything downstream: raw covariates, 0/1 treatment,
// response. Rows are observations.
struct Dataset {
    Matrix x;               // n x p raw covariates
    std::vector<int> t;     // 1 = treated, 0 = control
    Vector y;               // response

    int n() const { return static_cast<int>(x.rows()); }
    int p() const { return static_cast<int>(x.cols()); }

    void validate() const {
        if (static_cast<int>(t.size()) != n() || y.size() != n())
            fail(Err::DimensionMismatch, "dataset: x, t, y row counts disagree");
        for (int v : t)
            if (v != 0 && v != 1) fail(Err::ConfigInvalid, "dataset: treatment values must be 0/1");
    }
};

}  // namespace jmacate
