#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace regimevol::linmod {

// Raised on (effective) rank deficiency so callers can apply their fallback
// (ridge for per-segment fits, full-window OLS for sparse regimes).
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

enum class FitMethod { Ols, Wls, Ridge };

struct LinearFit {
    Eigen::VectorXd coef;       // [intercept, b_1..b_p]
    Eigen::VectorXd residuals;  // y - X b, one per observation
    FitMethod method = FitMethod::Ols;
    double ridge_lambda = 0.0;

    double predict(const Eigen::VectorXd& x) const {
        return coef(0) + coef.tail(coef.size() - 1).dot(x);
    }
};

// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-10;
// Ridge penalty used wherever the spec'd pipelines fall back from a singular OLS.
inline constexpr double kFallbackRidgeLambda = 1e-4;

LinearFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Minimizes sum_t w_t (y_t - x_t' b)^2. Weights must be nonnegative with a
// positive sum; rank deficiency on the weighted rows throws SingularMatrixError.
LinearFit wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

// Intercept unpenalized. lambda = 0 reduces to OLS (and then requires full rank).
LinearFit ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);

struct Diagnostics {
    double durbin_watson = 0.0;
    double jarque_bera = 0.0;
    double jarque_bera_pvalue = 1.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double condition_number = 1.0;
    bool degenerate = false;  // zero residual variance, statistics undefined
};

Diagnostics diagnose(const LinearFit& fit, const Eigen::MatrixXd& x);

}  // namespace regimevol::linmod
