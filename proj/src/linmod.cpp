#include "regimevol/linmod.hpp"

#include <cmath>
#include <limits>

namespace regimevol::linmod {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a(x.rows(), x.cols() + 1);
    a.col(0).setOnes();
    a.rightCols(x.cols()) = x;
    return a;
}

// Least squares through one orthogonal factorization; doubles as the rank check.
Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                                const std::string& who) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(sv.size() - 1) > kRankTolerance * sv(0))) {
        throw SingularMatrixError(who + ": design matrix is rank deficient");
    }
    return svd.solve(rhs);
}

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& who) {
    if (x.rows() != y.size()) {
        throw std::invalid_argument(who + ": X has " + std::to_string(x.rows()) +
                                    " rows but y has " + std::to_string(y.size()));
    }
    if (x.rows() < x.cols() + 1) {
        throw std::invalid_argument(who + ": need at least " + std::to_string(x.cols() + 1) +
                                    " observations for " + std::to_string(x.cols()) + " regressors");
    }
}

}  // namespace

LinearFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    check_shapes(x, y, "ols");
    const Eigen::MatrixXd a = with_intercept(x);
    LinearFit fit;
    fit.coef = solve_full_rank(a, y, "ols");
    fit.residuals = y - a * fit.coef;
    fit.method = FitMethod::Ols;
    return fit;
}

LinearFit wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
    check_shapes(x, y, "wls");
    if (weights.size() != y.size()) {
        throw std::invalid_argument("wls: weight count does not match observation count");
    }
    if ((weights.array() < 0.0).any()) {
        throw std::invalid_argument("wls: negative weight");
    }
    if (!(weights.sum() > 0.0)) {
        throw std::invalid_argument("wls: all weights zero");
    }
    const Eigen::VectorXd sw = weights.array().sqrt();
    const Eigen::MatrixXd a = sw.asDiagonal() * with_intercept(x);
    const Eigen::VectorXd rhs = sw.asDiagonal() * y;
    LinearFit fit;
    fit.coef = solve_full_rank(a, rhs, "wls");
    fit.residuals = y - with_intercept(x) * fit.coef;
    fit.method = FitMethod::Wls;
    return fit;
}

LinearFit ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    check_shapes(x, y, "ridge");
    if (lambda < 0.0) {
        throw std::invalid_argument("ridge: negative penalty");
    }
    if (lambda == 0.0) {
        LinearFit fit = ols(x, y);
        fit.method = FitMethod::Ridge;
        return fit;
    }
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    // Augmented system [A; sqrt(lambda) J] with J skipping the intercept column.
    Eigen::MatrixXd a(n + p, p + 1);
    a.topRows(n) = with_intercept(x);
    a.bottomRows(p).setZero();
    a.bottomRightCorner(p, p) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
    rhs.head(n) = y;
    LinearFit fit;
    fit.coef = solve_full_rank(a, rhs, "ridge");
    fit.residuals = y - with_intercept(x) * fit.coef;
    fit.method = FitMethod::Ridge;
    fit.ridge_lambda = lambda;
    return fit;
}

Diagnostics diagnose(const LinearFit& fit, const Eigen::MatrixXd& x) {
    const Eigen::Index n = fit.residuals.size();
    if (n < 8) {
        throw std::invalid_argument("diagnose: need at least 8 residuals");
    }
    Diagnostics d;
    const Eigen::VectorXd& r = fit.residuals;
    const double m1 = r.mean();
    const Eigen::ArrayXd c = r.array() - m1;
    const double m2 = c.square().mean();
    if (!(m2 > 1e-24)) {
        d.degenerate = true;
        return d;
    }
    const double m3 = c.cube().mean();
    const double m4 = c.square().square().mean();
    d.skewness = m3 / std::pow(m2, 1.5);
    d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    d.jarque_bera = static_cast<double>(n) / 6.0 *
                    (d.skewness * d.skewness + d.excess_kurtosis * d.excess_kurtosis / 4.0);
    d.jarque_bera_pvalue = std::exp(-d.jarque_bera / 2.0);  // chi^2(2) survival
    double num = 0.0;
    for (Eigen::Index t = 1; t < n; ++t) {
        const double diff = r(t) - r(t - 1);
        num += diff * diff;
    }
    d.durbin_watson = num / r.squaredNorm();
    // condition number of the column-standardized design
    Eigen::MatrixXd z = x;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mean = z.col(j).mean();
        const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
        if (sd > 0.0) {
            z.col(j) = (z.col(j).array() - mean) / sd;
        } else {
            z.col(j).setZero();
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(z);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(sv.size() - 1) > 0.0)) {
        d.condition_number = std::numeric_limits<double>::infinity();
    } else {
        d.condition_number = sv(0) / sv(sv.size() - 1);
    }
    return d;
}

}  // namespace regimevol::linmod
