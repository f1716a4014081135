#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "regimevol/linmod.hpp"
#include "regimevol/segment.hpp"

namespace regimevol::coefcluster {

struct SegmentCoefficients {
    Eigen::VectorXd theta;  // intercept + regressors, normalized units
    bool ridge_fallback = false;
};

// Per-segment OLS on the given design; rank-deficient segments fall back to
// ridge with the shared lambda.
std::vector<SegmentCoefficients> segment_coefficients(const Eigen::MatrixXd& x,
                                                      const Eigen::VectorXd& y,
                                                      const segment::SegmentSet& segments);

struct PCAProjection {
    Eigen::MatrixXd components;       // retained x dim, orthonormal rows
    Eigen::VectorXd explained_ratio;  // nonincreasing, sums to <= 1
    Eigen::VectorXd mean;
    int retained = 0;
};

PCAProjection pca_fit(const std::vector<SegmentCoefficients>& thetas, double var_threshold = 0.90);
Eigen::MatrixXd pca_apply(const PCAProjection& p, const std::vector<SegmentCoefficients>& thetas);
Eigen::VectorXd pca_apply(const PCAProjection& p, const Eigen::VectorXd& theta);
Eigen::VectorXd pca_back_project(const PCAProjection& p, const Eigen::VectorXd& z);

// Finite variational Bayesian Gaussian mixture (symmetric Dirichlet weight
// prior with concentration 1/K, Normal-Wishart priors on means/precisions).
class BayesGMM {
public:
    struct Options {
        int max_iter = 500;
        double tol = 1e-8;       // relative ELBO improvement
        double drop_weight = 1e-3;  // components below this are pruned
    };

    static BayesGMM fit(const Eigen::MatrixXd& points, int k_max, std::uint64_t seed,
                        const Options& options = {});

    // Posterior membership probabilities over the surviving components; rows sum to 1.
    Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& points) const;

    int effective_components() const { return static_cast<int>(weights_.size()); }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::MatrixXd& means() const { return means_; }  // one row per component
    double elbo() const { return elbo_; }
    bool converged() const { return converged_; }

private:
    // variational posterior parameters of the surviving components
    Eigen::VectorXd alpha_;
    Eigen::VectorXd beta_;
    Eigen::VectorXd nu_;
    Eigen::MatrixXd means_;
    std::vector<Eigen::MatrixXd> scatter_;  // W_k
    Eigen::VectorXd weights_;
    double alpha_sum_ = 0.0;
    double elbo_ = 0.0;
    bool converged_ = false;
    int dim_ = 0;
};

// Each time point inherits its segment's responsibility row.
Eigen::MatrixXd regime_weights(const segment::SegmentSet& segments,
                               const Eigen::MatrixXd& responsibilities);

}  // namespace regimevol::coefcluster
