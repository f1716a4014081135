#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace regimevol::hmm {

struct GaussianHMM {
    int k = 1;
    Eigen::VectorXd mean;        // ascending after fit (regime 0 is the calm one)
    Eigen::VectorXd variance;    // > 0
    Eigen::MatrixXd transition;  // k x k, row-stochastic
    Eigen::VectorXd initial;     // sums to 1
};

struct PosteriorTrack {
    Eigen::MatrixXd gamma;  // T x k, rows sum to 1
    double log_likelihood = 0.0;
    int iterations = 0;
    bool reseeded = false;  // a regime variance collapsed and was re-seeded once
};

struct FitOptions {
    int max_iter = 200;
    double tol = 1e-6;  // relative log-likelihood improvement
};

// Trailing 5-day moving average; the first window-1 points use the expanding
// mean of the available prefix.
std::vector<double> smooth(const std::vector<double>& y, int window = 5);
Eigen::VectorXd smooth(const Eigen::VectorXd& y, int window = 5);

// Baum-Welch EM with per-step scaled forward-backward. Deterministic
// quantile-based initialization; `seed` only drives the jitter applied if a
// regime variance collapses and has to be re-seeded.
std::pair<GaussianHMM, PosteriorTrack> fit(const Eigen::VectorXd& smoothed, int k,
                                           const FitOptions& options, std::uint64_t seed);

// p_{t+h} = gamma_T * T^h.
Eigen::VectorXd propagate(const Eigen::VectorXd& gamma_last, const Eigen::MatrixXd& transition,
                          int horizon);

}  // namespace regimevol::hmm
