#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace regimevol::kmeans {

struct Result {
    std::vector<int> labels;     // 0-based, canonicalized by first occurrence
    Eigen::MatrixXd centroids;   // k x d
    double inertia = 0.0;        // within-cluster sum of squares
};

// Lloyd's algorithm with k-means++ seeding and `restarts` independent runs;
// the run with the lowest inertia wins (first on ties). Deterministic given seed.
Result run(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
           int max_iter = 100);

}  // namespace regimevol::kmeans
