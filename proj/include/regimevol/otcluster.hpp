#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "regimevol/segment.hpp"

namespace regimevol::otcluster {

// Empirical distribution of one segment: rows are joint (features, target)
// points with uniform weights.
struct SegmentDistribution {
    Eigen::MatrixXd points;
};

// Exact squared 2-Wasserstein distance between two uniform empirical measures
// (squared Euclidean ground cost), solved as a min-cost transportation
// problem. Segments larger than `cap` are deterministically strided down.
double w2_squared(const SegmentDistribution& a, const SegmentDistribution& b,
                  std::size_t cap = 200);

struct DistanceMatrix {
    Eigen::MatrixXd w2sq;  // symmetric, zero diagonal
};

DistanceMatrix pairwise_w2sq(const std::vector<SegmentDistribution>& segments,
                             std::size_t cap = 200, int threads = 1);

struct KernelMatrix {
    Eigen::MatrixXd k;   // unit diagonal, entries in (0,1]
    double sigma = 0.0;
    bool degenerate = false;  // all distances zero: caller should use one cluster
};

// K_ij = exp(-W2sq_ij / (2 sigma^2)); sigma <= 0 selects the median of the
// off-diagonal root distances.
KernelMatrix kernelize(const DistanceMatrix& distances, double sigma = 0.0);

// Normalized symmetric Laplacian + k smallest eigenvectors + row-normalized
// k-means. Labels are 0-based and canonicalized by first occurrence.
std::vector<int> spectral_cluster(const KernelMatrix& kernel, int k, std::uint64_t seed);

// Every time point inherits its segment's label.
std::vector<int> project_labels(const segment::SegmentSet& segments, const std::vector<int>& labels);

void dump_matrix(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace regimevol::otcluster
