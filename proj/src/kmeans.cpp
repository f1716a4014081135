#include "regimevol/kmeans.hpp"

#include <limits>
#include <stdexcept>

#include "regimevol/rng.hpp"

namespace regimevol::kmeans {

namespace {

// k-means++: first centroid uniform, then proportional to squared distance.
Eigen::MatrixXd plusplus_init(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd centroids(k, x.cols());
    centroids.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
    Eigen::VectorXd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double r = uniform01(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= r) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        }
        centroids.row(c) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
    return centroids;
}

void canonicalize(std::vector<int>& labels, Eigen::MatrixXd& centroids) {
    std::vector<int> remap(static_cast<std::size_t>(centroids.rows()), -1);
    int next = 0;
    for (int& l : labels) {
        if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
    }
    // clusters that captured no point keep their slot at the end
    for (auto& r : remap) {
        if (r < 0) r = next++;
    }
    Eigen::MatrixXd reordered(centroids.rows(), centroids.cols());
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        reordered.row(remap[static_cast<std::size_t>(c)]) = centroids.row(c);
    }
    centroids = std::move(reordered);
    for (int& l : labels) l = remap[static_cast<std::size_t>(l)];
}

}  // namespace

Result run(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts, int max_iter) {
    const Eigen::Index n = points.rows();
    if (k < 1) {
        throw std::invalid_argument("kmeans: k must be >= 1");
    }
    if (n < k) {
        throw std::invalid_argument("kmeans: fewer points than clusters");
    }
    std::mt19937_64 rng(seed);
    Result best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int r = 0; r < restarts; ++r) {
        Eigen::MatrixXd centroids = plusplus_init(points, k, rng);
        std::vector<int> labels(static_cast<std::size_t>(n), 0);
        for (int iter = 0; iter < max_iter; ++iter) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                int arg = 0;
                double bestd = (points.row(i) - centroids.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d = (points.row(i) - centroids.row(c)).squaredNorm();
                    if (d < bestd) {
                        bestd = d;
                        arg = c;
                    }
                }
                if (labels[static_cast<std::size_t>(i)] != arg) {
                    labels[static_cast<std::size_t>(i)] = arg;
                    changed = true;
                }
            }
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
                counts(labels[static_cast<std::size_t>(i)]) += 1.0;
            }
            for (int c = 0; c < k; ++c) {
                if (counts(c) > 0.0) centroids.row(c) = sums.row(c) / counts(c);
            }
            if (!changed && iter > 0) break;
        }
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = std::move(labels);
            best.centroids = std::move(centroids);
        }
    }
    canonicalize(best.labels, best.centroids);
    return best;
}

}  // namespace regimevol::kmeans
