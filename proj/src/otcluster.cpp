#include "regimevol/otcluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "regimevol/csv.hpp"
#include "regimevol/kmeans.hpp"
#include "regimevol/threads.hpp"

namespace regimevol::otcluster {

namespace {

Eigen::MatrixXd stride_subsample(const Eigen::MatrixXd& points, std::size_t cap) {
    const std::size_t n = static_cast<std::size_t>(points.rows());
    if (n <= cap) return points;
    const std::size_t stride = (n + cap - 1) / cap;
    const std::size_t kept = (n + stride - 1) / stride;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(kept), points.cols());
    for (std::size_t i = 0, r = 0; i < n; i += stride, ++r) {
        out.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

// Min-cost flow on the complete bipartite transportation graph by successive
// shortest paths with potentials. Masses are scaled to integers (each source
// supplies n units, each sink demands m units, one unit = 1/(m*n) mass), so
// the optimum is exact.
double transport_cost(const Eigen::MatrixXd& cost) {
    const int m = static_cast<int>(cost.rows());
    const int n = static_cast<int>(cost.cols());
    const int source = m + n;
    const int target = m + n + 1;
    const int nodes = m + n + 2;
    const long long unit_supply = n;  // per source
    const long long unit_demand = m;  // per sink
    const long long total = static_cast<long long>(m) * n;

    std::vector<long long> src_used(static_cast<std::size_t>(m), 0);
    std::vector<long long> sink_used(static_cast<std::size_t>(n), 0);
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(m, n);

    std::vector<double> potential(static_cast<std::size_t>(nodes), 0.0);
    std::vector<double> dist(static_cast<std::size_t>(nodes));
    std::vector<int> parent(static_cast<std::size_t>(nodes));
    std::vector<bool> done(static_cast<std::size_t>(nodes));
    const double inf = std::numeric_limits<double>::infinity();

    long long shipped = 0;
    while (shipped < total) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(done.begin(), done.end(), false);
        std::fill(parent.begin(), parent.end(), -1);
        dist[static_cast<std::size_t>(source)] = 0.0;

        // dense Dijkstra on reduced costs; the graph has O(m*n) arcs anyway
        for (int round = 0; round < nodes; ++round) {
            int u = -1;
            double best = inf;
            for (int v = 0; v < nodes; ++v) {
                if (!done[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < best) {
                    best = dist[static_cast<std::size_t>(v)];
                    u = v;
                }
            }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = true;
            const double du = dist[static_cast<std::size_t>(u)];
            auto relax = [&](int v, double edge_cost) {
                const double nd = du + edge_cost + potential[static_cast<std::size_t>(u)] -
                                  potential[static_cast<std::size_t>(v)];
                if (nd < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    parent[static_cast<std::size_t>(v)] = u;
                }
            };
            if (u == source) {
                for (int i = 0; i < m; ++i) {
                    if (src_used[static_cast<std::size_t>(i)] < unit_supply) relax(i, 0.0);
                }
            } else if (u < m) {
                for (int j = 0; j < n; ++j) relax(m + j, cost(u, j));
            } else if (u < m + n) {
                const int j = u - m;
                if (sink_used[static_cast<std::size_t>(j)] < unit_demand) relax(target, 0.0);
                for (int i = 0; i < m; ++i) {
                    if (flow(i, j) > 0.0) relax(i, -cost(i, j));
                }
            }
        }
        if (dist[static_cast<std::size_t>(target)] == inf) {
            throw std::logic_error("w2_squared: transportation problem infeasible");
        }
        for (int v = 0; v < nodes; ++v) {
            if (dist[static_cast<std::size_t>(v)] < inf) {
                potential[static_cast<std::size_t>(v)] += dist[static_cast<std::size_t>(v)];
            }
        }
        // bottleneck along the path
        long long push = total - shipped;
        for (int v = target; parent[static_cast<std::size_t>(v)] >= 0;
             v = parent[static_cast<std::size_t>(v)]) {
            const int u = parent[static_cast<std::size_t>(v)];
            long long cap;
            if (u == source) {
                cap = unit_supply - src_used[static_cast<std::size_t>(v)];
            } else if (v == target) {
                cap = unit_demand - sink_used[static_cast<std::size_t>(u - m)];
            } else if (u < m) {
                cap = total;  // forward bipartite arc is uncapacitated
            } else {
                cap = static_cast<long long>(flow(v, u - m));  // reverse arc
            }
            push = std::min(push, cap);
        }
        for (int v = target; parent[static_cast<std::size_t>(v)] >= 0;
             v = parent[static_cast<std::size_t>(v)]) {
            const int u = parent[static_cast<std::size_t>(v)];
            if (u == source) {
                src_used[static_cast<std::size_t>(v)] += push;
            } else if (v == target) {
                sink_used[static_cast<std::size_t>(u - m)] += push;
            } else if (u < m) {
                flow(u, v - m) += static_cast<double>(push);
            } else {
                flow(v, u - m) -= static_cast<double>(push);
            }
        }
        shipped += push;
    }
    return flow.cwiseProduct(cost).sum() / static_cast<double>(total);
}

}  // namespace

double w2_squared(const SegmentDistribution& a, const SegmentDistribution& b, std::size_t cap) {
    if (a.points.rows() == 0 || b.points.rows() == 0) {
        throw std::invalid_argument("w2_squared: empty segment");
    }
    if (a.points.cols() != b.points.cols()) {
        throw std::invalid_argument("w2_squared: dimension mismatch (" +
                                    std::to_string(a.points.cols()) + " vs " +
                                    std::to_string(b.points.cols()) + ")");
    }
    const Eigen::MatrixXd pa = stride_subsample(a.points, cap);
    const Eigen::MatrixXd pb = stride_subsample(b.points, cap);
    Eigen::MatrixXd cost(pa.rows(), pb.rows());
    for (Eigen::Index i = 0; i < pa.rows(); ++i) {
        for (Eigen::Index j = 0; j < pb.rows(); ++j) {
            cost(i, j) = (pa.row(i) - pb.row(j)).squaredNorm();
        }
    }
    return transport_cost(cost);
}

DistanceMatrix pairwise_w2sq(const std::vector<SegmentDistribution>& segments, std::size_t cap,
                             int threads) {
    const std::size_t s = segments.size();
    DistanceMatrix d;
    d.w2sq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i + 1; j < s; ++j) pairs.emplace_back(i, j);
    }
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const double w = w2_squared(segments[i], segments[j], cap);
        d.w2sq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
        d.w2sq(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
    });
    return d;
}

KernelMatrix kernelize(const DistanceMatrix& distances, double sigma) {
    const Eigen::Index s = distances.w2sq.rows();
    KernelMatrix out;
    if (sigma <= 0.0) {
        std::vector<double> offdiag;
        for (Eigen::Index i = 0; i < s; ++i) {
            for (Eigen::Index j = i + 1; j < s; ++j) {
                offdiag.push_back(std::sqrt(std::max(distances.w2sq(i, j), 0.0)));
            }
        }
        if (offdiag.empty()) {
            out.degenerate = true;
            out.k = Eigen::MatrixXd::Ones(s, s);
            return out;
        }
        std::sort(offdiag.begin(), offdiag.end());
        const std::size_t h = offdiag.size() / 2;
        sigma = offdiag.size() % 2 == 1 ? offdiag[h] : 0.5 * (offdiag[h - 1] + offdiag[h]);
        if (!(sigma > 0.0)) {
            out.degenerate = true;  // all segments identical in distribution
            out.k = Eigen::MatrixXd::Ones(s, s);
            return out;
        }
    }
    out.sigma = sigma;
    out.k = (-distances.w2sq.array() / (2.0 * sigma * sigma)).exp();
    out.k.diagonal().setOnes();
    return out;
}

std::vector<int> spectral_cluster(const KernelMatrix& kernel, int k, std::uint64_t seed) {
    const Eigen::Index s = kernel.k.rows();
    if (k < 1) {
        throw std::invalid_argument("spectral_cluster: k must be >= 1");
    }
    if (k > s) {
        throw std::invalid_argument("spectral_cluster: k = " + std::to_string(k) +
                                    " exceeds segment count " + std::to_string(s));
    }
    if (k == 1 || kernel.degenerate) {
        return std::vector<int>(static_cast<std::size_t>(s), 0);
    }
    const Eigen::VectorXd degree = kernel.k.rowwise().sum();
    if ((degree.array() <= 0.0).any()) {
        throw std::runtime_error("spectral_cluster: kernel has a zero-degree row");
    }
    const Eigen::VectorXd dinv = degree.array().rsqrt();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(s, s) -
                          dinv.asDiagonal() * kernel.k * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("spectral_cluster: eigendecomposition failed");
    }
    Eigen::MatrixXd u = eig.eigenvectors().leftCols(k);  // ascending eigenvalues
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double norm = u.row(i).norm();
        if (norm > 1e-300) u.row(i) /= norm;
    }
    return kmeans::run(u, k, seed).labels;
}

std::vector<int> project_labels(const segment::SegmentSet& segments, const std::vector<int>& labels) {
    if (labels.size() != segments.segments.size()) {
        throw std::invalid_argument("project_labels: need exactly one label per segment");
    }
    const std::size_t total = segments.segments.back().end;
    std::vector<int> out(total, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& s = segments.segments[i];
        for (std::size_t t = s.begin; t < s.end; ++t) out[t] = labels[i];
    }
    return out;
}

void dump_matrix(const Eigen::MatrixXd& m, const std::string& path) {
    csv::Writer w(path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(csv::format_double(m(i, j)));
        }
        w.row(row);
    }
    w.close();
}

}  // namespace regimevol::otcluster
