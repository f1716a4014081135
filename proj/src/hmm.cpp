#include "regimevol/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "regimevol/rng.hpp"

namespace regimevol::hmm {

namespace {

constexpr double kVarianceFloor = 1e-8;
constexpr double kDensityFloor = 1e-300;

double gauss_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * 3.14159265358979323846 * var);
}

// Emission matrix B(t,k), floored to keep the scaled recursion away from zero rows.
Eigen::MatrixXd emissions(const Eigen::VectorXd& y, const GaussianHMM& m) {
    Eigen::MatrixXd b(y.size(), m.k);
    for (Eigen::Index t = 0; t < y.size(); ++t) {
        for (int k = 0; k < m.k; ++k) {
            b(t, k) = std::max(gauss_pdf(y(t), m.mean(k), m.variance(k)), kDensityFloor);
        }
    }
    return b;
}

struct ForwardBackward {
    Eigen::MatrixXd alpha;  // scaled
    Eigen::MatrixXd beta;   // scaled
    Eigen::VectorXd norm;   // per-step normalizers
    double log_likelihood = 0.0;
};

ForwardBackward forward_backward(const Eigen::MatrixXd& b, const GaussianHMM& m) {
    const Eigen::Index T = b.rows();
    const int K = m.k;
    ForwardBackward fb;
    fb.alpha.resize(T, K);
    fb.beta.resize(T, K);
    fb.norm.resize(T);

    fb.alpha.row(0) = m.initial.transpose().cwiseProduct(b.row(0));
    fb.norm(0) = fb.alpha.row(0).sum();
    fb.alpha.row(0) /= fb.norm(0);
    for (Eigen::Index t = 1; t < T; ++t) {
        fb.alpha.row(t) = (fb.alpha.row(t - 1) * m.transition).cwiseProduct(b.row(t));
        fb.norm(t) = fb.alpha.row(t).sum();
        if (!(fb.norm(t) > 0.0)) {
            throw std::runtime_error("hmm: forward recursion underflow");
        }
        fb.alpha.row(t) /= fb.norm(t);
    }
    fb.beta.row(T - 1).setOnes();
    for (Eigen::Index t = T - 2; t >= 0; --t) {
        fb.beta.row(t) =
            (m.transition * b.row(t + 1).transpose().cwiseProduct(fb.beta.row(t + 1).transpose()))
                .transpose() /
            fb.norm(t + 1);
    }
    fb.log_likelihood = fb.norm.array().log().sum();
    return fb;
}

Eigen::MatrixXd posteriors(const ForwardBackward& fb) {
    Eigen::MatrixXd gamma = fb.alpha.cwiseProduct(fb.beta);
    for (Eigen::Index t = 0; t < gamma.rows(); ++t) {
        gamma.row(t) /= gamma.row(t).sum();
    }
    return gamma;
}

double quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

GaussianHMM initial_model(const Eigen::VectorXd& y, int k) {
    GaussianHMM m;
    m.k = k;
    std::vector<double> sorted(y.data(), y.data() + y.size());
    std::sort(sorted.begin(), sorted.end());
    m.mean.resize(k);
    for (int i = 0; i < k; ++i) {
        m.mean(i) = quantile(sorted, (i + 1.0) / (k + 1.0));
    }
    const double mean = y.mean();
    double var = (y.array() - mean).square().mean();
    var = std::max(var, kVarianceFloor);
    m.variance = Eigen::VectorXd::Constant(k, var);
    m.initial = Eigen::VectorXd::Constant(k, 1.0 / k);
    if (k == 1) {
        m.transition = Eigen::MatrixXd::Ones(1, 1);
    } else {
        m.transition = Eigen::MatrixXd::Constant(k, k, 0.1 / (k - 1));
        m.transition.diagonal().setConstant(0.9);
    }
    return m;
}

// Sort regimes by ascending mean so labels are comparable across refits.
void sort_by_mean(GaussianHMM& m, Eigen::MatrixXd& gamma) {
    std::vector<int> order(static_cast<std::size_t>(m.k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return m.mean(a) < m.mean(b); });
    GaussianHMM s = m;
    Eigen::MatrixXd g = gamma;
    for (int i = 0; i < m.k; ++i) {
        s.mean(i) = m.mean(order[i]);
        s.variance(i) = m.variance(order[i]);
        s.initial(i) = m.initial(order[i]);
        g.col(i) = gamma.col(order[i]);
        for (int j = 0; j < m.k; ++j) {
            s.transition(i, j) = m.transition(order[i], order[j]);
        }
    }
    m = std::move(s);
    gamma = std::move(g);
}

}  // namespace

std::vector<double> smooth(const std::vector<double>& y, int window) {
    if (y.empty()) {
        throw std::invalid_argument("smooth: empty series");
    }
    if (static_cast<int>(y.size()) < window) {
        throw std::invalid_argument("smooth: series shorter than window");
    }
    std::vector<double> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        const std::size_t start = t + 1 >= static_cast<std::size_t>(window)
                                      ? t + 1 - static_cast<std::size_t>(window)
                                      : 0;
        double s = 0.0;
        for (std::size_t i = start; i <= t; ++i) s += y[i];
        out[t] = s / static_cast<double>(t - start + 1);
    }
    return out;
}

Eigen::VectorXd smooth(const Eigen::VectorXd& y, int window) {
    std::vector<double> v(y.data(), y.data() + y.size());
    const auto s = smooth(v, window);
    return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

std::pair<GaussianHMM, PosteriorTrack> fit(const Eigen::VectorXd& smoothed, int k,
                                           const FitOptions& options, std::uint64_t seed) {
    if (k < 1) {
        throw std::invalid_argument("hmm::fit: k must be >= 1");
    }
    if (smoothed.size() < 10L * k) {
        throw std::invalid_argument("hmm::fit: need at least 10*k observations, got " +
                                    std::to_string(smoothed.size()));
    }
    GaussianHMM m = initial_model(smoothed, k);
    std::mt19937_64 rng(seed);

    PosteriorTrack track;
    double prev_ll = -std::numeric_limits<double>::infinity();
    bool reseed_used = false;
    Eigen::MatrixXd gamma;
    const Eigen::Index T = smoothed.size();

    for (int iter = 0; iter < options.max_iter; ++iter) {
        const Eigen::MatrixXd b = emissions(smoothed, m);
        const ForwardBackward fb = forward_backward(b, m);
        gamma = posteriors(fb);

        // Monotonicity is a structural EM property; a violation (beyond slack,
        // outside a re-seed) means the update is wrong.
        if (std::isfinite(prev_ll) &&
            fb.log_likelihood < prev_ll - 1e-9 * (1.0 + std::abs(prev_ll))) {
            throw std::logic_error("hmm::fit: EM log-likelihood decreased");
        }
        const bool converged =
            std::isfinite(prev_ll) &&
            (fb.log_likelihood - prev_ll) < options.tol * (1.0 + std::abs(prev_ll));
        prev_ll = fb.log_likelihood;
        track.log_likelihood = fb.log_likelihood;
        track.iterations = iter + 1;
        if (converged) break;

        // M-step
        Eigen::VectorXd occupancy = gamma.colwise().sum().transpose();
        bool collapsed = false;
        GaussianHMM next = m;
        next.initial = gamma.row(0).transpose();
        if (k > 1) {
            Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(k, k);
            for (Eigen::Index t = 0; t + 1 < T; ++t) {
                // xi(i,j) proportional to alpha_t(i) T_ij b_{t+1}(j) beta_{t+1}(j)
                Eigen::MatrixXd xi =
                    (fb.alpha.row(t).transpose() *
                     b.row(t + 1).cwiseProduct(fb.beta.row(t + 1)))
                        .cwiseProduct(m.transition) /
                    fb.norm(t + 1);
                xi_sum += xi;
            }
            for (int i = 0; i < k; ++i) {
                const double rowsum = xi_sum.row(i).sum();
                if (rowsum > 0.0) {
                    next.transition.row(i) = xi_sum.row(i) / rowsum;
                }
            }
        }
        for (int j = 0; j < k; ++j) {
            const double nk = occupancy(j);
            if (!(nk > 0.0)) {
                collapsed = true;
                break;
            }
            const double mu = gamma.col(j).dot(smoothed) / nk;
            const double var = (gamma.col(j).array() * (smoothed.array() - mu).square()).sum() / nk;
            next.mean(j) = mu;
            next.variance(j) = var;
            if (var < kVarianceFloor) collapsed = true;
        }
        if (collapsed) {
            if (reseed_used) {
                throw std::runtime_error("hmm::fit: regime variance collapsed twice");
            }
            reseed_used = true;
            track.reseeded = true;
            // re-seed collapsed regimes around jittered quantiles, reset baseline
            const double sd = std::sqrt(std::max(
                (smoothed.array() - smoothed.mean()).square().mean(), kVarianceFloor));
            for (int j = 0; j < k; ++j) {
                if (!(occupancy(j) > 0.0) || next.variance(j) < kVarianceFloor) {
                    next.mean(j) = m.mean(j) + 0.5 * sd * normal01(rng);
                    next.variance(j) = std::max(sd * sd, kVarianceFloor);
                }
            }
            prev_ll = -std::numeric_limits<double>::infinity();
        }
        m = std::move(next);
    }

    sort_by_mean(m, gamma);
    track.gamma = std::move(gamma);
    return {std::move(m), std::move(track)};
}

Eigen::VectorXd propagate(const Eigen::VectorXd& gamma_last, const Eigen::MatrixXd& transition,
                          int horizon) {
    if (horizon < 0) {
        throw std::invalid_argument("hmm::propagate: negative horizon");
    }
    Eigen::RowVectorXd p = gamma_last.transpose();
    for (int i = 0; i < horizon; ++i) {
        p = p * transition;
    }
    return p.transpose();
}

}  // namespace regimevol::hmm
