#include "regimevol/coefcluster.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "regimevol/kmeans.hpp"

namespace regimevol::coefcluster {

namespace {

double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    return result;
}

// ln B(W, nu) of the Wishart normalizer, via ln|W| passed in.
double log_wishart_b(double logdet_w, double nu, int d) {
    double s = -(nu / 2.0) * logdet_w - (nu * d / 2.0) * std::numbers::ln2 -
               (d * (d - 1) / 4.0) * std::log(std::numbers::pi);
    for (int i = 1; i <= d; ++i) {
        s -= std::lgamma((nu + 1.0 - i) / 2.0);
    }
    return s;
}

}  // namespace

std::vector<SegmentCoefficients> segment_coefficients(const Eigen::MatrixXd& x,
                                                      const Eigen::VectorXd& y,
                                                      const segment::SegmentSet& segments) {
    if (segments.segments.empty() || segments.segments.back().end != static_cast<std::size_t>(x.rows())) {
        throw std::invalid_argument("segment_coefficients: segments do not cover the design rows");
    }
    std::vector<SegmentCoefficients> out;
    out.reserve(segments.segments.size());
    for (const auto& s : segments.segments) {
        const auto len = static_cast<Eigen::Index>(s.length());
        if (len < x.cols() + 2) {
            throw std::invalid_argument(
                "segment_coefficients: segment of length " + std::to_string(s.length()) +
                " cannot support " + std::to_string(x.cols()) +
                " regressors; min_len is inconsistent with the feature count");
        }
        const Eigen::MatrixXd xs = x.middleRows(static_cast<Eigen::Index>(s.begin), len);
        const Eigen::VectorXd ys = y.segment(static_cast<Eigen::Index>(s.begin), len);
        SegmentCoefficients sc;
        try {
            sc.theta = linmod::ols(xs, ys).coef;
        } catch (const linmod::SingularMatrixError&) {
            sc.theta = linmod::ridge(xs, ys, linmod::kFallbackRidgeLambda).coef;
            sc.ridge_fallback = true;
        }
        out.push_back(std::move(sc));
    }
    return out;
}

PCAProjection pca_fit(const std::vector<SegmentCoefficients>& thetas, double var_threshold) {
    if (thetas.size() < 2) {
        throw std::invalid_argument("pca_fit: need at least 2 coefficient vectors");
    }
    const auto s = static_cast<Eigen::Index>(thetas.size());
    const Eigen::Index d = thetas.front().theta.size();
    Eigen::MatrixXd m(s, d);
    for (Eigen::Index i = 0; i < s; ++i) m.row(i) = thetas[static_cast<std::size_t>(i)].theta;

    PCAProjection p;
    p.mean = m.colwise().mean();
    const Eigen::MatrixXd centered = m.rowwise() - p.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("pca_fit: eigendecomposition failed");
    }
    Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = values.sum();
    if (!(total > 0.0)) {
        // all coefficient vectors identical; one arbitrary component carries them
        p.components = vectors.col(0).transpose();
        p.explained_ratio = Eigen::VectorXd::Ones(1);
        p.retained = 1;
        return p;
    }
    const Eigen::VectorXd ratios = values / total;
    int retained = 1;
    double cum = ratios(0);
    while (cum < var_threshold && retained < d) {
        cum += ratios(retained);
        ++retained;
    }
    p.components = vectors.leftCols(retained).transpose();
    p.explained_ratio = ratios.head(retained);
    p.retained = retained;
    return p;
}

Eigen::MatrixXd pca_apply(const PCAProjection& p, const std::vector<SegmentCoefficients>& thetas) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(thetas.size()), p.retained);
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = pca_apply(p, thetas[i].theta).transpose();
    }
    return out;
}

Eigen::VectorXd pca_apply(const PCAProjection& p, const Eigen::VectorXd& theta) {
    return p.components * (theta - p.mean);
}

Eigen::VectorXd pca_back_project(const PCAProjection& p, const Eigen::VectorXd& z) {
    return p.mean + p.components.transpose() * z;
}

// -------------------------------------------------------------------------
// Variational Bayesian Gaussian mixture (finite, full covariance).
// -------------------------------------------------------------------------

namespace {

struct VBState {
    // priors
    double alpha0 = 0.0;
    double beta0 = 1.0;
    double nu0 = 0.0;
    Eigen::VectorXd m0;
    Eigen::MatrixXd w0_inv;
    double logdet_w0 = 0.0;

    // posterior params per component
    Eigen::VectorXd alpha, beta, nu;
    Eigen::MatrixXd means;               // K x d
    std::vector<Eigen::MatrixXd> w;      // W_k
    std::vector<double> logdet_w;

    // cached expectations
    Eigen::VectorXd e_log_pi;
    Eigen::VectorXd e_logdet_lambda;
};

void cache_expectations(VBState& st, int k, int d) {
    const double alpha_sum = st.alpha.sum();
    st.e_log_pi.resize(k);
    st.e_logdet_lambda.resize(k);
    for (int j = 0; j < k; ++j) {
        st.e_log_pi(j) = digamma(st.alpha(j)) - digamma(alpha_sum);
        double s = d * std::numbers::ln2 + st.logdet_w[static_cast<std::size_t>(j)];
        for (int i = 1; i <= d; ++i) {
            s += digamma((st.nu(j) + 1.0 - i) / 2.0);
        }
        st.e_logdet_lambda(j) = s;
    }
}

Eigen::MatrixXd expectation_step(const VBState& st, const Eigen::MatrixXd& x, int k) {
    const Eigen::Index n = x.rows();
    const int d = static_cast<int>(x.cols());
    Eigen::MatrixXd log_r(n, k);
    for (int j = 0; j < k; ++j) {
        const Eigen::MatrixXd centered = x.rowwise() - st.means.row(j);
        const Eigen::VectorXd quad =
            (centered * st.w[static_cast<std::size_t>(j)]).cwiseProduct(centered).rowwise().sum();
        log_r.col(j) =
            (st.e_log_pi(j) + 0.5 * st.e_logdet_lambda(j) - 0.5 * d * std::log(2.0 * std::numbers::pi) -
             0.5 * (d / st.beta(j) + st.nu(j) * quad.array())).matrix();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = log_r.row(i).maxCoeff();
        Eigen::ArrayXd e = (log_r.row(i).array() - mx).exp();
        log_r.row(i) = (e / e.sum()).matrix();
    }
    return log_r;  // now responsibilities
}

}  // namespace

BayesGMM BayesGMM::fit(const Eigen::MatrixXd& points, int k_max, std::uint64_t seed,
                       const Options& options) {
    const Eigen::Index n = points.rows();
    const int d = static_cast<int>(points.cols());
    if (k_max < 1) {
        throw std::invalid_argument("BayesGMM::fit: k_max must be >= 1");
    }
    if (n < k_max + 1) {
        throw std::invalid_argument("BayesGMM::fit: need at least k_max + 1 points, got " +
                                    std::to_string(n));
    }
    const int k = k_max;

    VBState st;
    st.alpha0 = 1.0 / k;
    st.beta0 = 1.0;
    st.nu0 = d + 2.0;
    st.m0 = points.colwise().mean();

    // prior precision scale: E[Lambda] = nu0 * W0 matches the diagonal of the
    // empirical covariance
    Eigen::VectorXd var = (points.rowwise() - st.m0.transpose()).array().square().colwise().mean();
    var = var.cwiseMax(1e-12);
    st.w0_inv = (var * st.nu0).asDiagonal();
    st.logdet_w0 = -(var.array() * st.nu0).log().sum();

    // k-means hard assignment as the initial responsibilities
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
    const auto km = kmeans::run(points, k, seed);
    for (Eigen::Index i = 0; i < n; ++i) {
        resp(i, km.labels[static_cast<std::size_t>(i)]) = 1.0;
    }

    st.alpha.resize(k);
    st.beta.resize(k);
    st.nu.resize(k);
    st.means.resize(k, d);
    st.w.assign(static_cast<std::size_t>(k), Eigen::MatrixXd());
    st.logdet_w.assign(static_cast<std::size_t>(k), 0.0);

    Eigen::VectorXd nk(k);
    Eigen::MatrixXd xbar(k, d);
    std::vector<Eigen::MatrixXd> scat(static_cast<std::size_t>(k));
    bool jitter_used = false;

    auto maximization = [&]() {
        nk = resp.colwise().sum();
        for (int j = 0; j < k; ++j) {
            if (nk(j) > 1e-12) {
                xbar.row(j) = (resp.col(j).transpose() * points) / nk(j);
            } else {
                xbar.row(j) = st.m0.transpose();
            }
            const Eigen::MatrixXd centered = points.rowwise() - xbar.row(j);
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
            if (nk(j) > 1e-12) {
                s = centered.transpose() * resp.col(j).asDiagonal() * centered / nk(j);
            }
            scat[static_cast<std::size_t>(j)] = s;

            st.alpha(j) = st.alpha0 + nk(j);
            st.beta(j) = st.beta0 + nk(j);
            st.nu(j) = st.nu0 + nk(j);
            st.means.row(j) =
                (st.beta0 * st.m0.transpose() + nk(j) * xbar.row(j)) / st.beta(j);
            const Eigen::VectorXd dm = xbar.row(j).transpose() - st.m0;
            Eigen::MatrixXd w_inv = st.w0_inv + nk(j) * s +
                                    (st.beta0 * nk(j) / (st.beta0 + nk(j))) * (dm * dm.transpose());
            w_inv = 0.5 * (w_inv + w_inv.transpose());
            Eigen::LLT<Eigen::MatrixXd> llt(w_inv);
            if (llt.info() != Eigen::Success) {
                if (jitter_used) {
                    throw std::runtime_error("BayesGMM::fit: covariance collapsed after jitter");
                }
                jitter_used = true;
                w_inv.diagonal().array() += 1e-6;
                llt.compute(w_inv);
                if (llt.info() != Eigen::Success) {
                    throw std::runtime_error("BayesGMM::fit: covariance not positive definite");
                }
            }
            st.w[static_cast<std::size_t>(j)] =
                llt.solve(Eigen::MatrixXd::Identity(d, d));
            double ld = 0.0;
            for (int i = 0; i < d; ++i) ld += std::log(llt.matrixL()(i, i));
            st.logdet_w[static_cast<std::size_t>(j)] = -2.0 * ld;  // ln|W| = -ln|W^-1|
        }
        cache_expectations(st, k, d);
    };

    auto elbo = [&]() {
        double e_px = 0.0, e_pz = 0.0, e_qz = 0.0;
        for (int j = 0; j < k; ++j) {
            const Eigen::VectorXd dm = xbar.row(j).transpose() - st.means.row(j).transpose();
            const auto& w = st.w[static_cast<std::size_t>(j)];
            e_px += 0.5 * nk(j) *
                    (st.e_logdet_lambda(j) - d / st.beta(j) -
                     st.nu(j) * (scat[static_cast<std::size_t>(j)].cwiseProduct(w)).sum() -
                     st.nu(j) * dm.dot(w * dm) - d * std::log(2.0 * std::numbers::pi));
        }
        for (int j = 0; j < k; ++j) {
            e_pz += resp.col(j).sum() * st.e_log_pi(j);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < k; ++j) {
                const double r = resp(i, j);
                if (r > 0.0) e_qz += r * std::log(r);
            }
        }
        const double log_c0 = std::lgamma(k * st.alpha0) - k * std::lgamma(st.alpha0);
        const double e_ppi = log_c0 + (st.alpha0 - 1.0) * st.e_log_pi.sum();
        const double log_ca = std::lgamma(st.alpha.sum()) -
                              st.alpha.unaryExpr([](double a) { return std::lgamma(a); }).sum();
        const double e_qpi = ((st.alpha.array() - 1.0) * st.e_log_pi.array()).sum() + log_ca;

        double e_pmu = 0.0, e_qmu = 0.0;
        const double log_b0 = log_wishart_b(st.logdet_w0, st.nu0, d);
        for (int j = 0; j < k; ++j) {
            const auto& w = st.w[static_cast<std::size_t>(j)];
            const Eigen::VectorXd dm = st.means.row(j).transpose() - st.m0;
            e_pmu += 0.5 * (d * std::log(st.beta0 / (2.0 * std::numbers::pi)) +
                            st.e_logdet_lambda(j) - d * st.beta0 / st.beta(j) -
                            st.beta0 * st.nu(j) * dm.dot(w * dm));
            e_pmu += (st.nu0 - d - 1.0) / 2.0 * st.e_logdet_lambda(j) -
                     0.5 * st.nu(j) * (st.w0_inv.cwiseProduct(w)).sum();

            const double log_bk = log_wishart_b(st.logdet_w[static_cast<std::size_t>(j)], st.nu(j), d);
            const double wishart_entropy = -log_bk -
                                           (st.nu(j) - d - 1.0) / 2.0 * st.e_logdet_lambda(j) +
                                           st.nu(j) * d / 2.0;
            e_qmu += 0.5 * st.e_logdet_lambda(j) +
                     d / 2.0 * std::log(st.beta(j) / (2.0 * std::numbers::pi)) - d / 2.0 -
                     wishart_entropy;
        }
        e_pmu += k * log_b0;
        return e_px + e_pz + e_ppi + e_pmu - e_qz - e_qpi - e_qmu;
    };

    maximization();
    double prev = elbo();
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        resp = expectation_step(st, points, k);
        maximization();
        const double cur = elbo();
        if (cur < prev - 1e-9 * (1.0 + std::abs(prev))) {
            throw std::logic_error("BayesGMM::fit: ELBO decreased");
        }
        if (cur - prev < options.tol * (1.0 + std::abs(prev))) {
            prev = cur;
            converged = true;
            break;
        }
        prev = cur;
    }

    // prune collapsed components, keep at least the heaviest
    const Eigen::VectorXd all_weights = st.alpha / st.alpha.sum();
    std::vector<int> keep;
    for (int j = 0; j < k; ++j) {
        if (all_weights(j) >= options.drop_weight) keep.push_back(j);
    }
    if (keep.empty()) {
        int arg = 0;
        all_weights.maxCoeff(&arg);
        keep.push_back(arg);
    }

    BayesGMM model;
    model.dim_ = d;
    const int ke = static_cast<int>(keep.size());
    model.alpha_.resize(ke);
    model.beta_.resize(ke);
    model.nu_.resize(ke);
    model.means_.resize(ke, d);
    model.scatter_.resize(static_cast<std::size_t>(ke));
    for (int i = 0; i < ke; ++i) {
        const int j = keep[static_cast<std::size_t>(i)];
        model.alpha_(i) = st.alpha(j);
        model.beta_(i) = st.beta(j);
        model.nu_(i) = st.nu(j);
        model.means_.row(i) = st.means.row(j);
        model.scatter_[static_cast<std::size_t>(i)] = st.w[static_cast<std::size_t>(j)];
    }
    model.alpha_sum_ = st.alpha.sum();
    model.weights_ = model.alpha_ / model.alpha_.sum();
    model.elbo_ = prev;
    model.converged_ = converged;
    return model;
}

Eigen::MatrixXd BayesGMM::responsibilities(const Eigen::MatrixXd& points) const {
    if (points.cols() != dim_) {
        throw std::invalid_argument("BayesGMM::responsibilities: dimension mismatch");
    }
    const int k = static_cast<int>(weights_.size());
    const Eigen::Index n = points.rows();
    const int d = dim_;
    const double alpha_sum = alpha_sum_;
    Eigen::MatrixXd log_r(n, k);
    for (int j = 0; j < k; ++j) {
        double e_logdet = d * std::numbers::ln2;
        {
            Eigen::LLT<Eigen::MatrixXd> llt(scatter_[static_cast<std::size_t>(j)]);
            double ld = 0.0;
            for (int i = 0; i < d; ++i) ld += std::log(llt.matrixL()(i, i));
            e_logdet += 2.0 * ld;
        }
        for (int i = 1; i <= d; ++i) e_logdet += digamma((nu_(j) + 1.0 - i) / 2.0);
        const double e_log_pi = digamma(alpha_(j)) - digamma(alpha_sum);
        const Eigen::MatrixXd centered = points.rowwise() - means_.row(j);
        const Eigen::VectorXd quad =
            (centered * scatter_[static_cast<std::size_t>(j)]).cwiseProduct(centered).rowwise().sum();
        log_r.col(j) = (e_log_pi + 0.5 * e_logdet -
                        0.5 * d * std::log(2.0 * std::numbers::pi) -
                        0.5 * (d / beta_(j) + nu_(j) * quad.array()))
                           .matrix();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = log_r.row(i).maxCoeff();
        Eigen::ArrayXd e = (log_r.row(i).array() - mx).exp();
        log_r.row(i) = (e / e.sum()).matrix();
    }
    return log_r;
}

Eigen::MatrixXd regime_weights(const segment::SegmentSet& segments,
                               const Eigen::MatrixXd& responsibilities) {
    if (responsibilities.rows() != static_cast<Eigen::Index>(segments.segments.size())) {
        throw std::invalid_argument("regime_weights: need one responsibility row per segment");
    }
    const auto total = static_cast<Eigen::Index>(segments.segments.back().end);
    Eigen::MatrixXd out(total, responsibilities.cols());
    for (std::size_t i = 0; i < segments.segments.size(); ++i) {
        const auto& s = segments.segments[i];
        for (std::size_t t = s.begin; t < s.end; ++t) {
            out.row(static_cast<Eigen::Index>(t)) = responsibilities.row(static_cast<Eigen::Index>(i));
        }
    }
    return out;
}

}  // namespace regimevol::coefcluster
