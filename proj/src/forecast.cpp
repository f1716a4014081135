#include "regimevol/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regimevol/csv.hpp"
#include "regimevol/rng.hpp"
#include "regimevol/threads.hpp"

namespace regimevol::forecast {

Family family_from_string(const std::string& s) {
    if (s == "har") return Family::Har;
    if (s == "markov") return Family::Markov;
    if (s == "dist_cluster") return Family::DistCluster;
    if (s == "coef_cluster") return Family::CoefCluster;
    throw std::invalid_argument("unknown model family: '" + s + "'");
}

std::string to_string(Family f) {
    switch (f) {
        case Family::Har: return "har";
        case Family::Markov: return "markov";
        case Family::DistCluster: return "dist_cluster";
        case Family::CoefCluster: return "coef_cluster";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "nonrecursive") return Mode::NonRecursive;
    if (s == "single_recursive") return Mode::SingleRecursive;
    if (s == "dual_recursive") return Mode::DualRecursive;
    throw std::invalid_argument("unknown forecast mode: '" + s + "'");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::NonRecursive: return "nonrecursive";
        case Mode::SingleRecursive: return "single_recursive";
        case Mode::DualRecursive: return "dual_recursive";
    }
    return "?";
}

std::vector<int> regressor_columns(Family family, Mode mode) {
    using namespace features;
    switch (mode) {
        case Mode::SingleRecursive:
            return {kRvDaily, kRvWeekly, kRvMonthly};
        case Mode::DualRecursive:
            return {kRvDaily, kRvWeekly, kRvMonthly, kVixDaily, kVixWeekly, kVixMonthly};
        case Mode::NonRecursive:
            break;
    }
    if (family == Family::CoefCluster) {
        // kurtosis stays, jump variation is excluded for this family
        return {kRvDaily, kRvWeekly, kRvMonthly, kVixDaily, kVixWeekly, kVixMonthly, kKurtosis};
    }
    return {kRvDaily, kRvWeekly, kRvMonthly, kVixDaily, kVixWeekly, kVixMonthly, kKurtosis, kJump};
}

std::vector<int> cluster_columns(Family family, Mode mode) {
    // daily/weekly/monthly RV and VIX averages, intersected with what the
    // mode can forecast
    std::vector<int> cols = regressor_columns(family, mode);
    std::vector<int> out;
    for (int c : cols) {
        if (c <= features::kVixMonthly) out.push_back(c);
    }
    return out;
}

Eigen::VectorXd FittedFamily::subset(const Eigen::VectorXd& x_scaled) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = x_scaled(columns[i]);
    }
    return out;
}

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = x.col(cols[i]);
    }
    return out;
}

// Weighted fit with the sparse-regime fallback: too little occupancy or a
// rank-deficient weighted design refits plain OLS on the whole window.
linmod::LinearFit fit_regime(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& weights, int* fallbacks) {
    const double min_occupancy = static_cast<double>(x.cols()) + 2.0;
    if (weights.sum() < min_occupancy) {
        ++*fallbacks;
        return linmod::ols(x, y);
    }
    try {
        return linmod::wls(x, y, weights);
    } catch (const linmod::SingularMatrixError&) {
        ++*fallbacks;
        return linmod::ols(x, y);
    }
}

// Hyperparameter selection for the regime classifier. Windows too small to
// cross-validate (few segment means) use fixed defaults instead of searching.
gbt::GBTParams classifier_params(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 const ModelSpec& spec, std::uint64_t seed) {
    const bool single_class =
        std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end();
    if (single_class || x.rows() < spec.search_folds + 1) {
        gbt::GBTParams p;
        p.n_estimators = 100;
        p.max_depth = 3;
        p.learning_rate = 0.1;
        return p;
    }
    const auto search = gbt::random_search(x, labels, gbt::SearchSpace::standard(),
                                           spec.search_iterations, spec.search_folds, seed);
    return search.best;
}

void fit_markov(FittedFamily& f, const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                const Eigen::VectorXd& yvix, const ModelSpec& spec, std::uint64_t seed) {
    const Eigen::VectorXd smoothed = hmm::smooth(ys, 5);
    auto [model, track] = hmm::fit(smoothed, spec.k, spec.hmm_options, derive_seed(seed, 1));
    f.hmm_model = std::move(model);
    f.gamma_last = track.gamma.row(track.gamma.rows() - 1).transpose();
    f.n_regimes = spec.k;
    for (int k = 0; k < spec.k; ++k) {
        f.fits.push_back(fit_regime(xs, ys, track.gamma.col(k), &f.ols_fallbacks));
        if (f.mode == Mode::DualRecursive) {
            f.vix_fits.push_back(fit_regime(xs, yvix, track.gamma.col(k), &f.ols_fallbacks));
        }
    }
}

void fit_dist_cluster(FittedFamily& f, const Eigen::MatrixXd& xs_all, const Eigen::MatrixXd& xs,
                      const Eigen::VectorXd& ys, const Eigen::VectorXd& yvix,
                      const ModelSpec& spec, std::uint64_t seed,
                      const std::optional<gbt::GBTParams>& frozen) {
    const Eigen::VectorXd smoothed = hmm::smooth(ys, 5);
    const std::vector<double> sm(smoothed.data(), smoothed.data() + smoothed.size());
    f.segments = segment::detect_changepoints(sm, spec.segment_options);
    const auto n_segments = f.segments.segments.size();

    const int k = std::min<int>(spec.k, static_cast<int>(n_segments));
    std::vector<int> labels;
    if (k <= 1) {
        labels.assign(n_segments, 0);
    } else {
        std::vector<otcluster::SegmentDistribution> dists;
        dists.reserve(n_segments);
        const Eigen::MatrixXd cluster_x = select_columns(xs_all, f.cluster_cols);
        for (const auto& s : f.segments.segments) {
            otcluster::SegmentDistribution d;
            d.points.resize(static_cast<Eigen::Index>(s.length()), cluster_x.cols() + 1);
            d.points.leftCols(cluster_x.cols()) =
                cluster_x.middleRows(static_cast<Eigen::Index>(s.begin),
                                     static_cast<Eigen::Index>(s.length()));
            d.points.rightCols(1) = smoothed.segment(static_cast<Eigen::Index>(s.begin),
                                                     static_cast<Eigen::Index>(s.length()));
            dists.push_back(std::move(d));
        }
        const auto w2 = otcluster::pairwise_w2sq(dists, spec.ot_cap);
        const auto kernel = otcluster::kernelize(w2, spec.kernel_sigma);
        labels = otcluster::spectral_cluster(kernel, k, derive_seed(seed, 2));
    }
    f.segment_labels = labels;
    const auto point_labels = otcluster::project_labels(f.segments, labels);
    f.n_regimes = *std::max_element(labels.begin(), labels.end()) + 1;

    for (int c = 0; c < f.n_regimes; ++c) {
        Eigen::VectorXd w(xs.rows());
        for (Eigen::Index t = 0; t < xs.rows(); ++t) {
            w(t) = point_labels[static_cast<std::size_t>(t)] == c ? 1.0 : 0.0;
        }
        f.fits.push_back(fit_regime(xs, ys, w, &f.ols_fallbacks));
        if (f.mode == Mode::DualRecursive) {
            f.vix_fits.push_back(fit_regime(xs, yvix, w, &f.ols_fallbacks));
        }
    }

    const gbt::GBTParams params =
        frozen ? *frozen : classifier_params(xs, point_labels, spec, derive_seed(seed, 3));
    f.classifier_params = params;
    f.classifier = gbt::GBTModel::train(xs, point_labels, params, derive_seed(seed, 4));
}

void fit_coef_cluster(FittedFamily& f, const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                      const Eigen::VectorXd& yvix, const ModelSpec& spec, std::uint64_t seed,
                      const std::optional<gbt::GBTParams>& frozen) {
    const Eigen::VectorXd smoothed = hmm::smooth(ys, 5);
    const std::vector<double> sm(smoothed.data(), smoothed.data() + smoothed.size());
    f.segments = segment::detect_changepoints(sm, spec.segment_options);
    const auto n_segments = f.segments.segments.size();

    if (static_cast<int>(n_segments) >= spec.k + 1 && spec.k > 1) {
        const auto thetas = coefcluster::segment_coefficients(xs, ys, f.segments);
        const auto pca = coefcluster::pca_fit(thetas, spec.pca_var_threshold);
        const Eigen::MatrixXd projected = coefcluster::pca_apply(pca, thetas);
        const auto gmm = coefcluster::BayesGMM::fit(projected, spec.k, derive_seed(seed, 5));
        f.responsibilities = gmm.responsibilities(projected);
        f.n_regimes = gmm.effective_components();
    } else {
        // too few segments to separate k regimes: single-regime degeneracy
        f.responsibilities = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_segments), 1);
        f.n_regimes = 1;
    }

    const Eigen::MatrixXd weights = coefcluster::regime_weights(f.segments, f.responsibilities);
    for (int k = 0; k < f.n_regimes; ++k) {
        f.fits.push_back(fit_regime(xs, ys, weights.col(k), &f.ols_fallbacks));
        if (f.mode == Mode::DualRecursive) {
            f.vix_fits.push_back(fit_regime(xs, yvix, weights.col(k), &f.ols_fallbacks));
        }
    }

    // classifier on segment mean feature vectors, labeled by dominant regime
    Eigen::MatrixXd means(static_cast<Eigen::Index>(n_segments), xs.cols());
    std::vector<int> labels(n_segments, 0);
    for (std::size_t i = 0; i < n_segments; ++i) {
        const auto& s = f.segments.segments[i];
        means.row(static_cast<Eigen::Index>(i)) =
            xs.middleRows(static_cast<Eigen::Index>(s.begin), static_cast<Eigen::Index>(s.length()))
                .colwise()
                .mean();
        Eigen::Index arg = 0;
        f.responsibilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        labels[i] = static_cast<int>(arg);
    }
    const gbt::GBTParams params =
        frozen ? *frozen : classifier_params(means, labels, spec, derive_seed(seed, 6));
    f.classifier_params = params;
    f.classifier = gbt::GBTModel::train(means, labels, params, derive_seed(seed, 7));
}

}  // namespace

FittedFamily fit_family(const features::FeatureFrame& frame, Eigen::Index begin, Eigen::Index len,
                        const ModelSpec& spec, std::uint64_t seed,
                        const std::optional<gbt::GBTParams>& frozen) {
    if (begin < 0 || len < 2 || begin + len > frame.rows()) {
        throw std::invalid_argument("fit_family: training slice out of range");
    }
    if (spec.k < 1) {
        throw std::invalid_argument("fit_family: k must be >= 1");
    }
    FittedFamily f;
    f.family = spec.family;
    f.mode = spec.mode;
    f.columns = regressor_columns(spec.family, spec.mode);
    f.cluster_cols = cluster_columns(spec.family, spec.mode);
    f.scaler = features::ZScaler::fit(frame, begin, len);

    const Eigen::MatrixXd xs_all = f.scaler.apply_x(frame.x.middleRows(begin, len));
    const Eigen::MatrixXd xs = select_columns(xs_all, f.columns);
    const Eigen::VectorXd ys = f.scaler.apply_y(frame.y.segment(begin, len));
    const Eigen::VectorXd yvix = f.scaler.apply_vix(frame.vix_now.segment(begin, len));

    const int k = spec.family == Family::Har ? 1 : spec.k;
    ModelSpec resolved = spec;
    resolved.k = k;

    switch (spec.family) {
        case Family::Har: {
            f.n_regimes = 1;
            f.fits.push_back(linmod::ols(xs, ys));
            if (f.mode == Mode::DualRecursive) {
                f.vix_fits.push_back(linmod::ols(xs, yvix));
            }
            break;
        }
        case Family::Markov:
            fit_markov(f, xs, ys, yvix, resolved, seed);
            break;
        case Family::DistCluster:
            fit_dist_cluster(f, xs_all, xs, ys, yvix, resolved, seed, frozen);
            break;
        case Family::CoefCluster:
            fit_coef_cluster(f, xs, ys, yvix, resolved, seed, frozen);
            break;
    }
    return f;
}

Eigen::VectorXd regime_probabilities(const FittedFamily& fitted, const Eigen::VectorXd& x_sub,
                                     int horizon) {
    switch (fitted.family) {
        case Family::Har:
            return Eigen::VectorXd::Ones(1);
        case Family::Markov:
            return hmm::propagate(fitted.gamma_last, fitted.hmm_model.transition, horizon);
        case Family::DistCluster: {
            Eigen::VectorXd p = Eigen::VectorXd::Zero(fitted.n_regimes);
            p(fitted.classifier.predict(x_sub)) = 1.0;
            return p;
        }
        case Family::CoefCluster: {
            Eigen::VectorXd p = Eigen::VectorXd::Zero(fitted.n_regimes);
            const Eigen::VectorXd proba = fitted.classifier.predict_proba(x_sub);
            const auto& classes = fitted.classifier.classes();
            for (std::size_t i = 0; i < classes.size(); ++i) {
                p(classes[i]) = proba(static_cast<Eigen::Index>(i));
            }
            return p;
        }
    }
    throw std::logic_error("regime_probabilities: unreachable");
}

Prediction predict_step(const FittedFamily& fitted, const Eigen::VectorXd& x_sub, int horizon) {
    if (x_sub.size() != static_cast<Eigen::Index>(fitted.columns.size())) {
        throw std::invalid_argument("predict_step: feature vector has wrong dimension");
    }
    if (horizon < 1) {
        throw std::invalid_argument("predict_step: horizon must be >= 1");
    }
    Prediction out;
    out.probs = regime_probabilities(fitted, x_sub, horizon);
    double y = 0.0;
    for (int k = 0; k < fitted.n_regimes; ++k) {
        if (out.probs(k) != 0.0) {
            y += out.probs(k) * fitted.fits[static_cast<std::size_t>(k)].predict(x_sub);
        }
    }
    out.y_scaled = y;
    return out;
}

std::vector<StepForecast> recursive_forecast(const FittedFamily& fitted,
                                             std::span<const double> rv_history,
                                             std::span<const double> vix_history, int h_max) {
    if (h_max < 1) {
        throw std::invalid_argument("recursive_forecast: h_max must be >= 1");
    }
    if (fitted.mode == Mode::NonRecursive) {
        throw std::invalid_argument("recursive_forecast: fitted set is non-recursive");
    }
    if (rv_history.size() < static_cast<std::size_t>(features::kMonthlyWindow)) {
        throw std::invalid_argument("recursive_forecast: need 22 days of RV history");
    }
    const bool dual = fitted.mode == Mode::DualRecursive;
    if (dual && vix_history.size() < static_cast<std::size_t>(features::kMonthlyWindow)) {
        throw std::invalid_argument("recursive_forecast: need 22 days of VIX history");
    }

    std::vector<double> rv(rv_history.begin(), rv_history.end());
    std::vector<double> vix(vix_history.begin(), vix_history.end());

    // identical summation order as features::rolling_mean, for bit-equality
    // between the h=1 recursion and the frame's own lag columns
    auto trailing_mean = [](const std::vector<double>& buf, int window) {
        double s = 0.0;
        for (std::size_t i = buf.size() - static_cast<std::size_t>(window); i < buf.size(); ++i) {
            s += buf[i];
        }
        return s / static_cast<double>(window);
    };

    std::vector<StepForecast> out;
    out.reserve(static_cast<std::size_t>(h_max));
    for (int h = 1; h <= h_max; ++h) {
        Eigen::VectorXd x_sub(static_cast<Eigen::Index>(fitted.columns.size()));
        for (std::size_t i = 0; i < fitted.columns.size(); ++i) {
            const int c = fitted.columns[i];
            double raw = 0.0;
            switch (c) {
                case features::kRvDaily: raw = rv.back(); break;
                case features::kRvWeekly: raw = trailing_mean(rv, features::kWeeklyWindow); break;
                case features::kRvMonthly: raw = trailing_mean(rv, features::kMonthlyWindow); break;
                case features::kVixDaily: raw = vix.back(); break;
                case features::kVixWeekly: raw = trailing_mean(vix, features::kWeeklyWindow); break;
                case features::kVixMonthly: raw = trailing_mean(vix, features::kMonthlyWindow); break;
                default:
                    throw std::logic_error("recursive_forecast: non-forecastable regressor");
            }
            x_sub(static_cast<Eigen::Index>(i)) = fitted.scaler.apply_feature(c, raw);
        }
        const Prediction pred = predict_step(fitted, x_sub, h);
        StepForecast step;
        step.y_raw = fitted.scaler.invert_y(pred.y_scaled);
        step.probs = pred.probs;
        out.push_back(step);
        rv.push_back(step.y_raw);
        if (dual) {
            // auxiliary VIX equation, same lag vector and regime weights
            double v = 0.0;
            for (int k = 0; k < fitted.n_regimes; ++k) {
                if (pred.probs(k) != 0.0) {
                    v += pred.probs(k) * fitted.vix_fits[static_cast<std::size_t>(k)].predict(x_sub);
                }
            }
            vix.push_back(fitted.scaler.invert_vix(v));
        }
    }
    return out;
}

std::vector<ForecastRecord> run_backtest(const features::FeatureFrame& frame, const ModelSpec& spec,
                                         const WindowSpec& window, const Date& period_start,
                                         const Date& period_end, std::uint64_t seed, int threads) {
    if (window.train_len <= window.horizon || window.horizon < 1) {
        throw std::invalid_argument("run_backtest: need train_len > horizon >= 1");
    }
    const auto& dates = frame.dates;
    const auto lower = [&](const Date& d) {
        return static_cast<Eigen::Index>(
            std::lower_bound(dates.begin(), dates.end(), d) - dates.begin());
    };
    const Eigen::Index i0 = lower(period_start);
    const Eigen::Index i_end = std::min<Eigen::Index>(lower(period_end), frame.rows());
    if (i0 < window.train_len) {
        throw std::invalid_argument("run_backtest: insufficient history before " +
                                    period_start.to_string() + ": need " +
                                    std::to_string(window.train_len) + " rows, have " +
                                    std::to_string(i0));
    }
    const int step = window.effective_step();
    const Eigen::Index n_period = std::max<Eigen::Index>(i_end - i0, 0);
    const int refits = static_cast<int>(n_period / step);

    // Resolve frozen classifier hyperparameters on the first window upfront so
    // every window (including window 0 itself) trains with the same set and
    // parallel evaluation stays order-independent.
    std::optional<gbt::GBTParams> frozen;
    if (spec.freeze_search && refits > 0 &&
        (spec.family == Family::DistCluster || spec.family == Family::CoefCluster)) {
        const FittedFamily first =
            fit_family(frame, i0 - window.train_len, window.train_len, spec, derive_seed(seed, 0));
        frozen = first.classifier_params;
    }

    std::vector<std::vector<ForecastRecord>> blocks(static_cast<std::size_t>(refits));
    parallel_for(static_cast<std::size_t>(refits), threads, [&](std::size_t r) {
        const Eigen::Index s = i0 + static_cast<Eigen::Index>(r) * step;
        const std::uint64_t window_seed = derive_seed(seed, r);
        FittedFamily fitted = fit_family(frame, s - window.train_len, window.train_len, spec,
                                         window_seed, frozen);
        std::vector<ForecastRecord> block;
        block.reserve(static_cast<std::size_t>(window.horizon));
        if (spec.mode == Mode::NonRecursive) {
            for (int j = 0; j < window.horizon; ++j) {
                const Eigen::Index row = s + j;
                if (row >= frame.rows()) break;
                const Eigen::VectorXd x_full = frame.x.row(row).transpose();
                const Eigen::VectorXd x_sub = fitted.subset(fitted.scaler.apply_x(x_full));
                const Prediction p = predict_step(fitted, x_sub, j + 1);
                ForecastRecord rec;
                rec.date = frame.dates[static_cast<std::size_t>(row)];
                rec.y_true = frame.y(row);
                rec.y_pred = fitted.scaler.invert_y(p.y_scaled);
                rec.regime_probs = p.probs;
                rec.window_id = static_cast<int>(r);
                block.push_back(std::move(rec));
            }
        } else {
            const Eigen::Index hist_begin = s - features::kMonthlyWindow;
            const std::span<const double> rv_hist(frame.y.data() + hist_begin,
                                                  features::kMonthlyWindow);
            const std::span<const double> vix_hist(frame.vix_now.data() + hist_begin,
                                                   features::kMonthlyWindow);
            const auto steps = recursive_forecast(fitted, rv_hist, vix_hist, window.horizon);
            for (int j = 0; j < window.horizon; ++j) {
                const Eigen::Index row = s + j;
                if (row >= frame.rows()) break;
                ForecastRecord rec;
                rec.date = frame.dates[static_cast<std::size_t>(row)];
                rec.y_true = frame.y(row);
                rec.y_pred = steps[static_cast<std::size_t>(j)].y_raw;
                rec.regime_probs = steps[static_cast<std::size_t>(j)].probs;
                rec.window_id = static_cast<int>(r);
                block.push_back(std::move(rec));
            }
        }
        blocks[r] = std::move(block);
    });

    std::vector<ForecastRecord> records;
    for (auto& b : blocks) {
        for (auto& rec : b) records.push_back(std::move(rec));
    }
    return records;
}

void dump_records(const std::vector<ForecastRecord>& records, int k, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"date", "window_id", "y_true", "y_pred"};
    for (int i = 1; i <= k; ++i) header.push_back("p_regime_" + std::to_string(i));
    w.row(header);
    for (const auto& rec : records) {
        std::vector<std::string> row = {rec.date.to_string(), std::to_string(rec.window_id),
                                        csv::format_double(rec.y_true),
                                        csv::format_double(rec.y_pred)};
        for (int i = 0; i < k; ++i) {
            row.push_back(csv::format_double(i < rec.regime_probs.size() ? rec.regime_probs(i) : 0.0));
        }
        w.row(row);
    }
    w.close();
}

}  // namespace regimevol::forecast
