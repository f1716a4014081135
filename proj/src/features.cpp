#include "regimevol/features.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "regimevol/csv.hpp"

namespace regimevol::features {

double realized_volatility(const std::vector<double>& returns, int full_day_count) {
    if (returns.empty()) {
        throw std::invalid_argument("realized_volatility: empty returns");
    }
    if (full_day_count < 1) {
        throw std::invalid_argument("realized_volatility: full-day count must be >= 1");
    }
    double ss = 0.0;
    for (double r : returns) ss += r * r;
    const double n = static_cast<double>(returns.size());
    return std::sqrt(static_cast<double>(full_day_count) / n * ss);
}

std::vector<double> rolling_mean(const std::vector<double>& series, int window) {
    if (window < 1) {
        throw std::invalid_argument("rolling_mean: window must be >= 1");
    }
    if (static_cast<int>(series.size()) < window) {
        throw std::invalid_argument("rolling_mean: series shorter than window");
    }
    std::vector<double> out(series.size(), std::numeric_limits<double>::quiet_NaN());
    // Direct per-window summation (ascending index) so that any other code
    // averaging the same window reproduces the value bit-for-bit.
    for (std::size_t t = static_cast<std::size_t>(window) - 1; t < series.size(); ++t) {
        double s = 0.0;
        for (std::size_t i = t + 1 - static_cast<std::size_t>(window); i <= t; ++i) s += series[i];
        out[t] = s / static_cast<double>(window);
    }
    return out;
}

double realized_kurtosis(const std::vector<double>& returns) {
    double s2 = 0.0, s4 = 0.0;
    for (double r : returns) {
        const double r2 = r * r;
        s2 += r2;
        s4 += r2 * r2;
    }
    if (!(s2 > 0.0)) {
        throw std::invalid_argument("realized_kurtosis: all returns zero, ratio undefined");
    }
    return static_cast<double>(returns.size()) * s4 / (s2 * s2);
}

double jump_variation(const std::vector<double>& returns, int full_day_count) {
    if (returns.size() < 2) {
        throw std::invalid_argument("jump_variation: need at least 2 returns");
    }
    double s2 = 0.0;
    for (double r : returns) s2 += r * r;
    double bp = 0.0;
    for (std::size_t i = 1; i < returns.size(); ++i) {
        bp += std::abs(returns[i]) * std::abs(returns[i - 1]);
    }
    const double scale = static_cast<double>(full_day_count) / static_cast<double>(returns.size());
    return scale * s2 - scale * (std::numbers::pi / 2.0) * bp;
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "rv_d", "rv_w", "rv_m", "vix_d", "vix_w", "vix_m", "kts", "jmp"};
    return names;
}

FeatureFrame build_frame(const ingest::AlignedSeries& aligned) {
    const std::size_t n = aligned.dates.size();
    if (n < static_cast<std::size_t>(kMonthlyWindow) + 2) {
        throw std::invalid_argument("build_frame: need at least " +
                                    std::to_string(kMonthlyWindow + 2) + " aligned dates, got " +
                                    std::to_string(n));
    }
    const auto rv_w = rolling_mean(aligned.rv, kWeeklyWindow);
    const auto rv_m = rolling_mean(aligned.rv, kMonthlyWindow);
    const auto vix_w = rolling_mean(aligned.vix, kWeeklyWindow);
    const auto vix_m = rolling_mean(aligned.vix, kMonthlyWindow);

    // Row for date t uses lags dated t-1; the monthly average needs 22 days of
    // history, so the first usable target index is kMonthlyWindow.
    const std::size_t first = static_cast<std::size_t>(kMonthlyWindow);
    const std::size_t rows = n - first;
    FeatureFrame frame;
    frame.dates.reserve(rows);
    frame.y.resize(static_cast<Eigen::Index>(rows));
    frame.x.resize(static_cast<Eigen::Index>(rows), kNumFeatures);
    frame.vix_now.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t t = first; t < n; ++t) {
        const std::size_t i = t - first;
        const std::size_t lag = t - 1;
        frame.dates.push_back(aligned.dates[t]);
        frame.y(static_cast<Eigen::Index>(i)) = aligned.rv[t];
        frame.vix_now(static_cast<Eigen::Index>(i)) = aligned.vix[t];
        auto row = frame.x.row(static_cast<Eigen::Index>(i));
        row(kRvDaily) = aligned.rv[lag];
        row(kRvWeekly) = rv_w[lag];
        row(kRvMonthly) = rv_m[lag];
        row(kVixDaily) = aligned.vix[lag];
        row(kVixWeekly) = vix_w[lag];
        row(kVixMonthly) = vix_m[lag];
        row(kKurtosis) = aligned.kurtosis[lag];
        row(kJump) = aligned.jump[lag];
    }
    return frame;
}

void dump_frame(const FeatureFrame& frame, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"date", "y"};
    for (const auto& n : feature_names()) header.push_back(n);
    w.row(header);
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
        std::vector<std::string> row;
        row.push_back(frame.dates[static_cast<std::size_t>(i)].to_string());
        row.push_back(csv::format_double(frame.y(i)));
        for (int j = 0; j < kNumFeatures; ++j) {
            row.push_back(csv::format_double(frame.x(i, j)));
        }
        w.row(row);
    }
    w.close();
}

ZScaler ZScaler::fit(const FeatureFrame& frame, Eigen::Index begin, Eigen::Index len) {
    if (len < 2) {
        throw std::invalid_argument("ZScaler::fit: need at least 2 rows");
    }
    if (begin < 0 || begin + len > frame.rows()) {
        throw std::invalid_argument("ZScaler::fit: slice out of range");
    }
    const int cols = kNumFeatures + 2;
    ZScaler s;
    s.mean_.resize(cols);
    s.std_.resize(cols);
    Eigen::MatrixXd all(len, cols);
    all.leftCols(kNumFeatures) = frame.x.middleRows(begin, len);
    all.col(kNumFeatures) = frame.y.segment(begin, len);
    all.col(kNumFeatures + 1) = frame.vix_now.segment(begin, len);
    for (int c = 0; c < cols; ++c) {
        const double m = all.col(c).mean();
        const double var = (all.col(c).array() - m).square().sum() / static_cast<double>(len);
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
            const std::string name = c < kNumFeatures ? feature_names()[static_cast<std::size_t>(c)]
                                    : c == kNumFeatures ? std::string("y")
                                                        : std::string("vix_now");
            throw std::runtime_error("ZScaler::fit: column '" + name + "' has zero variance on the training slice");
        }
        s.mean_(c) = m;
        s.std_(c) = sd;
    }
    return s;
}

Eigen::VectorXd ZScaler::apply_x(const Eigen::VectorXd& x) const {
    return (x.array() - mean_.head(kNumFeatures).array()) / std_.head(kNumFeatures).array();
}

Eigen::MatrixXd ZScaler::apply_x(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean_.head(kNumFeatures).transpose()).array().rowwise() /
           std_.head(kNumFeatures).transpose().array();
}

double ZScaler::apply_feature(int column, double v) const {
    return (v - mean_(column)) / std_(column);
}

double ZScaler::apply_y(double v) const { return (v - mean_(kNumFeatures)) / std_(kNumFeatures); }

Eigen::VectorXd ZScaler::apply_y(const Eigen::VectorXd& y) const {
    return (y.array() - mean_(kNumFeatures)) / std_(kNumFeatures);
}

double ZScaler::apply_vix(double v) const {
    return (v - mean_(kNumFeatures + 1)) / std_(kNumFeatures + 1);
}

Eigen::VectorXd ZScaler::apply_vix(const Eigen::VectorXd& v) const {
    return (v.array() - mean_(kNumFeatures + 1)) / std_(kNumFeatures + 1);
}

double ZScaler::invert_y(double v) const { return v * std_(kNumFeatures) + mean_(kNumFeatures); }

double ZScaler::invert_vix(double v) const {
    return v * std_(kNumFeatures + 1) + mean_(kNumFeatures + 1);
}

Eigen::VectorXd ZScaler::invert_x(const Eigen::VectorXd& x) const {
    return x.array() * std_.head(kNumFeatures).array() + mean_.head(kNumFeatures).array();
}

}  // namespace regimevol::features
