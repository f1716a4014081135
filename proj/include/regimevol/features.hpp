#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "regimevol/dates.hpp"
#include "regimevol/ingest.hpp"

namespace regimevol::features {

// RV_t = sqrt((N/n) * sum r^2), length-adjusted for short sessions.
double realized_volatility(const std::vector<double>& returns, int full_day_count);

// Trailing mean over `window` points; the first window-1 entries are NaN.
std::vector<double> rolling_mean(const std::vector<double>& series, int window);

// n * sum r^4 / (sum r^2)^2 with n the day's own return count.
double realized_kurtosis(const std::vector<double>& returns);

// Realized variance minus bipower variation, both on the variance scale and
// length-adjusted by N/n. Not floored at zero.
double jump_variation(const std::vector<double>& returns, int full_day_count);

// Column order of every design matrix in the engine.
inline constexpr int kNumFeatures = 8;
inline constexpr int kRvDaily = 0;
inline constexpr int kRvWeekly = 1;
inline constexpr int kRvMonthly = 2;
inline constexpr int kVixDaily = 3;
inline constexpr int kVixWeekly = 4;
inline constexpr int kVixMonthly = 5;
inline constexpr int kKurtosis = 6;
inline constexpr int kJump = 7;
inline constexpr int kWeeklyWindow = 5;
inline constexpr int kMonthlyWindow = 22;

const std::vector<std::string>& feature_names();

struct FeatureFrame {
    std::vector<Date> dates;   // target dates
    Eigen::VectorXd y;         // RV_t
    Eigen::MatrixXd x;         // rows aligned with y, kNumFeatures columns, all lagged one day
    Eigen::VectorXd vix_now;   // VIX_t (same date as y); target of the auxiliary VIX model only

    Eigen::Index rows() const { return y.size(); }
};

// Every regressor is dated t-1; rows without a full 22-day lag history are dropped.
FeatureFrame build_frame(const ingest::AlignedSeries& aligned);

void dump_frame(const FeatureFrame& frame, const std::string& path);

// Z-score transform fitted on a training slice; population (1/n) standard
// deviation. Columns: the eight regressors, then y, then vix_now.
class ZScaler {
public:
    static ZScaler fit(const FeatureFrame& frame, Eigen::Index begin, Eigen::Index len);

    Eigen::VectorXd apply_x(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd apply_x(const Eigen::MatrixXd& x) const;
    double apply_feature(int column, double v) const;
    double apply_y(double v) const;
    Eigen::VectorXd apply_y(const Eigen::VectorXd& y) const;
    double apply_vix(double v) const;
    Eigen::VectorXd apply_vix(const Eigen::VectorXd& v) const;

    double invert_y(double v) const;
    double invert_vix(double v) const;
    Eigen::VectorXd invert_x(const Eigen::VectorXd& x) const;

    double y_mean() const { return mean_[kNumFeatures]; }
    double y_std() const { return std_[kNumFeatures]; }

private:
    // layout: [features..., y, vix_now]
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

}  // namespace regimevol::features
