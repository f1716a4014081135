#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regimevol/coefcluster.hpp"
#include "regimevol/features.hpp"
#include "regimevol/gbt.hpp"
#include "regimevol/hmm.hpp"
#include "regimevol/linmod.hpp"
#include "regimevol/otcluster.hpp"
#include "regimevol/segment.hpp"

namespace regimevol::forecast {

enum class Family { Har, Markov, DistCluster, CoefCluster };
enum class Mode { NonRecursive, SingleRecursive, DualRecursive };

Family family_from_string(const std::string& s);
std::string to_string(Family f);
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct WindowSpec {
    int train_len = 441;
    int horizon = 5;
    int step = 0;  // 0 means advance by `horizon` (non-overlapping blocks)

    int effective_step() const { return step > 0 ? step : horizon; }
};

struct ModelSpec {
    std::string name;  // report label; defaults to the family string
    Family family = Family::Har;
    int k = 1;  // regimes; forced to 1 for Har
    Mode mode = Mode::NonRecursive;

    hmm::FitOptions hmm_options;
    segment::ChangePointOptions segment_options;
    std::size_t ot_cap = 200;
    double kernel_sigma = 0.0;  // 0 -> median heuristic
    double pca_var_threshold = 0.90;

    int search_iterations = 20;
    int search_folds = 3;
    bool freeze_search = false;  // tune on the first window only

    std::string label() const { return name.empty() ? to_string(family) : name; }
};

// Regressor columns the family actually fits on: recursive modes keep only
// the forecastable lags, the coefficient family drops jump variation.
std::vector<int> regressor_columns(Family family, Mode mode);
// Joint-distribution columns used by the distributional clustering step.
std::vector<int> cluster_columns(Family family, Mode mode);

struct FittedFamily {
    Family family = Family::Har;
    Mode mode = Mode::NonRecursive;
    std::vector<int> columns;
    std::vector<int> cluster_cols;
    features::ZScaler scaler;
    int n_regimes = 1;

    std::vector<linmod::LinearFit> fits;      // one per regime
    std::vector<linmod::LinearFit> vix_fits;  // dual-recursive auxiliary models

    hmm::GaussianHMM hmm_model;  // markov only
    Eigen::VectorXd gamma_last;

    segment::SegmentSet segments;        // clustering families
    std::vector<int> segment_labels;     // dist: cluster id per segment
    Eigen::MatrixXd responsibilities;    // coef: per segment row
    gbt::GBTModel classifier;            // dist (hard) / coef (soft)
    std::optional<gbt::GBTParams> classifier_params;

    int ols_fallbacks = 0;  // sparse/singular regimes refit on the full window

    Eigen::VectorXd subset(const Eigen::VectorXd& x_scaled) const;
};

// Fits one family on frame rows [begin, begin+len). `frozen` short-circuits
// the classifier hyperparameter search.
FittedFamily fit_family(const features::FeatureFrame& frame, Eigen::Index begin, Eigen::Index len,
                        const ModelSpec& spec, std::uint64_t seed,
                        const std::optional<gbt::GBTParams>& frozen = std::nullopt);

// Regime probabilities used for an h-step-ahead prediction at features x
// (already scaled and restricted to `columns`).
Eigen::VectorXd regime_probabilities(const FittedFamily& fitted, const Eigen::VectorXd& x_sub,
                                     int horizon);

// Blended prediction in scaled units plus the probabilities that produced it.
struct Prediction {
    double y_scaled = 0.0;
    Eigen::VectorXd probs;
};
Prediction predict_step(const FittedFamily& fitted, const Eigen::VectorXd& x_sub, int horizon);

// Multi-step recursion from the raw RV/VIX history ending at the window end.
// Only the histories are consulted: realized values after the window cannot
// leak in because they are never passed.
struct StepForecast {
    double y_raw = 0.0;
    Eigen::VectorXd probs;
};
std::vector<StepForecast> recursive_forecast(const FittedFamily& fitted,
                                             std::span<const double> rv_history,
                                             std::span<const double> vix_history, int h_max);

struct ForecastRecord {
    Date date;
    double y_true = 0.0;
    double y_pred = 0.0;
    Eigen::VectorXd regime_probs;
    int window_id = 0;
};

// Rolling-window backtest over targets dated in [period_start, period_end).
// Refit every `step` rows; each refit emits `horizon` forecasts. Deterministic
// given seed (per-window seeds are derived, so threading cannot reorder results).
std::vector<ForecastRecord> run_backtest(const features::FeatureFrame& frame, const ModelSpec& spec,
                                         const WindowSpec& window, const Date& period_start,
                                         const Date& period_end, std::uint64_t seed,
                                         int threads = 1);

void dump_records(const std::vector<ForecastRecord>& records, int k, const std::string& path);

}  // namespace regimevol::forecast
