#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace regimevol::gbt {

struct GBTParams {
    int n_estimators = 100;
    int max_depth = 5;
    double learning_rate = 0.1;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double gamma = 0.0;       // minimum split gain
    double reg_alpha = 0.0;   // L1 on leaf weights
    double reg_lambda = 1.0;  // L2 on leaf weights
};

// One regression tree over leaf scores, stored as flat node arrays.
struct Tree {
    std::vector<int> feature;     // split feature, -1 for leaves
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;    // leaf score (learning rate already applied)

    double score(const Eigen::VectorXd& x) const;
    int depth() const;
};

class GBTModel {
public:
    // Second-order boosting with a softmax objective, one tree per class per
    // round, exact greedy splits. A single-class label set produces a flagged
    // degenerate model that always emits probability 1.
    static GBTModel train(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                          const GBTParams& params, std::uint64_t seed);

    Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const;
    int predict(const Eigen::VectorXd& x) const;  // argmax, lowest class index on ties

    const std::vector<int>& classes() const { return classes_; }
    bool degenerate() const { return degenerate_; }
    bool few_rows_warning() const { return few_rows_warning_; }
    Eigen::Index n_features() const { return n_features_; }

    // Softmax cross-entropy on the training set after each boosting round
    // (filled during train; used by the monotone-loss property check).
    const std::vector<double>& training_loss() const { return training_loss_; }

    std::string to_json() const;
    static GBTModel from_json(const std::string& text);

private:
    std::vector<std::vector<Tree>> rounds_;  // rounds_[r][c]
    std::vector<int> classes_;
    Eigen::Index n_features_ = 0;
    bool degenerate_ = false;
    bool few_rows_warning_ = false;
    std::vector<double> training_loss_;
};

struct SearchSpace {
    std::vector<int> n_estimators = {50, 100, 200, 300};
    std::vector<int> max_depth = {3, 5, 7, 10};
    std::vector<double> learning_rate;      // linspace(0.01, 0.3, 10)
    std::vector<double> subsample;          // linspace(0.6, 1.0, 5)
    std::vector<double> colsample_bytree;   // linspace(0.6, 1.0, 5)
    std::vector<double> gamma = {0.0, 0.1, 0.2, 0.3};
    std::vector<double> reg_alpha = {0.0, 0.01, 0.1, 1.0};
    std::vector<double> reg_lambda = {1.0, 1.5, 2.0, 3.0};

    static SearchSpace standard();
};

struct SearchResult {
    GBTParams best;
    std::vector<GBTParams> candidates;
    std::vector<double> scores;  // mean fold accuracy per candidate
    int folds = 3;
    bool single_class_fold = false;  // some validation fold held one class only
};

// Uniform draws over the grid, scored by mean accuracy across time-ordered
// contiguous folds. Deterministic given seed; ties keep the earliest draw.
SearchResult random_search(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                           const SearchSpace& space, int n_iter, int folds, std::uint64_t seed);

}  // namespace regimevol::gbt
