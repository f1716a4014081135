#include "regimevol/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "regimevol/rng.hpp"

namespace regimevol::gbt {

namespace {

constexpr double kHessianFloor = 1e-16;

double threshold_l1(double g, double alpha) {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

double leaf_objective(double g, double h, const GBTParams& p) {
    const double t = threshold_l1(g, p.reg_alpha);
    return t * t / (h + p.reg_lambda);
}

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& grad;
    const Eigen::VectorXd& hess;
    const GBTParams& params;
    const std::vector<int>& columns;  // features available to this tree
    Tree tree;

    int build(std::vector<int>& rows, int depth) {
        double g = 0.0, h = 0.0;
        for (int r : rows) {
            g += grad(r);
            h += hess(r);
        }
        const int node = static_cast<int>(tree.feature.size());
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.value.push_back(0.0);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        const double parent_obj = leaf_objective(g, h, params);

        if (depth < params.max_depth && rows.size() >= 2) {
            for (int f : columns) {
                std::sort(rows.begin(), rows.end(), [&](int a, int b) {
                    return x(a, f) != x(b, f) ? x(a, f) < x(b, f) : a < b;
                });
                double gl = 0.0, hl = 0.0;
                for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
                    gl += grad(rows[i]);
                    hl += hess(rows[i]);
                    if (x(rows[i], f) == x(rows[i + 1], f)) continue;  // not a valid cut
                    const double gain = 0.5 * (leaf_objective(gl, hl, params) +
                                               leaf_objective(g - gl, h - hl, params) - parent_obj) -
                                        params.gamma;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = f;
                        best_threshold = 0.5 * (x(rows[i], f) + x(rows[i + 1], f));
                    }
                }
            }
        }

        if (best_feature < 0) {
            tree.value[node] = -params.learning_rate * threshold_l1(g, params.reg_alpha) /
                               (h + params.reg_lambda);
            return node;
        }
        std::vector<int> left_rows, right_rows;
        for (int r : rows) {
            (x(r, best_feature) < best_threshold ? left_rows : right_rows).push_back(r);
        }
        tree.feature[node] = best_feature;
        tree.threshold[node] = best_threshold;
        tree.left[node] = build(left_rows, depth + 1);
        tree.right[node] = build(right_rows, depth + 1);
        return node;
    }
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd p(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double mx = scores.row(i).maxCoeff();
        Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
        p.row(i) = (e / e.sum()).matrix();
    }
    return p;
}

std::vector<int> sample_without_replacement(std::size_t n, std::size_t take, std::mt19937_64& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < take; ++i) {  // partial Fisher-Yates
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

double Tree::score(const Eigen::VectorXd& x) const {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
        node = x(feature[static_cast<std::size_t>(node)]) <
                       threshold[static_cast<std::size_t>(node)]
                   ? left[static_cast<std::size_t>(node)]
                   : right[static_cast<std::size_t>(node)];
    }
    return value[static_cast<std::size_t>(node)];
}

int Tree::depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int max_depth = 0;
    while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        max_depth = std::max(max_depth, d);
        if (feature[static_cast<std::size_t>(node)] >= 0) {
            stack.push_back({left[static_cast<std::size_t>(node)], d + 1});
            stack.push_back({right[static_cast<std::size_t>(node)], d + 1});
        }
    }
    return max_depth;
}

GBTModel GBTModel::train(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                         const GBTParams& params, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n == 0 || labels.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("gbt::train: label count must match row count and be nonzero");
    }
    GBTModel model;
    model.n_features_ = x.cols();
    std::vector<int> classes = labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    model.classes_ = classes;
    const int c = static_cast<int>(classes.size());
    model.few_rows_warning_ = n < std::max<Eigen::Index>(10, 5 * c);
    if (c == 1) {
        model.degenerate_ = true;
        return model;
    }

    std::map<int, int> class_index;
    for (int i = 0; i < c; ++i) class_index[classes[static_cast<std::size_t>(i)]] = i;
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        onehot(i, class_index.at(labels[static_cast<std::size_t>(i)])) = 1.0;
    }

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, c);
    std::mt19937_64 rng(seed);
    const std::size_t n_rows = static_cast<std::size_t>(n);
    const std::size_t n_cols = static_cast<std::size_t>(x.cols());
    const std::size_t take_rows =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.subsample * n_rows)));
    const std::size_t take_cols = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(params.colsample_bytree * n_cols)));

    model.rounds_.reserve(static_cast<std::size_t>(params.n_estimators));
    model.training_loss_.reserve(static_cast<std::size_t>(params.n_estimators));
    for (int round = 0; round < params.n_estimators; ++round) {
        const Eigen::MatrixXd p = softmax_rows(scores);
        std::vector<Tree> round_trees;
        round_trees.reserve(static_cast<std::size_t>(c));
        for (int cls = 0; cls < c; ++cls) {
            const Eigen::VectorXd grad = p.col(cls) - onehot.col(cls);
            const Eigen::VectorXd hess =
                (p.col(cls).array() * (1.0 - p.col(cls).array())).cwiseMax(kHessianFloor).matrix();
            std::vector<int> rows = take_rows == n_rows
                                        ? [&] {
                                              std::vector<int> all(n_rows);
                                              std::iota(all.begin(), all.end(), 0);
                                              return all;
                                          }()
                                        : sample_without_replacement(n_rows, take_rows, rng);
            std::vector<int> cols = take_cols == n_cols
                                        ? [&] {
                                              std::vector<int> all(n_cols);
                                              std::iota(all.begin(), all.end(), 0);
                                              return all;
                                          }()
                                        : sample_without_replacement(n_cols, take_cols, rng);
            TreeBuilder builder{x, grad, hess, params, cols, {}};
            builder.build(rows, 0);
            round_trees.push_back(std::move(builder.tree));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int cls = 0; cls < c; ++cls) {
                scores(i, cls) += round_trees[static_cast<std::size_t>(cls)].score(x.row(i));
            }
        }
        model.rounds_.push_back(std::move(round_trees));
        const Eigen::MatrixXd pn = softmax_rows(scores);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int cls = 0; cls < c; ++cls) {
                if (onehot(i, cls) > 0.0) loss -= std::log(std::max(pn(i, cls), 1e-300));
            }
        }
        model.training_loss_.push_back(loss / static_cast<double>(n));
    }
    return model;
}

Eigen::VectorXd GBTModel::predict_proba(const Eigen::VectorXd& x) const {
    if (x.size() != n_features_) {
        throw std::invalid_argument("gbt::predict_proba: expected " + std::to_string(n_features_) +
                                    " features, got " + std::to_string(x.size()));
    }
    const int c = static_cast<int>(classes_.size());
    if (degenerate_) {
        return Eigen::VectorXd::Ones(1);
    }
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(c);
    for (const auto& round : rounds_) {
        for (int cls = 0; cls < c; ++cls) {
            scores(cls) += round[static_cast<std::size_t>(cls)].score(x);
        }
    }
    const double mx = scores.maxCoeff();
    Eigen::ArrayXd e = (scores.array() - mx).exp();
    return (e / e.sum()).matrix();
}

int GBTModel::predict(const Eigen::VectorXd& x) const {
    if (degenerate_) return classes_.front();
    const Eigen::VectorXd p = predict_proba(x);
    int arg = 0;
    for (int i = 1; i < p.size(); ++i) {
        if (p(i) > p(arg)) arg = i;  // strict: ties keep the lowest class index
    }
    return classes_[static_cast<std::size_t>(arg)];
}

std::string GBTModel::to_json() const {
    nlohmann::json j;
    j["classes"] = classes_;
    j["n_features"] = n_features_;
    j["degenerate"] = degenerate_;
    j["rounds"] = nlohmann::json::array();
    for (const auto& round : rounds_) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& t : round) {
            jr.push_back({{"feature", t.feature},
                          {"threshold", t.threshold},
                          {"left", t.left},
                          {"right", t.right},
                          {"value", t.value}});
        }
        j["rounds"].push_back(std::move(jr));
    }
    return j.dump();
}

GBTModel GBTModel::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GBTModel m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.n_features_ = j.at("n_features").get<Eigen::Index>();
    m.degenerate_ = j.at("degenerate").get<bool>();
    for (const auto& jr : j.at("rounds")) {
        std::vector<Tree> round;
        for (const auto& jt : jr) {
            Tree t;
            t.feature = jt.at("feature").get<std::vector<int>>();
            t.threshold = jt.at("threshold").get<std::vector<double>>();
            t.left = jt.at("left").get<std::vector<int>>();
            t.right = jt.at("right").get<std::vector<int>>();
            t.value = jt.at("value").get<std::vector<double>>();
            round.push_back(std::move(t));
        }
        m.rounds_.push_back(std::move(round));
    }
    return m;
}

SearchSpace SearchSpace::standard() {
    SearchSpace s;
    s.learning_rate.resize(10);
    for (int i = 0; i < 10; ++i) {
        s.learning_rate[static_cast<std::size_t>(i)] = 0.01 + (0.3 - 0.01) * i / 9.0;
    }
    s.subsample.resize(5);
    s.colsample_bytree.resize(5);
    for (int i = 0; i < 5; ++i) {
        s.subsample[static_cast<std::size_t>(i)] = 0.6 + 0.1 * i;
        s.colsample_bytree[static_cast<std::size_t>(i)] = 0.6 + 0.1 * i;
    }
    return s;
}

SearchResult random_search(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                           const SearchSpace& space, int n_iter, int folds, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n_iter < 1) {
        throw std::invalid_argument("random_search: n_iter must be >= 1");
    }
    if (folds < 2 || n < folds) {
        throw std::invalid_argument("random_search: need at least `folds` rows");
    }
    std::mt19937_64 rng(seed);
    SearchResult result;
    result.folds = folds;

    auto pick_int = [&](const std::vector<int>& grid) {
        return grid[uniform_index(rng, grid.size())];
    };
    auto pick_double = [&](const std::vector<double>& grid) {
        return grid[uniform_index(rng, grid.size())];
    };
    for (int i = 0; i < n_iter; ++i) {
        GBTParams p;
        p.n_estimators = pick_int(space.n_estimators);
        p.max_depth = pick_int(space.max_depth);
        p.learning_rate = pick_double(space.learning_rate);
        p.subsample = pick_double(space.subsample);
        p.colsample_bytree = pick_double(space.colsample_bytree);
        p.gamma = pick_double(space.gamma);
        p.reg_alpha = pick_double(space.reg_alpha);
        p.reg_lambda = pick_double(space.reg_lambda);
        result.candidates.push_back(p);
    }

    // contiguous time-ordered folds: fold f validates rows [f*n/folds, (f+1)*n/folds)
    std::vector<std::pair<Eigen::Index, Eigen::Index>> fold_ranges;
    for (int f = 0; f < folds; ++f) {
        fold_ranges.emplace_back(n * f / folds, n * (f + 1) / folds);
    }

    for (std::size_t cand = 0; cand < result.candidates.size(); ++cand) {
        const auto& p = result.candidates[cand];
        double acc_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            const auto [vb, ve] = fold_ranges[static_cast<std::size_t>(f)];
            const Eigen::Index vn = ve - vb;
            const Eigen::Index tn = n - vn;
            Eigen::MatrixXd xt(tn, x.cols());
            std::vector<int> lt;
            lt.reserve(static_cast<std::size_t>(tn));
            Eigen::Index r = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i >= vb && i < ve) continue;
                xt.row(r++) = x.row(i);
                lt.push_back(labels[static_cast<std::size_t>(i)]);
            }
            std::vector<int> vl(labels.begin() + vb, labels.begin() + ve);
            if (std::adjacent_find(vl.begin(), vl.end(), std::not_equal_to<>()) == vl.end()) {
                result.single_class_fold = true;
            }
            const auto model = GBTModel::train(xt, lt, p, derive_seed(seed, cand * 101 + static_cast<std::size_t>(f)));
            Eigen::Index correct = 0;
            for (Eigen::Index i = vb; i < ve; ++i) {
                if (model.predict(x.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
            }
            acc_sum += vn > 0 ? static_cast<double>(correct) / static_cast<double>(vn) : 0.0;
        }
        result.scores.push_back(acc_sum / folds);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.scores.size(); ++i) {
        if (result.scores[i] > result.scores[best]) best = i;
    }
    result.best = result.candidates[best];
    return result;
}

}  // namespace regimevol::gbt
