#include <algorithm>
#include <cmath>
#include <numeric>

#include "solarscan/errors.hpp"
#include "solarscan/severity.hpp"

namespace solarscan {

namespace {

using FeatureRow = std::array<double, kFeatureCount>;

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double sse = 0.0;
};

// Weighted child sum-of-squared-errors for every midpoint threshold of one
// feature; returns the best threshold for that feature.
SplitChoice best_split_for_feature(const std::vector<FeatureRow>& X,
                                   const std::vector<double>& y,
                                   const std::vector<std::size_t>& idx, int f,
                                   int min_samples_leaf) {
    const std::size_t n = idx.size();
    std::vector<std::size_t> order(idx);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X[a][f] < X[b][f];
    });

    // prefix sums over the sorted order
    std::vector<double> psum(n + 1, 0.0), psq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        psum[i + 1] = psum[i] + y[order[i]];
        psq[i + 1] = psq[i] + y[order[i]] * y[order[i]];
    }

    SplitChoice best;
    for (std::size_t i = 1; i < n; ++i) {
        if (X[order[i]][f] == X[order[i - 1]][f]) continue;  // no boundary here
        const std::size_t nl = i, nr = n - i;
        if (nl < static_cast<std::size_t>(min_samples_leaf) ||
            nr < static_cast<std::size_t>(min_samples_leaf)) {
            continue;
        }
        const double sl = psum[i], sr = psum[n] - psum[i];
        const double ql = psq[i], qr = psq[n] - psq[i];
        const double sse = (ql - sl * sl / nl) + (qr - sr * sr / nr);
        const double thr = 0.5 * (X[order[i - 1]][f] + X[order[i]][f]);
        if (!best.found || sse < best.sse || (sse == best.sse && thr < best.threshold)) {
            best.found = true;
            best.feature = f;
            best.threshold = thr;
            best.sse = sse;
        }
    }
    return best;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<FeatureRow>& X, const std::vector<double>& y,
                const ForestConfig& cfg, Rng& rng)
        : X_(X), y_(y), cfg_(cfg), rng_(rng) {}

    RegressionTree build(std::vector<std::size_t> idx) {
        tree_ = RegressionTree{};
        grow(std::move(idx), 0);
        return std::move(tree_);
    }

private:
    int add_node() {
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        tree_.value.push_back(0.0);
        return static_cast<int>(tree_.feature.size()) - 1;
    }

    int grow(std::vector<std::size_t> idx, int depth) {
        const int node = add_node();
        const std::size_t n = idx.size();
        double sum = 0.0;
        for (std::size_t i : idx) sum += y_[i];
        const double mean = sum / static_cast<double>(n);
        tree_.value[node] = mean;

        double sse = 0.0;
        for (std::size_t i : idx) sse += (y_[i] - mean) * (y_[i] - mean);
        if (depth >= cfg_.max_depth || n < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf) ||
            sse <= 0.0) {
            return node;
        }

        // Sample the per-split feature subset, sorted so equal-quality ties
        // resolve to the lowest feature index.
        std::vector<int> feats(kFeatureCount);
        std::iota(feats.begin(), feats.end(), 0);
        rng_.shuffle(feats);
        feats.resize(std::min<std::size_t>(cfg_.features_per_split, kFeatureCount));
        std::sort(feats.begin(), feats.end());

        SplitChoice best;
        for (int f : feats) {
            SplitChoice cand = best_split_for_feature(X_, y_, idx, f, cfg_.min_samples_leaf);
            if (!cand.found) continue;
            if (!best.found || cand.sse < best.sse) {
                best = cand;
            }
        }
        if (!best.found) {
            return node;
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            (X_[i][best.feature] <= best.threshold ? left_idx : right_idx).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        tree_.feature[node] = best.feature;
        tree_.threshold[node] = best.threshold;
        tree_.left[node] = grow(std::move(left_idx), depth + 1);
        tree_.right[node] = grow(std::move(right_idx), depth + 1);
        return node;
    }

    const std::vector<FeatureRow>& X_;
    const std::vector<double>& y_;
    const ForestConfig& cfg_;
    Rng& rng_;
    RegressionTree tree_;
};

void check_training_data(const std::vector<FeatureRow>& X, const std::vector<double>& y) {
    if (X.empty()) {
        throw ArgumentError("training set is empty");
    }
    if (X.size() != y.size()) {
        throw ArgumentError("feature and target counts differ");
    }
    for (const auto& row : X) {
        for (double v : row) {
            if (!std::isfinite(v)) throw ArgumentError("non-finite feature value");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw ArgumentError("non-finite target value");
    }
}

}  // namespace

const char* severity_grade_name(SeverityGrade g) {
    switch (g) {
        case SeverityGrade::Nil: return "nil";
        case SeverityGrade::Minor: return "minor";
        default: return "major";
    }
}

int severity_grade_code(const std::string& name) {
    if (name == "nil") return 0;
    if (name == "minor") return 1;
    if (name == "major") return 2;
    return -1;
}

void ForestConfig::validate() const {
    if (n_trees < 1) throw ArgumentError("n_trees must be >= 1");
    if (max_depth < 1) throw ArgumentError("max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ArgumentError("min_samples_leaf must be >= 1");
    if (features_per_split < 1 || features_per_split > kFeatureCount) {
        throw ArgumentError("features_per_split must be in [1, 7]");
    }
}

double RegressionTree::predict(const FeatureRow& x) const {
    int node = 0;
    while (feature[node] >= 0) {
        node = x[feature[node]] <= threshold[node] ? left[node] : right[node];
    }
    return value[node];
}

RegressionTree fit_tree(const std::vector<FeatureRow>& X, const std::vector<double>& y,
                        const ForestConfig& cfg, Rng& rng) {
    cfg.validate();
    check_training_data(X, y);
    std::vector<std::size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    return TreeBuilder(X, y, cfg, rng).build(std::move(idx));
}

RandomForestModel fit_forest(const std::vector<FeatureRow>& X, const std::vector<double>& y,
                             const ForestConfig& cfg) {
    cfg.validate();
    check_training_data(X, y);
    RandomForestModel model;
    model.cfg = cfg;
    Rng master(cfg.seed);
    model.trees.reserve(cfg.n_trees);
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng tree_rng = master.split();
        std::vector<std::size_t> idx;
        if (cfg.bootstrap) {
            idx.resize(X.size());
            for (std::size_t& i : idx) {
                i = tree_rng.below(X.size());
            }
        } else {
            idx.resize(X.size());
            std::iota(idx.begin(), idx.end(), 0);
        }
        model.trees.push_back(TreeBuilder(X, y, cfg, tree_rng).build(std::move(idx)));
    }
    return model;
}

double predict_score(const RandomForestModel& model, const FeatureRow& x) {
    if (model.trees.empty()) {
        throw ArgumentError("forest has no trees");
    }
    double sum = 0.0;
    for (const auto& tree : model.trees) {
        sum += tree.predict(x);
    }
    return sum / static_cast<double>(model.trees.size());
}

double predict_score(const RandomForestModel& model, const FeatureVector& f) {
    return predict_score(model, f.as_array());
}

SeverityGrade grade(double score, double t1, double t2) {
    if (!(t1 < t2)) {
        throw ArgumentError("grade thresholds must satisfy t1 < t2");
    }
    if (score < t1) return SeverityGrade::Nil;
    if (score < t2) return SeverityGrade::Minor;
    return SeverityGrade::Major;
}

}  // namespace solarscan
