#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "solarscan/features.hpp"
#include "solarscan/rng.hpp"

namespace solarscan {

enum class SeverityGrade : int { Nil = 0, Minor = 1, Major = 2 };

const char* severity_grade_name(SeverityGrade g);
// Returns -1 for unknown names; accepts "nil"/"minor"/"major".
int severity_grade_code(const std::string& name);

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 12;
    int min_samples_leaf = 2;
    int features_per_split = 3;  // ~ sqrt(7) rounded up
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// Flattened CART regression tree; feature < 0 marks a leaf.
struct RegressionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    std::size_t node_count() const { return feature.size(); }
    double predict(const std::array<double, kFeatureCount>& x) const;
};

struct RandomForestModel {
    ForestConfig cfg;
    std::vector<RegressionTree> trees;
    double grade_t1 = 0.5;
    double grade_t2 = 1.5;
};

// Greedy variance-reduction CART fit. Candidate thresholds are midpoints of
// consecutive sorted unique values; ties break to the lowest feature index,
// then the smallest threshold.
RegressionTree fit_tree(const std::vector<std::array<double, kFeatureCount>>& X,
                        const std::vector<double>& y, const ForestConfig& cfg, Rng& rng);

RandomForestModel fit_forest(const std::vector<std::array<double, kFeatureCount>>& X,
                             const std::vector<double>& y, const ForestConfig& cfg);

double predict_score(const RandomForestModel& model, const FeatureVector& f);
double predict_score(const RandomForestModel& model,
                     const std::array<double, kFeatureCount>& x);

SeverityGrade grade(double score, double t1 = 0.5, double t2 = 1.5);

}  // namespace solarscan
