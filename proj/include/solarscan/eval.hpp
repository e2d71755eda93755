#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "solarscan/rng.hpp"
#include "solarscan/severity.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

struct EvaluationReport {
    std::size_t n_samples = 0;
    double accuracy = 0.0;
    std::array<double, kNumDefectClasses> per_class_precision{};
    std::array<double, kNumDefectClasses> per_class_recall{};
    std::array<double, kNumDefectClasses> per_class_f1{};
    double macro_f1 = 0.0;
    // rows = true class, columns = predicted class
    std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses> confusion{};
    // absent when a class has no positives or no negatives in the test set
    std::array<std::optional<double>, kNumDefectClasses> per_class_auc{};
    // set when a zero-denominator convention (precision/recall/f1 := 0) fired
    bool degenerate_metrics = false;
};

struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Per-class shuffle, floor(train_fraction * n_c) into training (at least one
// when a class has two or more items). Disjoint and covering.
SplitResult stratified_split(const std::vector<int>& labels, double train_fraction, Rng& rng);

std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses> confusion_matrix(
    const std::vector<int>& true_labels, const std::vector<int>& predicted_labels);

double macro_f1(
    const std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses>& confusion);

// One-vs-rest Mann-Whitney AUC per class over the class's score column.
// scores is N x num_classes, row-major.
std::array<std::optional<double>, kNumDefectClasses> roc_auc_ovr(
    const std::vector<double>& scores, const std::vector<int>& true_labels);

// Binary Mann-Whitney AUC: (concordant + tied/2) / (pos * neg).
std::optional<double> binary_auc(const std::vector<double>& scores,
                                 const std::vector<bool>& positive);

EvaluationReport evaluate(const ViTModel& model, const std::vector<LabeledImage>& test_set);

// Builds the report from already-computed predictions and scores.
EvaluationReport build_report(const std::vector<int>& true_labels,
                              const std::vector<int>& predicted_labels,
                              const std::vector<double>& scores);

std::string report_human_table(const EvaluationReport& report);
std::string report_machine_text(const EvaluationReport& report);

}  // namespace solarscan
