#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "solarscan/errors.hpp"
#include "solarscan/eval.hpp"

namespace solarscan {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

SplitResult stratified_split(const std::vector<int>& labels, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgumentError("train_fraction must be in (0,1)");
    }
    std::array<std::vector<std::size_t>, kNumDefectClasses> per_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= kNumDefectClasses) {
            throw ArgumentError("label out of range");
        }
        per_class[labels[i]].push_back(i);
    }
    SplitResult res;
    for (auto& members : per_class) {
        rng.shuffle(members);
        // tiny epsilon so fractions like 0.7 * 170 floor to the intended 119
        // despite 0.7 being slightly below 7/10 in binary
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(members.size()) + 1e-9));
        if (n_train == 0 && members.size() >= 2) n_train = 1;
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < n_train ? res.train : res.test).push_back(members[i]);
        }
    }
    std::sort(res.train.begin(), res.train.end());
    std::sort(res.test.begin(), res.test.end());
    return res;
}

std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses> confusion_matrix(
    const std::vector<int>& true_labels, const std::vector<int>& predicted_labels) {
    if (true_labels.size() != predicted_labels.size()) {
        throw ArgumentError("label vectors must have equal length");
    }
    std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses> m{};
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i];
        const int p = predicted_labels[i];
        if (t < 0 || t >= kNumDefectClasses || p < 0 || p >= kNumDefectClasses) {
            throw ArgumentError("class code out of range");
        }
        m[t][p]++;
    }
    return m;
}

double macro_f1(
    const std::array<std::array<std::size_t, kNumDefectClasses>, kNumDefectClasses>& confusion) {
    double sum = 0.0;
    for (int c = 0; c < kNumDefectClasses; ++c) {
        std::size_t tp = confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < kNumDefectClasses; ++o) {
            if (o == c) continue;
            fp += confusion[o][c];
            fn += confusion[c][o];
        }
        const double precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        sum += f1;
    }
    return sum / kNumDefectClasses;
}

std::optional<double> binary_auc(const std::vector<double>& scores,
                                 const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) {
        throw ArgumentError("scores and labels must have equal length");
    }
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (bool p : positive) n_pos += p ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        return std::nullopt;
    }

    // Rank-sum with midranks for ties: AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg)
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (positive[order[k]]) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::array<std::optional<double>, kNumDefectClasses> roc_auc_ovr(
    const std::vector<double>& scores, const std::vector<int>& true_labels) {
    const std::size_t n = true_labels.size();
    if (scores.size() != n * kNumDefectClasses) {
        throw ArgumentError("scores must be N x 9 row-major");
    }
    std::array<std::optional<double>, kNumDefectClasses> out{};
    for (int c = 0; c < kNumDefectClasses; ++c) {
        std::vector<double> col(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores[i * kNumDefectClasses + c];
            pos[i] = true_labels[i] == c;
        }
        out[c] = binary_auc(col, pos);
    }
    return out;
}

EvaluationReport build_report(const std::vector<int>& true_labels,
                              const std::vector<int>& predicted_labels,
                              const std::vector<double>& scores) {
    EvaluationReport rep;
    rep.n_samples = true_labels.size();
    rep.confusion = confusion_matrix(true_labels, predicted_labels);
    if (rep.n_samples == 0) {
        rep.degenerate_metrics = true;
        return rep;
    }
    std::size_t trace = 0;
    for (int c = 0; c < kNumDefectClasses; ++c) trace += rep.confusion[c][c];
    rep.accuracy = static_cast<double>(trace) / static_cast<double>(rep.n_samples);

    double f1_sum = 0.0;
    for (int c = 0; c < kNumDefectClasses; ++c) {
        std::size_t tp = rep.confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < kNumDefectClasses; ++o) {
            if (o == c) continue;
            fp += rep.confusion[o][c];
            fn += rep.confusion[c][o];
        }
        if (tp + fp == 0 || tp + fn == 0) rep.degenerate_metrics = true;
        rep.per_class_precision[c] = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
        rep.per_class_recall[c] = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double p = rep.per_class_precision[c];
        const double r = rep.per_class_recall[c];
        rep.per_class_f1[c] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        f1_sum += rep.per_class_f1[c];
    }
    rep.macro_f1 = f1_sum / kNumDefectClasses;
    if (!scores.empty()) {
        rep.per_class_auc = roc_auc_ovr(scores, true_labels);
    }
    return rep;
}

EvaluationReport evaluate(const ViTModel& model, const std::vector<LabeledImage>& test_set) {
    if (test_set.empty()) {
        throw ArgumentError("test set is empty");
    }
    std::vector<int> truth, pred;
    std::vector<double> scores;
    truth.reserve(test_set.size());
    pred.reserve(test_set.size());
    scores.reserve(test_set.size() * kNumDefectClasses);
    for (const auto& item : test_set) {
        const Prediction p = predict(model, item.image);
        truth.push_back(item.label);
        pred.push_back(static_cast<int>(p.defect));
        scores.insert(scores.end(), p.probabilities.begin(), p.probabilities.end());
    }
    return build_report(truth, pred, scores);
}

std::string report_human_table(const EvaluationReport& rep) {
    std::ostringstream os;
    os << "samples: " << rep.n_samples << "\n";
    os << "accuracy: " << fmt(rep.accuracy) << "\n";
    os << "macro_f1: " << fmt(rep.macro_f1) << "\n\n";
    os << "class              precision  recall     f1         auc\n";
    for (int c = 0; c < kNumDefectClasses; ++c) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-18s %-10.6f %-10.6f %-10.6f %s\n",
                      defect_class_names()[c].c_str(), rep.per_class_precision[c],
                      rep.per_class_recall[c], rep.per_class_f1[c],
                      rep.per_class_auc[c] ? fmt(*rep.per_class_auc[c]).c_str() : "n/a");
        os << line;
    }
    os << "\nconfusion (rows = true, cols = predicted):\n";
    for (int t = 0; t < kNumDefectClasses; ++t) {
        for (int p = 0; p < kNumDefectClasses; ++p) {
            os << rep.confusion[t][p] << (p + 1 < kNumDefectClasses ? " " : "\n");
        }
    }
    return os.str();
}

std::string report_machine_text(const EvaluationReport& rep) {
    std::ostringstream os;
    os << "n_samples = " << rep.n_samples << "\n";
    os << "accuracy = " << fmt(rep.accuracy) << "\n";
    os << "macro_f1 = " << fmt(rep.macro_f1) << "\n";
    os << "degenerate_metrics = " << (rep.degenerate_metrics ? 1 : 0) << "\n";
    for (int c = 0; c < kNumDefectClasses; ++c) {
        const std::string& name = defect_class_names()[c];
        os << "precision." << name << " = " << fmt(rep.per_class_precision[c]) << "\n";
        os << "recall." << name << " = " << fmt(rep.per_class_recall[c]) << "\n";
        os << "f1." << name << " = " << fmt(rep.per_class_f1[c]) << "\n";
        os << "auc." << name << " = "
           << (rep.per_class_auc[c] ? fmt(*rep.per_class_auc[c]) : std::string("absent"))
           << "\n";
    }
    for (int t = 0; t < kNumDefectClasses; ++t) {
        os << "confusion.row" << t << " =";
        for (int p = 0; p < kNumDefectClasses; ++p) {
            os << " " << rep.confusion[t][p];
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace solarscan
