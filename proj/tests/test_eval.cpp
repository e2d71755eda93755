#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "solarscan/errors.hpp"
#include "solarscan/eval.hpp"

using namespace solarscan;

namespace {

// O(n^2) pair-counting reference: AUC = (concordant + ties/2) / (pos * neg).
double pair_counting_auc(const std::vector<double>& scores, const std::vector<bool>& pos) {
    double concordant = 0.0, tied = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (pos[i]) {
            ++n_pos;
        } else {
            ++n_neg;
            continue;
        }
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (pos[j]) continue;
            if (scores[i] > scores[j]) {
                concordant += 1.0;
            } else if (scores[i] == scores[j]) {
                tied += 1.0;
            }
        }
    }
    return (concordant + 0.5 * tied) / (static_cast<double>(n_pos) * n_neg);
}

}  // namespace

TEST_CASE("stratified_split produces a 1050/450 partition of 1500 items") {
    // class counts are multiples of 10 so floor(0.7 * n_c) is exact per class
    const std::vector<std::size_t> counts = {170, 170, 170, 170, 170, 170, 170, 160, 150};
    std::vector<int> labels;
    for (int c = 0; c < 9; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) labels.push_back(c);
    }
    REQUIRE(labels.size() == 1500);
    Rng rng(42);
    SplitResult split = stratified_split(labels, 0.7, rng);
    CHECK(split.train.size() == 1050);
    CHECK(split.test.size() == 450);

    // disjoint and covering
    std::set<std::size_t> seen;
    for (std::size_t i : split.train) seen.insert(i);
    for (std::size_t i : split.test) seen.insert(i);
    CHECK(seen.size() == 1500);

    // per-class proportions hold exactly
    for (int c = 0; c < 9; ++c) {
        std::size_t in_train = 0;
        for (std::size_t i : split.train) in_train += labels[i] == c ? 1 : 0;
        CHECK(in_train == static_cast<std::size_t>(0.7 * static_cast<double>(counts[c]) + 0.5));
    }
}

TEST_CASE("stratified_split small cases") {
    std::vector<int> labels(10, 4);
    Rng rng(1);
    SplitResult s = stratified_split(labels, 0.7, rng);
    CHECK(s.train.size() == 7);
    CHECK(s.test.size() == 3);

    // a 2-member class keeps at least one item in training
    Rng rng2(1);
    SplitResult tiny = stratified_split({3, 3}, 0.3, rng2);
    CHECK(tiny.train.size() == 1);
    CHECK(tiny.test.size() == 1);

    // a singleton class goes entirely to test
    Rng rng3(1);
    SplitResult single = stratified_split({5}, 0.7, rng3);
    CHECK(single.train.empty());
    CHECK(single.test.size() == 1);

    Rng rng4(1);
    CHECK_THROWS_AS(stratified_split({0}, 1.0, rng4), ArgumentError);
    CHECK_THROWS_AS(stratified_split({9}, 0.7, rng4), ArgumentError);
}

TEST_CASE("stratified_split is deterministic per seed") {
    std::vector<int> labels;
    for (int c = 0; c < 9; ++c) {
        for (int i = 0; i < 11; ++i) labels.push_back(c);
    }
    Rng a(7), b(7);
    SplitResult sa = stratified_split(labels, 0.7, a);
    SplitResult sb = stratified_split(labels, 0.7, b);
    CHECK(sa.train == sb.train);
    CHECK(sa.test == sb.test);
}

TEST_CASE("confusion_matrix hand counts") {
    const std::vector<int> truth = {0, 0, 1, 2, 2, 2};
    const std::vector<int> pred = {0, 1, 1, 2, 2, 0};
    auto m = confusion_matrix(truth, pred);
    CHECK(m[0][0] == 1);
    CHECK(m[0][1] == 1);
    CHECK(m[1][1] == 1);
    CHECK(m[2][2] == 2);
    CHECK(m[2][0] == 1);
    std::size_t total = 0;
    for (const auto& row : m) {
        for (std::size_t v : row) total += v;
    }
    CHECK(total == 6);

    CHECK_THROWS_AS(confusion_matrix({0}, {0, 1}), ArgumentError);
    CHECK_THROWS_AS(confusion_matrix({0}, {9}), ArgumentError);
}

TEST_CASE("macro_f1 fixtures") {
    // perfect predictions over all nine classes
    std::vector<int> truth, pred;
    for (int c = 0; c < 9; ++c) {
        truth.push_back(c);
        pred.push_back(c);
    }
    CHECK(macro_f1(confusion_matrix(truth, pred)) == doctest::Approx(1.0));

    // hand-computed: classes 0 and 1 each get F1 = 2/3, the seven classes
    // with no support contribute 0, so macro F1 = (2/3 + 2/3)/9 = 4/27
    auto m = confusion_matrix({0, 0, 1}, {0, 1, 1});
    CHECK(macro_f1(m) == doctest::Approx(4.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("binary_auc fixtures") {
    // perfect separation
    CHECK(*binary_auc({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) ==
          doctest::Approx(1.0));
    // perfectly inverted
    CHECK(*binary_auc({0.9, 0.8, 0.2, 0.1}, {false, false, true, true}) ==
          doctest::Approx(0.0));
    // all scores tied
    CHECK(*binary_auc({0.5, 0.5, 0.5, 0.5}, {true, false, true, false}) ==
          doctest::Approx(0.5));
    // hand count: 3 of 4 pos-neg pairs concordant
    CHECK(*binary_auc({0.1, 0.4, 0.5, 0.8}, {false, true, false, true}) ==
          doctest::Approx(0.75));
    // ties at 0.2 contribute half credit: (2 + 2*0.5)/4 = 0.75
    CHECK(*binary_auc({0.2, 0.2, 0.2, 0.5}, {true, false, false, true}) ==
          doctest::Approx(0.75));

    CHECK(!binary_auc({0.5, 0.6}, {true, true}).has_value());
    CHECK(!binary_auc({0.5, 0.6}, {false, false}).has_value());
    CHECK_THROWS_AS(binary_auc({0.5}, {true, false}), ArgumentError);
}

TEST_CASE("binary_auc matches pair counting on random tied data") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 30;
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        bool any_pos = false, any_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(8)) / 8.0;  // deliberate ties
            pos[i] = rng.bernoulli(0.4);
            (pos[i] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;
        const double expect = pair_counting_auc(scores, pos);
        CHECK(std::abs(*binary_auc(scores, pos) - expect) < 1e-12);

        // invariance under a strictly monotone transform
        std::vector<double> warped(n);
        for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * scores[i]) - 1.0;
        CHECK(std::abs(*binary_auc(warped, pos) - expect) < 1e-12);
    }
}

TEST_CASE("roc_auc_ovr handles absent classes") {
    // three samples, labels 0/0/1: classes >= 2 have no positives
    std::vector<int> truth = {0, 0, 1};
    std::vector<double> scores(3 * 9, 0.1);
    scores[0 * 9 + 0] = 0.9;
    scores[1 * 9 + 0] = 0.8;
    scores[2 * 9 + 1] = 0.7;
    auto aucs = roc_auc_ovr(scores, truth);
    CHECK(aucs[0].has_value());
    CHECK(*aucs[0] == doctest::Approx(1.0));
    CHECK(aucs[1].has_value());
    for (int c = 2; c < 9; ++c) CHECK(!aucs[c].has_value());

    CHECK_THROWS_AS(roc_auc_ovr({0.0}, truth), ArgumentError);
}

TEST_CASE("build_report on a 12-sample hand fixture") {
    // classes 0,1,2 with four samples each; one error per class pair
    const std::vector<int> truth = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    const std::vector<int> pred = {0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 0};
    std::vector<double> scores(12 * 9, 0.0);
    for (int i = 0; i < 12; ++i) scores[i * 9 + pred[i]] = 1.0;

    EvaluationReport rep = build_report(truth, pred, scores);
    CHECK(rep.n_samples == 12);
    CHECK(rep.accuracy == doctest::Approx(9.0 / 12.0));
    // every class: tp=3, fp=1, fn=1 -> precision = recall = f1 = 0.75
    for (int c = 0; c < 3; ++c) {
        CHECK(rep.per_class_precision[c] == doctest::Approx(0.75));
        CHECK(rep.per_class_recall[c] == doctest::Approx(0.75));
        CHECK(rep.per_class_f1[c] == doctest::Approx(0.75));
    }
    CHECK(rep.macro_f1 == doctest::Approx(3.0 * 0.75 / 9.0).epsilon(1e-12));
    // unsupported classes trip the zero-denominator convention
    CHECK(rep.degenerate_metrics);
    for (int c = 3; c < 9; ++c) CHECK(!rep.per_class_auc[c].has_value());
    CHECK(rep.per_class_auc[0].has_value());

    EvaluationReport empty = build_report({}, {}, {});
    CHECK(empty.degenerate_metrics);
    CHECK(empty.n_samples == 0);
}

TEST_CASE("report text is stable across formatting runs") {
    const std::vector<int> truth = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    EvaluationReport rep = build_report(truth, truth, {});
    CHECK(!rep.degenerate_metrics);
    const std::string a = report_machine_text(rep);
    const std::string b = report_machine_text(rep);
    CHECK(a == b);
    CHECK(a.find("accuracy = 1.000000") != std::string::npos);
    CHECK(a.find("macro_f1 = 1.000000") != std::string::npos);
    CHECK(a.find("auc.Clean = absent") != std::string::npos);

    const std::string human = report_human_table(rep);
    CHECK(human.find("confusion") != std::string::npos);
}
