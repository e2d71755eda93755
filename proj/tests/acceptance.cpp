// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "solarscan/dataset.hpp"
#include "solarscan/eval.hpp"
#include "solarscan/features.hpp"
#include "solarscan/serialize.hpp"
#include "solarscan/severity.hpp"
#include "solarscan/synthetic.hpp"
#include "solarscan/vit.hpp"

using namespace solarscan;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const char* title, bool ok, const std::string& detail) {
    std::printf("%s criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", criterion, title,
                detail.c_str());
    if (!ok) ++g_failures;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "solarscan_acceptance";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

ViTConfig grad_check_config() {
    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.hidden_dim = 8;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.mlp_dim = 16;
    cfg.dropout_hidden = 0.0;
    cfg.dropout_attention = 0.0;
    return cfg;
}

double train_loss(const ViTModel& model, const Tensor& batch, const std::vector<int>& labels) {
    Rng rng(0);
    ForwardResult fwd = forward(model, batch, /*training=*/true, rng);
    return cross_entropy(fwd.logits, labels).loss;
}

// ---------------------------------------------------------------------------
// 1. Desk-scale overfit: a small ViT reaches >= 95% training accuracy on the
//    45-image synthetic training split within 300 epochs.
// ---------------------------------------------------------------------------
void criterion_overfit() {
    const fs::path root = work_dir() / "overfit_ds";
    fs::remove_all(root);
    generate_synthetic_dataset(root.string(), /*per_class=*/8, /*image_size=*/64, /*seed=*/7);
    const std::vector<DatasetEntry> entries = scan_dataset(root.string());

    std::vector<int> labels;
    for (const auto& e : entries) labels.push_back(e.label);
    Rng split_rng(11);
    const SplitResult split = stratified_split(labels, 0.7, split_rng);
    std::vector<LabeledImage> train_set;
    for (std::size_t i : split.train) {
        train_set.push_back({load_image(entries[i].path), entries[i].label, entries[i].id});
    }
    if (train_set.size() != 45) {
        report(1, "desk-scale overfit", false,
               "expected 45 training images, got " + std::to_string(train_set.size()));
        return;
    }

    ViTConfig cfg;
    cfg.image_size = 32;
    cfg.patch_size = 8;
    cfg.hidden_dim = 64;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.mlp_dim = 128;
    cfg.dropout_hidden = 0.1;
    cfg.dropout_attention = 0.1;

    Rng model_rng(3);
    ViTModel model = init_model(cfg, model_rng);
    OptimizerConfig opt;
    opt.learning_rate = 1e-3;

    TrainConfig tc;
    tc.batch_size = 16;
    tc.selector = TrainableSelector::Full;
    tc.augment_enabled = false;
    tc.augmentation = AugmentationConfig::disabled(cfg.image_size);

    const int chunk = 25;
    int epochs_run = 0;
    double accuracy = 0.0;
    Rng train_rng(19);
    while (epochs_run < 300) {
        tc.epochs = chunk;
        train(model, train_set, opt, tc, train_rng);
        epochs_run += chunk;
        std::size_t correct = 0;
        for (const auto& item : train_set) {
            if (static_cast<int>(predict(model, item.image).defect) == item.label) ++correct;
        }
        accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        if (accuracy >= 0.95) break;
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "train accuracy %.4f after %d epochs on 45 images (need >= 0.95 within 300)",
                  accuracy, epochs_run);
    report(1, "desk-scale overfit", accuracy >= 0.95, detail);
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients match central finite differences (h = 1e-4) over
//    every parameter tensor with max relative error < 1e-4.
// ---------------------------------------------------------------------------
void criterion_gradients() {
    const ViTConfig cfg = grad_check_config();
    Rng rng(21);
    ViTModel model = init_model(cfg, rng);
    Tensor batch({2, 3, 8, 8});
    for (double& v : batch.data) v = rng.uniform(-1.0, 1.0);
    const std::vector<int> labels = {2, 6};

    Rng fwd_rng(0);
    ForwardResult fwd = forward(model, batch, true, fwd_rng);
    LossResult lr = cross_entropy(fwd.logits, labels);
    GradMap grads = backward(model, fwd.cache, lr.dlogits, TrainableSelector::Full);

    const double h = 1e-4;
    double max_rel = 0.0;
    std::string worst = "-";
    std::size_t n_checked = 0;
    model.visit([&](const std::string& name, Tensor& param) {
        const Tensor& g = grads.at(name);
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double orig = param[i];
            param[i] = orig + h;
            const double hi = train_loss(model, batch, labels);
            param[i] = orig - h;
            const double lo = train_loss(model, batch, labels);
            param[i] = orig;
            const double fd = (hi - lo) / (2.0 * h);
            const double rel =
                std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-4});
            if (rel > max_rel) {
                max_rel = rel;
                worst = name;
            }
            ++n_checked;
        }
    });
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "max relative error %.3e over %zu parameters (worst tensor %s, need < 1e-4)",
                  max_rel, n_checked, worst.c_str());
    report(2, "finite-difference gradient check", max_rel < 1e-4, detail);
}

// ---------------------------------------------------------------------------
// 3. AdamW agrees with an independent 10-step reference to 1e-10 and reduces
//    to plain Adam at weight_decay = 0.
// ---------------------------------------------------------------------------
void criterion_adamw() {
    OptimizerConfig opt;
    opt.learning_rate = 0.05;
    opt.weight_decay = 0.01;

    Rng rng(13);
    const std::size_t n = 5;
    Tensor theta({n}), m({n}), v({n});
    std::vector<double> ref(n), rm(n, 0.0), rv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        theta.data[i] = rng.uniform(-1.0, 1.0);
        ref[i] = theta.data[i];
    }
    double max_err = 0.0;
    for (int t = 1; t <= 10; ++t) {
        Tensor g({n});
        std::vector<double> rg(n);
        for (std::size_t i = 0; i < n; ++i) {
            g.data[i] = rng.uniform(-2.0, 2.0);
            rg[i] = g.data[i];
        }
        adamw_update(theta, g, m, v, t, opt, /*apply_decay=*/true);
        for (std::size_t i = 0; i < n; ++i) {
            rm[i] = opt.beta1 * rm[i] + (1.0 - opt.beta1) * rg[i];
            rv[i] = opt.beta2 * rv[i] + (1.0 - opt.beta2) * rg[i] * rg[i];
            const double mhat = rm[i] / (1.0 - std::pow(opt.beta1, t));
            const double vhat = rv[i] / (1.0 - std::pow(opt.beta2, t));
            ref[i] -= opt.learning_rate *
                      (mhat / (std::sqrt(vhat) + opt.epsilon) + opt.weight_decay * ref[i]);
            max_err = std::max(max_err, std::abs(theta.data[i] - ref[i]));
        }
    }

    // wd = 0: decoupled decay vanishes, trajectory equals plain Adam and the
    // loss of a 1-D convex quadratic decreases monotonically
    OptimizerConfig adam = opt;
    adam.weight_decay = 0.0;
    adam.learning_rate = 1e-2;
    Tensor th({1}), am({1}), av({1});
    th.data[0] = 2.0;
    bool monotone = true;
    double prev = th.data[0] * th.data[0];
    for (int t = 1; t <= 100; ++t) {
        Tensor g({1});
        g.data[0] = 2.0 * th.data[0];
        adamw_update(th, g, am, av, t, adam, true);
        const double loss = th.data[0] * th.data[0];
        if (!(loss < prev)) monotone = false;
        prev = loss;
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "10-step max deviation %.3e (need <= 1e-10); quadratic descent monotone: %s",
                  max_err, monotone ? "yes" : "no");
    report(3, "AdamW reference oracle", max_err <= 1e-10 && monotone, detail);
}

// ---------------------------------------------------------------------------
// 4. Softmax rows and attention rows are stochastic over 100 random inputs;
//    inference is bitwise deterministic.
// ---------------------------------------------------------------------------
void criterion_stochasticity() {
    Rng rng(29);
    bool softmax_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor logits({1, 9});
        for (double& v : logits.data) v = rng.uniform(-30.0, 30.0);
        Tensor p = softmax(logits);
        double sum = 0.0;
        for (double v : p.data) {
            if (!(v >= 0.0) || !std::isfinite(v)) softmax_ok = false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) softmax_ok = false;
    }

    const ViTConfig cfg = grad_check_config();
    ViTModel model = init_model(cfg, rng);
    bool attn_ok = true;
    double max_row_err = 0.0;
    const std::size_t T = cfg.seq_len();
    for (int trial = 0; trial < 100; ++trial) {
        Tensor batch({1, 3, 8, 8});
        for (double& v : batch.data) v = rng.uniform(-1.0, 1.0);
        Rng fwd_rng(0);
        ForwardResult res = forward(model, batch, false, fwd_rng);
        for (const auto& lc : res.cache.layers) {
            for (std::size_t row = 0; row < lc.attn.size() / T; ++row) {
                double sum = 0.0;
                for (std::size_t u = 0; u < T; ++u) {
                    const double a = lc.attn.data[row * T + u];
                    if (!(a >= 0.0)) attn_ok = false;
                    sum += a;
                }
                max_row_err = std::max(max_row_err, std::abs(sum - 1.0));
            }
        }
    }
    if (max_row_err > 1e-9) attn_ok = false;

    Tensor batch({2, 3, 8, 8});
    for (double& v : batch.data) v = rng.uniform(-1.0, 1.0);
    Rng r1(1), r2(99);
    const bool deterministic =
        forward(model, batch, false, r1).logits.data == forward(model, batch, false, r2).logits.data;

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "softmax rows ok: %s; attention row-sum max error %.1e over 100 inputs; "
                  "inference bitwise deterministic: %s",
                  softmax_ok ? "yes" : "no", max_row_err, deterministic ? "yes" : "no");
    report(4, "softmax/attention stochasticity", softmax_ok && attn_ok && deterministic, detail);
}

// ---------------------------------------------------------------------------
// 5. Feature oracles: step-edge Sobel density, entropy fixtures and the
//    hand-enumerated 4x4 checkerboard GLCM.
// ---------------------------------------------------------------------------
void criterion_features() {
    bool ok = true;
    std::string why = "all fixtures match";

    // vertical step edge: exactly the two columns beside the step fire
    RgbImage step(8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) step.at(y, x, c) = x < 4 ? 0.0f : 1.0f;
        }
    }
    DefectMask full8(8, 8, true);
    if (std::abs(edge_density(step, full8) - 0.25) >= 1e-12) {
        ok = false;
        why = "step-edge Sobel density != 0.25";
    }

    // entropy: 1 bin -> 0 bits, 32 equal bins -> 5 bits
    DefectMask full84(8, 4, true);
    RgbImage flat(8, 4, 0.5f);
    if (std::abs(color_histogram_entropy(flat, full84)) > 1e-12) {
        ok = false;
        why = "constant-region entropy != 0";
    }
    RgbImage spread(8, 4);
    for (int i = 0; i < 32; ++i) {
        const float v = static_cast<float>((i + 0.5) / 32.0);
        for (int c = 0; c < 3; ++c) spread.data[static_cast<std::size_t>(i) * 3 + c] = v;
    }
    if (std::abs(color_histogram_entropy(spread, full84) - 5.0) > 1e-9) {
        ok = false;
        why = "uniform 32-bin entropy != 5";
    }

    // checkerboard GLCM: contrast 28, energy 25/98, homogeneity 1/2,
    // correlation -1/7 (hand pair enumeration)
    RgbImage board(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int c = 0; c < 3; ++c) board.at(y, x, c) = ((y + x) % 2) ? 1.0f : 0.0f;
        }
    }
    GlcmFeatures g = glcm_features(board, DefectMask(4, 4, true));
    if (std::abs(g.contrast - 28.0) > 1e-9 || std::abs(g.energy - 25.0 / 98.0) > 1e-12 ||
        std::abs(g.homogeneity - 0.5) > 1e-12 ||
        std::abs(g.correlation + 1.0 / 7.0) > 1e-12) {
        ok = false;
        why = "checkerboard GLCM mismatch";
    }

    // Clean prediction convention
    Rng rng(3);
    RgbImage rand_img(12, 12);
    for (float& v : rand_img.data) v = static_cast<float>(rng.uniform01());
    const FeatureVector fv = extract_features(rand_img, DefectClass::Clean);
    const std::array<double, 7> want = {0, 0, 0, 0, 1, 1, 0};
    if (fv.as_array() != want) {
        ok = false;
        why = "Clean feature convention violated";
    }

    report(5, "feature extraction oracles", ok, why);
}

// ---------------------------------------------------------------------------
// 6. Severity regression oracles: a deep tree memorizes distinct rows, and a
//    bootstrap forest generalizes a linear signal better on held-out data
//    than a single unpruned tree.
// ---------------------------------------------------------------------------
void criterion_forest() {
    Rng rng(41);

    std::vector<std::array<double, kFeatureCount>> X(24);
    std::vector<double> y;
    for (std::size_t i = 0; i < X.size(); ++i) {
        for (double& v : X[i]) v = static_cast<double>(rng.below(64)) / 8.0;
        X[i][0] = static_cast<double>(i);
        y.push_back(rng.uniform(0.0, 2.0));
    }
    ForestConfig deep;
    deep.max_depth = 30;
    deep.min_samples_leaf = 1;
    deep.features_per_split = kFeatureCount;
    Rng tree_rng(0);
    RegressionTree memorizer = fit_tree(X, y, deep, tree_rng);
    double mem_mse = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double d = memorizer.predict(X[i]) - y[i];
        mem_mse += d * d;
    }
    mem_mse /= static_cast<double>(X.size());

    // held-out comparison on y = 2 * x0 + noise
    auto make_rows = [&](std::size_t n, std::vector<std::array<double, kFeatureCount>>& Xo,
                         std::vector<double>& yo) {
        Xo.resize(n);
        yo.clear();
        for (auto& row : Xo) {
            for (double& v : row) v = rng.uniform(0.0, 1.0);
            yo.push_back(2.0 * row[0] + 0.15 * rng.normal());
        }
    };
    std::vector<std::array<double, kFeatureCount>> Xtr, Xte;
    std::vector<double> ytr, yte;
    make_rows(200, Xtr, ytr);
    make_rows(100, Xte, yte);

    ForestConfig fc;
    fc.n_trees = 100;
    fc.seed = 17;
    RandomForestModel forest = fit_forest(Xtr, ytr, fc);

    ForestConfig single = fc;
    single.n_trees = 1;
    single.bootstrap = false;
    single.min_samples_leaf = 1;
    single.max_depth = 30;
    single.features_per_split = kFeatureCount;
    RandomForestModel lone = fit_forest(Xtr, ytr, single);

    auto held_out_mse = [&](const RandomForestModel& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < Xte.size(); ++i) {
            const double d = predict_score(m, Xte[i]) - yte[i];
            s += d * d;
        }
        return s / static_cast<double>(Xte.size());
    };
    const double forest_mse = held_out_mse(forest);
    const double tree_mse = held_out_mse(lone);

    const bool grades_ok = grade(0.0) == SeverityGrade::Nil &&
                           grade(1.0) == SeverityGrade::Minor &&
                           grade(1.7) == SeverityGrade::Major;

    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "memorizing-tree MSE %.2e (need < 1e-12); held-out MSE forest %.4f vs single "
                  "tree %.4f; grade thresholds ok: %s",
                  mem_mse, forest_mse, tree_mse, grades_ok ? "yes" : "no");
    report(6, "severity regression oracles",
           mem_mse < 1e-12 && forest_mse < tree_mse && grades_ok, detail);
}

// ---------------------------------------------------------------------------
// 7. Metric oracles: 1050/450 stratified split, midrank AUC vs O(n^2) pair
//    counting, macro-F1 hand fixture.
// ---------------------------------------------------------------------------
void criterion_metrics() {
    bool ok = true;
    std::string why = "all metric oracles match";

    const std::vector<std::size_t> counts = {170, 170, 170, 170, 170, 170, 170, 160, 150};
    std::vector<int> labels;
    for (int c = 0; c < 9; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) labels.push_back(c);
    }
    Rng split_rng(42);
    SplitResult split = stratified_split(labels, 0.7, split_rng);
    if (split.train.size() != 1050 || split.test.size() != 450) {
        ok = false;
        why = "stratified split is not 1050/450";
    }

    Rng rng(31);
    double max_auc_err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 40;
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(10)) / 10.0;  // forces ties
            pos[i] = rng.bernoulli(0.5);
            n_pos += pos[i] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == n) continue;
        double concordant = 0.0, tied = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pos[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (pos[j]) continue;
                if (scores[i] > scores[j]) concordant += 1.0;
                else if (scores[i] == scores[j]) tied += 1.0;
            }
        }
        const double expect =
            (concordant + 0.5 * tied) / (static_cast<double>(n_pos) * (n - n_pos));
        max_auc_err = std::max(max_auc_err, std::abs(*binary_auc(scores, pos) - expect));
    }
    if (max_auc_err > 1e-12) {
        ok = false;
        why = "midrank AUC deviates from pair counting";
    }

    // hand fixture: F1 = 2/3 for classes 0 and 1, zero elsewhere
    const double f1 = macro_f1(confusion_matrix({0, 0, 1}, {0, 1, 1}));
    if (std::abs(f1 - 4.0 / 27.0) > 1e-12) {
        ok = false;
        why = "macro-F1 hand fixture mismatch";
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail), "%s (AUC max deviation %.1e)", why.c_str(),
                  max_auc_err);
    report(7, "evaluation metric oracles", ok, detail);
}

// ---------------------------------------------------------------------------
// 8. End-to-end CLI smoke: synthesize, train both models, predict, evaluate;
//    rerunning prediction is byte-identical.
// ---------------------------------------------------------------------------
int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string cmd = std::string(SOLARSCAN_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    char buf[4096];
    std::string text;
    while (std::fgets(buf, sizeof(buf), pipe)) text += buf;
    if (output) *output = text;
    const int status = pclose(pipe);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_cli() {
    const fs::path dir = work_dir() / "cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path ds = dir / "ds";
    const fs::path cfg = dir / "toy.cfg";
    {
        std::ofstream os(cfg);
        os << "vit.image_size = 16\nvit.patch_size = 8\nvit.hidden_dim = 16\n"
              "vit.num_layers = 1\nvit.num_heads = 2\nvit.mlp_dim = 32\n"
              "vit.dropout_hidden = 0.0\nvit.dropout_attention = 0.0\n"
              "train.epochs = 1\ntrain.batch_size = 8\ntrain.selector = head\n"
              "train.augment = false\nforest.n_trees = 5\nforest.max_depth = 6\nseed = 5\n";
    }

    auto fail = [&](const std::string& step, const std::string& log) {
        report(8, "end-to-end CLI pipeline", false, step + ": " + log.substr(0, 120));
    };

    std::string log;
    if (run_cli("make-synthetic --out " + ds.string() + " --per-class 3 --size 32 --seed 5",
                &log) != 0) {
        fail("make-synthetic", log);
        return;
    }
    const fs::path model = dir / "model.bin";
    if (run_cli("train-classifier --config " + cfg.string() + " --dataset " + ds.string() +
                    " --out " + model.string(),
                &log) != 0) {
        fail("train-classifier", log);
        return;
    }
    const fs::path forest = dir / "forest.bin";
    if (run_cli("train-severity --config " + cfg.string() + " --dataset " + ds.string() +
                    " --model " + model.string() + " --out " + forest.string(),
                &log) != 0) {
        fail("train-severity", log);
        return;
    }
    const std::string predict_args = "predict --model " + model.string() + " --forest " +
                                     forest.string() + " --input " + ds.string() + "/Clean";
    if (run_cli(predict_args + " --out " + (dir / "p1.csv").string(), &log) != 0) {
        fail("predict", log);
        return;
    }
    if (run_cli(predict_args + " --out " + (dir / "p2.csv").string(), &log) != 0) {
        fail("predict rerun", log);
        return;
    }
    const bool identical = read_file(dir / "p1.csv") == read_file(dir / "p2.csv");
    if (run_cli("evaluate --model " + model.string() + " --forest " + forest.string() +
                    " --dataset " + ds.string() + " --split " + model.string() + ".split" +
                    " --out " + (dir / "report").string(),
                &log) != 0) {
        fail("evaluate", log);
        return;
    }
    const std::string kv = read_file(dir / "report.kv");
    const bool report_ok =
        kv.find("n_samples = 9") != std::string::npos && fs::exists(dir / "report.txt");

    report(8, "end-to-end CLI pipeline", identical && report_ok,
           std::string("all subcommands exited 0; prediction rerun byte-identical: ") +
               (identical ? "yes" : "no"));
}

}  // namespace

int main() {
    criterion_overfit();
    criterion_gradients();
    criterion_adamw();
    criterion_stochasticity();
    criterion_features();
    criterion_forest();
    criterion_metrics();
    criterion_cli();
    std::printf("%s (%d of 8 criteria failed)\n", g_failures == 0 ? "ACCEPTED" : "REJECTED",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
