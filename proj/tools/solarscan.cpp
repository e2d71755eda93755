// Batch CLI for the solar-panel surface-fault screening pipeline.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "solarscan/dataset.hpp"
#include "solarscan/errors.hpp"
#include "solarscan/eval.hpp"
#include "solarscan/run_config.hpp"
#include "solarscan/serialize.hpp"
#include "solarscan/synthetic.hpp"

namespace fs = std::filesystem;
using namespace solarscan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;       // format / argument / contract failures
constexpr int kExitIo = 3;
constexpr int kExitManifest = 4;
constexpr int kExitPartial = 5;     // some per-image records failed

RunConfig resolve_config(const std::string& config_path, std::int64_t seed_override) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
    }
    cfg.validate();
    return cfg;
}

std::string predict_csv_header() {
    std::string h = "image_id,predicted_class";
    for (const auto& name : defect_class_names()) {
        h += ",prob_" + name;
    }
    h += ",normalized_area,edge_density,color_entropy,glcm_contrast,glcm_energy,"
         "glcm_homogeneity,glcm_correlation,severity_score,severity_grade";
    return h;
}

int cmd_train_classifier(const std::string& config_path, std::int64_t seed_override,
                         const std::string& dataset_root, const std::string& out_path,
                         std::string split_out, const std::string& import_path) {
    RunConfig cfg = resolve_config(config_path, seed_override);
    if (split_out.empty()) split_out = out_path + ".split";

    const std::vector<DatasetEntry> entries = scan_dataset(dataset_root);
    if (entries.empty()) {
        throw ManifestError("dataset has no images: " + dataset_root);
    }
    std::vector<int> labels;
    labels.reserve(entries.size());
    for (const auto& e : entries) labels.push_back(e.label);

    Rng master(cfg.seed);
    Rng split_rng = master.split();
    Rng model_rng = master.split();
    Rng train_rng = master.split();

    const SplitResult split = stratified_split(labels, cfg.split_fraction, split_rng);
    std::vector<SplitManifestEntry> manifest(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        manifest[i] = {entries[i].id, entries[i].label, false};
    }
    for (std::size_t i : split.train) manifest[i].is_train = true;
    write_split_manifest(split_out, manifest);

    std::vector<LabeledImage> train_set;
    for (std::size_t i : split.train) {
        train_set.push_back({load_image(entries[i].path), entries[i].label, entries[i].id});
    }

    ViTModel model = import_path.empty() ? init_model(cfg.vit, model_rng)
                                         : import_weights(import_path, cfg.vit);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.selector = cfg.selector;
    tc.augmentation = cfg.augmentation;
    tc.augmentation.output_size = cfg.vit.image_size;
    tc.augment_enabled = cfg.augment_enabled;

    const auto log = train(model, train_set, cfg.optimizer, tc, train_rng);
    for (const auto& e : log) {
        std::printf("epoch %d loss %.6f accuracy %.4f\n", e.epoch, e.loss, e.accuracy);
    }
    save_model(model, out_path);
    std::printf("model written to %s (%zu train / %zu test images, split manifest %s)\n",
                out_path.c_str(), split.train.size(), split.test.size(), split_out.c_str());
    return kExitOk;
}

int cmd_train_severity(const std::string& config_path, std::int64_t seed_override,
                       const std::string& dataset_root, const std::string& model_path,
                       std::string severity_csv, const std::string& out_path) {
    RunConfig cfg = resolve_config(config_path, seed_override);
    if (severity_csv.empty()) {
        severity_csv = (fs::path(dataset_root) / "severity.csv").string();
    }
    const std::vector<DatasetEntry> entries = scan_dataset(dataset_root);
    std::map<std::string, const DatasetEntry*> by_id;
    for (const auto& e : entries) by_id[e.id] = &e;

    const std::map<std::string, int> grades = read_severity_csv(severity_csv);
    const ViTModel classifier = load_model(model_path);

    std::vector<std::array<double, kFeatureCount>> X;
    std::vector<double> y;
    for (const auto& [id, grade_code] : grades) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            std::fprintf(stderr, "warning: labeled image missing on disk, skipped: %s\n",
                         id.c_str());
            continue;
        }
        const RgbImage img = load_image(it->second->path);
        const Prediction p = predict(classifier, img);
        X.push_back(extract_features(img, p.defect).as_array());
        y.push_back(static_cast<double>(grade_code));
    }
    if (X.empty()) {
        throw ArgumentError("no usable severity rows in " + severity_csv);
    }
    cfg.forest.seed = cfg.seed;
    const RandomForestModel forest = fit_forest(X, y, cfg.forest);
    double mse = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double d = predict_score(forest, X[i]) - y[i];
        mse += d * d;
    }
    mse /= static_cast<double>(X.size());
    save_forest(forest, out_path);
    std::printf("forest written to %s (%zu rows, training MSE %.6f)\n", out_path.c_str(),
                X.size(), mse);
    return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& forest_path,
                const std::string& input, const std::string& out_path) {
    const ViTModel classifier = load_model(model_path);
    const RandomForestModel forest = load_forest(forest_path);

    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        for (const auto& de : fs::directory_iterator(input)) {
            if (de.is_regular_file()) files.push_back(de.path());
        }
        std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
            return a.filename().string() < b.filename().string();
        });
    } else {
        files.push_back(input);
    }
    if (files.empty()) {
        throw ArgumentError("no input files under " + input);
    }

    std::ofstream os(out_path);
    if (!os) {
        throw IoError("cannot write output CSV: " + out_path);
    }
    os << predict_csv_header() << "\n";
    bool partial = false;
    for (const auto& f : files) {
        const std::string id = f.filename().string();
        try {
            const RgbImage img = load_image(f.string());
            const Prediction p = predict(classifier, img);
            const FeatureVector fv = extract_features(img, p.defect);
            const double score = predict_score(forest, fv);
            const SeverityGrade g = grade(score, forest.grade_t1, forest.grade_t2);
            os << id << "," << defect_class_name(p.defect);
            char buf[32];
            for (double prob : p.probabilities) {
                std::snprintf(buf, sizeof(buf), ",%.9g", prob);
                os << buf;
            }
            for (double v : fv.as_array()) {
                std::snprintf(buf, sizeof(buf), ",%.9g", v);
                os << buf;
            }
            std::snprintf(buf, sizeof(buf), ",%.9g,", score);
            os << buf << severity_grade_name(g) << "\n";
        } catch (const std::exception& e) {
            partial = true;
            os << id << ",ERROR";
            for (int i = 0; i < 9 + kFeatureCount + 2; ++i) os << ",";
            os << "\n";
            std::fprintf(stderr, "error: %s: %s\n", id.c_str(), e.what());
        }
    }
    if (!os) {
        throw IoError("write failed: " + out_path);
    }
    std::printf("predictions written to %s (%zu files)\n", out_path.c_str(), files.size());
    return partial ? kExitPartial : kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& forest_path,
                 const std::string& dataset_root, const std::string& split_path,
                 const std::string& out_prefix) {
    const ViTModel classifier = load_model(model_path);
    if (!forest_path.empty()) {
        load_forest(forest_path);  // validated, report itself is classifier-side
    }
    const std::vector<DatasetEntry> entries = scan_dataset(dataset_root);
    std::map<std::string, const DatasetEntry*> by_id;
    for (const auto& e : entries) by_id[e.id] = &e;

    std::vector<LabeledImage> test_set;
    for (const auto& se : read_split_manifest(split_path)) {
        if (se.is_train) continue;
        auto it = by_id.find(se.id);
        if (it == by_id.end()) {
            throw ManifestError("split manifest names missing image: " + se.id);
        }
        test_set.push_back({load_image(it->second->path), se.label, se.id});
    }
    if (test_set.empty()) {
        throw ArgumentError("split manifest has no test images");
    }
    const EvaluationReport report = evaluate(classifier, test_set);
    const std::string human = report_human_table(report);
    {
        std::ofstream os(out_prefix + ".txt");
        os << human;
        if (!os) throw IoError("cannot write " + out_prefix + ".txt");
    }
    {
        std::ofstream os(out_prefix + ".kv");
        os << report_machine_text(report);
        if (!os) throw IoError("cannot write " + out_prefix + ".kv");
    }
    std::fputs(human.c_str(), stdout);
    return kExitOk;
}

int cmd_extract_features(const std::string& dataset_root, const std::string& model_path,
                         const std::string& out_path) {
    const ViTModel classifier = load_model(model_path);
    const std::vector<DatasetEntry> entries = scan_dataset(dataset_root);
    std::ofstream os(out_path);
    if (!os) {
        throw IoError("cannot write output CSV: " + out_path);
    }
    os << feature_csv_header() << "\n";
    for (const auto& e : entries) {
        const RgbImage img = load_image(e.path);
        const Prediction p = predict(classifier, img);
        const FeatureVector fv = extract_features(img, p.defect);
        os << feature_csv_row(e.id, static_cast<int>(p.defect), fv) << "\n";
    }
    if (!os) {
        throw IoError("write failed: " + out_path);
    }
    std::printf("features written to %s (%zu images)\n", out_path.c_str(), entries.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solar-panel surface-fault screening toolkit"};
    app.require_subcommand(1);

    std::string config_path, dataset_root, model_path, forest_path, out_path;
    std::string split_path, input_path, severity_csv, import_path;
    std::int64_t seed = -1;
    int per_class = 8;
    int image_size = 64;

    auto* train_cls = app.add_subcommand("train-classifier", "train the defect classifier");
    train_cls->add_option("--config", config_path, "key = value config file");
    train_cls->add_option("--seed", seed, "override the config seed");
    train_cls->add_option("--dataset", dataset_root, "dataset root")->required();
    train_cls->add_option("--out", out_path, "output model file")->required();
    train_cls->add_option("--split-out", split_path, "split manifest path (default <out>.split)");
    train_cls->add_option("--import", import_path, "start from an exported weight file");

    auto* train_sev = app.add_subcommand("train-severity", "train the severity regressor");
    train_sev->add_option("--config", config_path, "key = value config file");
    train_sev->add_option("--seed", seed, "override the config seed");
    train_sev->add_option("--dataset", dataset_root, "dataset root")->required();
    train_sev->add_option("--model", model_path, "classifier model file")->required();
    train_sev->add_option("--severity-csv", severity_csv,
                          "grade CSV (default <dataset>/severity.csv)");
    train_sev->add_option("--out", out_path, "output forest file")->required();

    auto* predict_cmd = app.add_subcommand("predict", "per-image triage records");
    predict_cmd->add_option("--model", model_path, "classifier model file")->required();
    predict_cmd->add_option("--forest", forest_path, "severity forest file")->required();
    predict_cmd->add_option("--input", input_path, "image file or directory")->required();
    predict_cmd->add_option("--out", out_path, "output CSV")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "held-out evaluation report");
    eval_cmd->add_option("--model", model_path, "classifier model file")->required();
    eval_cmd->add_option("--forest", forest_path, "severity forest file (validated only)");
    eval_cmd->add_option("--dataset", dataset_root, "dataset root")->required();
    eval_cmd->add_option("--split", split_path, "split manifest from train-classifier")
        ->required();
    eval_cmd->add_option("--out", out_path, "report path prefix")->required();

    auto* extract_cmd = app.add_subcommand("extract-features", "feature CSV for a dataset");
    extract_cmd->add_option("--dataset", dataset_root, "dataset root")->required();
    extract_cmd->add_option("--model", model_path, "classifier model file")->required();
    extract_cmd->add_option("--out", out_path, "output CSV")->required();

    auto* synth_cmd = app.add_subcommand("make-synthetic", "seeded synthetic dataset");
    synth_cmd->add_option("--out", out_path, "output dataset root")->required();
    synth_cmd->add_option("--per-class", per_class, "images per class (default 8)");
    synth_cmd->add_option("--size", image_size, "image size in pixels (default 64)");
    synth_cmd->add_option("--seed", seed, "generator seed");

    auto* print_cmd = app.add_subcommand("print-config", "print the effective configuration");
    print_cmd->add_option("--config", config_path, "key = value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        // help and version requests exit 0; every usage problem exits 2
        return e.get_exit_code() == 0 ? kExitOk : 2;
    }

    try {
        if (train_cls->parsed()) {
            return cmd_train_classifier(config_path, seed, dataset_root, out_path, split_path,
                                        import_path);
        }
        if (train_sev->parsed()) {
            return cmd_train_severity(config_path, seed, dataset_root, model_path,
                                      severity_csv, out_path);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(model_path, forest_path, input_path, out_path);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(model_path, forest_path, dataset_root, split_path, out_path);
        }
        if (extract_cmd->parsed()) {
            return cmd_extract_features(dataset_root, model_path, out_path);
        }
        if (synth_cmd->parsed()) {
            const int n = generate_synthetic_dataset(
                out_path, per_class, image_size,
                seed >= 0 ? static_cast<std::uint64_t>(seed) : 7u);
            std::printf("wrote %d images under %s\n", n, out_path.c_str());
            return kExitOk;
        }
        if (print_cmd->parsed()) {
            const RunConfig cfg = resolve_config(config_path, -1);
            std::fputs(run_config_text(cfg).c_str(), stdout);
            return kExitOk;
        }
    } catch (const ManifestError& e) {
        std::fprintf(stderr, "manifest error: %s\n", e.what());
        return kExitManifest;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
