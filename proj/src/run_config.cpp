#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "solarscan/errors.hpp"
#include "solarscan/run_config.hpp"

namespace solarscan {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& v) { return std::stoi(v); }
double to_double(const std::string& v) { return std::stod(v); }

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ArgumentError("expected boolean, got '" + v + "'");
}

}  // namespace

void RunConfig::validate() const {
    vit.validate();
    optimizer.validate();
    augmentation.validate();
    forest.validate();
    if (epochs < 0) throw ArgumentError("train.epochs must be >= 0");
    if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw ArgumentError("train.split_fraction must be in (0,1)");
    }
}

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    using Setter = std::function<void(RunConfig&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"vit.image_size", [](RunConfig& c, const std::string& v) { c.vit.image_size = to_int(v); }},
        {"vit.patch_size", [](RunConfig& c, const std::string& v) { c.vit.patch_size = to_int(v); }},
        {"vit.hidden_dim", [](RunConfig& c, const std::string& v) { c.vit.hidden_dim = to_int(v); }},
        {"vit.num_layers", [](RunConfig& c, const std::string& v) { c.vit.num_layers = to_int(v); }},
        {"vit.num_heads", [](RunConfig& c, const std::string& v) { c.vit.num_heads = to_int(v); }},
        {"vit.mlp_dim", [](RunConfig& c, const std::string& v) { c.vit.mlp_dim = to_int(v); }},
        {"vit.dropout_hidden", [](RunConfig& c, const std::string& v) { c.vit.dropout_hidden = to_double(v); }},
        {"vit.dropout_attention", [](RunConfig& c, const std::string& v) { c.vit.dropout_attention = to_double(v); }},
        {"opt.learning_rate", [](RunConfig& c, const std::string& v) { c.optimizer.learning_rate = to_double(v); }},
        {"opt.weight_decay", [](RunConfig& c, const std::string& v) { c.optimizer.weight_decay = to_double(v); }},
        {"opt.beta1", [](RunConfig& c, const std::string& v) { c.optimizer.beta1 = to_double(v); }},
        {"opt.beta2", [](RunConfig& c, const std::string& v) { c.optimizer.beta2 = to_double(v); }},
        {"opt.epsilon", [](RunConfig& c, const std::string& v) { c.optimizer.epsilon = to_double(v); }},
        {"aug.crop_scale_min", [](RunConfig& c, const std::string& v) { c.augmentation.crop_scale_min = to_double(v); }},
        {"aug.crop_scale_max", [](RunConfig& c, const std::string& v) { c.augmentation.crop_scale_max = to_double(v); }},
        {"aug.crop_aspect_min", [](RunConfig& c, const std::string& v) { c.augmentation.crop_aspect_min = to_double(v); }},
        {"aug.crop_aspect_max", [](RunConfig& c, const std::string& v) { c.augmentation.crop_aspect_max = to_double(v); }},
        {"aug.hflip_prob", [](RunConfig& c, const std::string& v) { c.augmentation.hflip_prob = to_double(v); }},
        {"aug.vflip_prob", [](RunConfig& c, const std::string& v) { c.augmentation.vflip_prob = to_double(v); }},
        {"aug.rotation_max_deg", [](RunConfig& c, const std::string& v) { c.augmentation.rotation_max_deg = to_double(v); }},
        {"aug.jitter_brightness", [](RunConfig& c, const std::string& v) { c.augmentation.jitter_brightness = to_double(v); }},
        {"aug.jitter_contrast", [](RunConfig& c, const std::string& v) { c.augmentation.jitter_contrast = to_double(v); }},
        {"aug.jitter_saturation", [](RunConfig& c, const std::string& v) { c.augmentation.jitter_saturation = to_double(v); }},
        {"aug.jitter_hue", [](RunConfig& c, const std::string& v) { c.augmentation.jitter_hue = to_double(v); }},
        {"forest.n_trees", [](RunConfig& c, const std::string& v) { c.forest.n_trees = to_int(v); }},
        {"forest.max_depth", [](RunConfig& c, const std::string& v) { c.forest.max_depth = to_int(v); }},
        {"forest.min_samples_leaf", [](RunConfig& c, const std::string& v) { c.forest.min_samples_leaf = to_int(v); }},
        {"forest.features_per_split", [](RunConfig& c, const std::string& v) { c.forest.features_per_split = to_int(v); }},
        {"forest.bootstrap", [](RunConfig& c, const std::string& v) { c.forest.bootstrap = to_bool(v); }},
        {"train.epochs", [](RunConfig& c, const std::string& v) { c.epochs = to_int(v); }},
        {"train.batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = to_int(v); }},
        {"train.split_fraction", [](RunConfig& c, const std::string& v) { c.split_fraction = to_double(v); }},
        {"train.augment", [](RunConfig& c, const std::string& v) { c.augment_enabled = to_bool(v); }},
        {"train.selector",
         [](RunConfig& c, const std::string& v) {
             if (v == "head") {
                 c.selector = TrainableSelector::HeadOnly;
             } else if (v == "full") {
                 c.selector = TrainableSelector::Full;
             } else {
                 throw ArgumentError("train.selector must be 'head' or 'full'");
             }
         }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
    };

    auto it = setters.find(key);
    if (it == setters.end()) {
        throw ArgumentError("unknown config key: " + key);
    }
    it->second(cfg, value);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config file: " + path);
    }
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("bad config line " + std::to_string(lineno) + " in " + path);
        }
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

std::string run_config_text(const RunConfig& c) {
    std::ostringstream os;
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    os << "vit.image_size = " << c.vit.image_size << "\n";
    os << "vit.patch_size = " << c.vit.patch_size << "\n";
    os << "vit.hidden_dim = " << c.vit.hidden_dim << "\n";
    os << "vit.num_layers = " << c.vit.num_layers << "\n";
    os << "vit.num_heads = " << c.vit.num_heads << "\n";
    os << "vit.mlp_dim = " << c.vit.mlp_dim << "\n";
    os << "vit.dropout_hidden = " << num(c.vit.dropout_hidden) << "\n";
    os << "vit.dropout_attention = " << num(c.vit.dropout_attention) << "\n";
    os << "opt.learning_rate = " << num(c.optimizer.learning_rate) << "\n";
    os << "opt.weight_decay = " << num(c.optimizer.weight_decay) << "\n";
    os << "opt.beta1 = " << num(c.optimizer.beta1) << "\n";
    os << "opt.beta2 = " << num(c.optimizer.beta2) << "\n";
    os << "opt.epsilon = " << num(c.optimizer.epsilon) << "\n";
    os << "aug.crop_scale_min = " << num(c.augmentation.crop_scale_min) << "\n";
    os << "aug.crop_scale_max = " << num(c.augmentation.crop_scale_max) << "\n";
    os << "aug.crop_aspect_min = " << num(c.augmentation.crop_aspect_min) << "\n";
    os << "aug.crop_aspect_max = " << num(c.augmentation.crop_aspect_max) << "\n";
    os << "aug.hflip_prob = " << num(c.augmentation.hflip_prob) << "\n";
    os << "aug.vflip_prob = " << num(c.augmentation.vflip_prob) << "\n";
    os << "aug.rotation_max_deg = " << num(c.augmentation.rotation_max_deg) << "\n";
    os << "aug.jitter_brightness = " << num(c.augmentation.jitter_brightness) << "\n";
    os << "aug.jitter_contrast = " << num(c.augmentation.jitter_contrast) << "\n";
    os << "aug.jitter_saturation = " << num(c.augmentation.jitter_saturation) << "\n";
    os << "aug.jitter_hue = " << num(c.augmentation.jitter_hue) << "\n";
    os << "forest.n_trees = " << c.forest.n_trees << "\n";
    os << "forest.max_depth = " << c.forest.max_depth << "\n";
    os << "forest.min_samples_leaf = " << c.forest.min_samples_leaf << "\n";
    os << "forest.features_per_split = " << c.forest.features_per_split << "\n";
    os << "forest.bootstrap = " << (c.forest.bootstrap ? "true" : "false") << "\n";
    os << "train.epochs = " << c.epochs << "\n";
    os << "train.batch_size = " << c.batch_size << "\n";
    os << "train.split_fraction = " << num(c.split_fraction) << "\n";
    os << "train.selector = "
       << (c.selector == TrainableSelector::HeadOnly ? "head" : "full") << "\n";
    os << "train.augment = " << (c.augment_enabled ? "true" : "false") << "\n";
    os << "seed = " << c.seed << "\n";
    return os.str();
}

}  // namespace solarscan
