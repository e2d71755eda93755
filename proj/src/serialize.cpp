#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "solarscan/errors.hpp"
#include "solarscan/serialize.hpp"

namespace solarscan {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'F', 'S', 'M'};

enum class Dtype : std::uint8_t { F32 = 0, I32 = 1, F64 = 2 };

struct RawTensor {
    Dtype dtype;
    std::vector<std::uint64_t> dims;
    std::vector<char> payload;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("truncated model file: " + path);
    return v;
}

class Writer {
public:
    Writer(const std::string& path, const json& header) : path_(path), os_(path, std::ios::binary) {
        if (!os_) throw IoError("cannot open file for writing: " + path);
        os_.write(kMagic, 4);
        write_pod<std::uint32_t>(os_, kContainerVersion);
        header_bytes_ = header.dump();
        write_pod<std::uint32_t>(os_, static_cast<std::uint32_t>(header_bytes_.size()));
        os_.write(header_bytes_.data(), header_bytes_.size());
        count_pos_ = os_.tellp();
        write_pod<std::uint32_t>(os_, 0);  // patched in finish()
    }

    void add_f32(const std::string& name, const Tensor& t) {
        begin_record(name, Dtype::F32, t.shape);
        for (double v : t.data) {
            write_pod<float>(os_, static_cast<float>(v));
        }
    }

    void add_f64(const std::string& name, const std::vector<double>& v) {
        begin_record(name, Dtype::F64, {v.size()});
        for (double x : v) write_pod<double>(os_, x);
    }

    void add_i32(const std::string& name, const std::vector<int>& v) {
        begin_record(name, Dtype::I32, {v.size()});
        for (int x : v) write_pod<std::int32_t>(os_, x);
    }

    void finish() {
        os_.seekp(count_pos_);
        write_pod<std::uint32_t>(os_, count_);
        os_.close();
        if (!os_) throw IoError("write failed: " + path_);
    }

private:
    void begin_record(const std::string& name, Dtype dtype,
                      const std::vector<std::size_t>& dims) {
        write_pod<std::uint32_t>(os_, static_cast<std::uint32_t>(name.size()));
        os_.write(name.data(), name.size());
        write_pod<std::uint8_t>(os_, static_cast<std::uint8_t>(dtype));
        write_pod<std::uint8_t>(os_, static_cast<std::uint8_t>(dims.size()));
        for (std::size_t d : dims) write_pod<std::uint64_t>(os_, d);
        ++count_;
    }

    std::string path_;
    std::ofstream os_;
    std::string header_bytes_;
    std::streampos count_pos_;
    std::uint32_t count_ = 0;
};

struct Container {
    json header;
    std::map<std::string, RawTensor> tensors;
};

Container read_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a model container: " + path);
    }
    const auto version = read_pod<std::uint32_t>(is, path);
    if (version != kContainerVersion) {
        throw FormatError("unsupported container version in " + path);
    }
    const auto header_len = read_pod<std::uint32_t>(is, path);
    std::string header_bytes(header_len, '\0');
    is.read(header_bytes.data(), header_len);
    if (!is) throw FormatError("truncated model file: " + path);

    Container c;
    try {
        c.header = json::parse(header_bytes);
    } catch (const json::exception& e) {
        throw FormatError("bad container header in " + path + ": " + e.what());
    }
    const auto n_tensors = read_pod<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = read_pod<std::uint32_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        RawTensor rt;
        rt.dtype = static_cast<Dtype>(read_pod<std::uint8_t>(is, path));
        const auto ndim = read_pod<std::uint8_t>(is, path);
        for (std::uint8_t d = 0; d < ndim; ++d) {
            rt.dims.push_back(read_pod<std::uint64_t>(is, path));
        }
        std::size_t elem = rt.dtype == Dtype::F64 ? 8 : 4;
        rt.payload.resize(rt.count() * elem);
        is.read(rt.payload.data(), rt.payload.size());
        if (!is) throw FormatError("truncated model file: " + path);
        c.tensors.emplace(std::move(name), std::move(rt));
    }
    return c;
}

std::string shape_str(const std::vector<std::uint64_t>& dims) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        os << dims[i] << (i + 1 < dims.size() ? ", " : "");
    }
    os << ")";
    return os.str();
}

Tensor to_tensor(const RawTensor& rt) {
    std::vector<std::size_t> shape(rt.dims.begin(), rt.dims.end());
    Tensor t(shape);
    if (rt.dtype == Dtype::F32) {
        const float* p = reinterpret_cast<const float*>(rt.payload.data());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[i];
    } else if (rt.dtype == Dtype::F64) {
        const double* p = reinterpret_cast<const double*>(rt.payload.data());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[i];
    } else {
        const std::int32_t* p = reinterpret_cast<const std::int32_t*>(rt.payload.data());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[i];
    }
    return t;
}

std::vector<double> to_f64(const RawTensor& rt) {
    Tensor t = to_tensor(rt);
    return std::move(t.data);
}

std::vector<int> to_i32(const RawTensor& rt) {
    std::vector<int> v(rt.count());
    const std::int32_t* p = reinterpret_cast<const std::int32_t*>(rt.payload.data());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = p[i];
    return v;
}

json vit_config_json(const ViTConfig& c) {
    return json{{"image_size", c.image_size},       {"patch_size", c.patch_size},
                {"hidden_dim", c.hidden_dim},       {"num_layers", c.num_layers},
                {"num_heads", c.num_heads},         {"mlp_dim", c.mlp_dim},
                {"num_classes", c.num_classes},     {"dropout_hidden", c.dropout_hidden},
                {"dropout_attention", c.dropout_attention}};
}

ViTConfig vit_config_from_json(const json& j) {
    ViTConfig c;
    c.image_size = j.at("image_size");
    c.patch_size = j.at("patch_size");
    c.hidden_dim = j.at("hidden_dim");
    c.num_layers = j.at("num_layers");
    c.num_heads = j.at("num_heads");
    c.mlp_dim = j.at("mlp_dim");
    c.num_classes = j.at("num_classes");
    c.dropout_hidden = j.at("dropout_hidden");
    c.dropout_attention = j.at("dropout_attention");
    return c;
}

ViTModel populate_model(const Container& c, const ViTConfig& cfg, const std::string& path) {
    cfg.validate();
    Rng rng(0);
    ViTModel model = init_model(cfg, rng);
    model.visit([&](const std::string& name, Tensor& param) {
        auto it = c.tensors.find(name);
        if (it == c.tensors.end()) {
            throw IncompatibleModelError("missing tensor '" + name + "' in " + path);
        }
        std::vector<std::uint64_t> want(param.shape.begin(), param.shape.end());
        if (it->second.dims != want) {
            throw IncompatibleModelError("shape mismatch for tensor '" + name + "' in " + path +
                                         ": file has " + shape_str(it->second.dims) +
                                         ", config requires " + shape_str(want));
        }
        param = to_tensor(it->second);
    });
    return model;
}

}  // namespace

void save_model(const ViTModel& model, const std::string& path) {
    json header{{"format_version", kContainerVersion},
                {"kind", "vit_classifier"},
                {"config", vit_config_json(model.cfg)},
                {"classes", defect_class_names()}};
    Writer w(path, header);
    model.visit([&](const std::string& name, const Tensor& t) { w.add_f32(name, t); });
    w.finish();
}

ViTModel load_model(const std::string& path) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "vit_classifier") {
        throw FormatError("container is not a classifier model: " + path);
    }
    return populate_model(c, vit_config_from_json(c.header.at("config")), path);
}

ViTModel import_weights(const std::string& path, const ViTConfig& cfg) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "vit_classifier") {
        throw FormatError("container is not a classifier model: " + path);
    }
    return populate_model(c, cfg, path);
}

void save_forest(const RandomForestModel& model, const std::string& path) {
    json header{{"format_version", kContainerVersion},
                {"kind", "severity_forest"},
                {"n_trees", model.trees.size()},
                {"grade_thresholds", {model.grade_t1, model.grade_t2}},
                {"config",
                 {{"n_trees", model.cfg.n_trees},
                  {"max_depth", model.cfg.max_depth},
                  {"min_samples_leaf", model.cfg.min_samples_leaf},
                  {"features_per_split", model.cfg.features_per_split},
                  {"bootstrap", model.cfg.bootstrap},
                  {"seed", model.cfg.seed}}}};
    Writer w(path, header);
    for (std::size_t i = 0; i < model.trees.size(); ++i) {
        const RegressionTree& t = model.trees[i];
        const std::string pre = "tree_" + std::to_string(i) + ".";
        w.add_i32(pre + "feature", t.feature);
        w.add_f64(pre + "threshold", t.threshold);
        w.add_i32(pre + "left", t.left);
        w.add_i32(pre + "right", t.right);
        w.add_f64(pre + "value", t.value);
    }
    w.finish();
}

RandomForestModel load_forest(const std::string& path) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "severity_forest") {
        throw FormatError("container is not a severity forest: " + path);
    }
    RandomForestModel model;
    const json& jc = c.header.at("config");
    model.cfg.n_trees = jc.at("n_trees");
    model.cfg.max_depth = jc.at("max_depth");
    model.cfg.min_samples_leaf = jc.at("min_samples_leaf");
    model.cfg.features_per_split = jc.at("features_per_split");
    model.cfg.bootstrap = jc.at("bootstrap");
    model.cfg.seed = jc.at("seed");
    model.grade_t1 = c.header.at("grade_thresholds")[0];
    model.grade_t2 = c.header.at("grade_thresholds")[1];
    const std::size_t n_trees = c.header.at("n_trees");
    for (std::size_t i = 0; i < n_trees; ++i) {
        const std::string pre = "tree_" + std::to_string(i) + ".";
        auto get = [&](const std::string& suffix) -> const RawTensor& {
            auto it = c.tensors.find(pre + suffix);
            if (it == c.tensors.end()) {
                throw IncompatibleModelError("missing tensor '" + pre + suffix + "' in " + path);
            }
            return it->second;
        };
        RegressionTree t;
        t.feature = to_i32(get("feature"));
        t.threshold = to_f64(get("threshold"));
        t.left = to_i32(get("left"));
        t.right = to_i32(get("right"));
        t.value = to_f64(get("value"));
        const std::size_t n = t.feature.size();
        if (t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
            t.value.size() != n) {
            throw IncompatibleModelError("inconsistent tree arrays for tree " +
                                         std::to_string(i) + " in " + path);
        }
        model.trees.push_back(std::move(t));
    }
    return model;
}

}  // namespace solarscan
