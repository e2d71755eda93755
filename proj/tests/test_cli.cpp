#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SOLARSCAN_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    RunResult res;
    const std::string cmd = kCli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe)) {
        res.output += buf;
    }
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "solarscan_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

void write_toy_config(const fs::path& path) {
    std::ofstream os(path);
    os << "# desk-scale run\n"
          "vit.image_size = 16\n"
          "vit.patch_size = 8\n"
          "vit.hidden_dim = 16\n"
          "vit.num_layers = 1\n"
          "vit.num_heads = 2\n"
          "vit.mlp_dim = 32\n"
          "vit.dropout_hidden = 0.0\n"
          "vit.dropout_attention = 0.0\n"
          "train.epochs = 1\n"
          "train.batch_size = 8\n"
          "train.selector = head\n"
          "train.augment = false\n"
          "forest.n_trees = 5\n"
          "forest.max_depth = 6\n"
          "seed = 5\n";
}

}  // namespace

TEST_CASE("usage and help exit codes") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("no-such-subcommand").exit_code == 2);
    CHECK(run_cli("train-classifier").exit_code == 2);  // missing required options
    CHECK(run_cli("predict --model x").exit_code == 2);
}

TEST_CASE("print-config") {
    RunResult def = run_cli("print-config");
    CHECK(def.exit_code == 0);
    CHECK(def.output.find("vit.image_size = 224") != std::string::npos);
    CHECK(def.output.find("opt.learning_rate = 3e-05") != std::string::npos);
    CHECK(def.output.find("forest.n_trees = 100") != std::string::npos);

    const fs::path cfg = work_dir() / "toy.cfg";
    write_toy_config(cfg);
    RunResult res = run_cli("print-config --config " + cfg.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("vit.image_size = 16") != std::string::npos);
    CHECK(res.output.find("train.selector = head") != std::string::npos);

    std::ofstream(work_dir() / "bad.cfg") << "no.such.key = 1\n";
    CHECK(run_cli("print-config --config " + (work_dir() / "bad.cfg").string()).exit_code == 1);
}

TEST_CASE("end-to-end pipeline on a synthetic dataset") {
    const fs::path dir = work_dir();
    const fs::path ds = dir / "ds";
    fs::remove_all(ds);
    const fs::path cfg = dir / "toy.cfg";
    write_toy_config(cfg);

    // make-synthetic: 9 classes x 3 images, deterministic for a fixed seed
    RunResult synth = run_cli("make-synthetic --out " + ds.string() + " --per-class 3 --size 32 --seed 5");
    REQUIRE(synth.exit_code == 0);
    CHECK(fs::exists(ds / "Clean"));
    CHECK(fs::exists(ds / "severity.csv"));
    std::size_t n_images = 0;
    for (const auto& de : fs::recursive_directory_iterator(ds)) {
        if (de.path().extension() == ".png") ++n_images;
    }
    CHECK(n_images == 27);

    const fs::path ds2 = dir / "ds2";
    fs::remove_all(ds2);
    REQUIRE(run_cli("make-synthetic --out " + ds2.string() + " --per-class 3 --size 32 --seed 5")
                .exit_code == 0);
    CHECK(read_file(ds / "Clean" / "Clean_000.png") == read_file(ds2 / "Clean" / "Clean_000.png"));
    CHECK(read_file(ds / "severity.csv") == read_file(ds2 / "severity.csv"));

    // train-classifier
    const fs::path model = dir / "model.bin";
    RunResult tc = run_cli("train-classifier --config " + cfg.string() + " --dataset " +
                           ds.string() + " --out " + model.string());
    REQUIRE(tc.exit_code == 0);
    CHECK(fs::exists(model));
    CHECK(fs::exists(dir / "model.bin.split"));
    CHECK(tc.output.find("epoch 1") != std::string::npos);

    // split manifest: 18 train / 9 test at 0.7 with 3 images per class
    const std::string manifest = read_file(dir / "model.bin.split");
    std::size_t n_train = 0, n_test = 0;
    std::istringstream ms(manifest);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.find(",train") != std::string::npos) ++n_train;
        if (line.find(",test") != std::string::npos) ++n_test;
    }
    CHECK(n_train == 18);
    CHECK(n_test == 9);

    // train-severity
    const fs::path forest = dir / "forest.bin";
    RunResult ts = run_cli("train-severity --config " + cfg.string() + " --dataset " +
                           ds.string() + " --model " + model.string() + " --out " +
                           forest.string());
    REQUIRE(ts.exit_code == 0);
    CHECK(fs::exists(forest));
    CHECK(ts.output.find("27 rows") != std::string::npos);

    // predict over a directory, rerun is byte-identical
    const fs::path pred = dir / "pred.csv";
    RunResult pr = run_cli("predict --model " + model.string() + " --forest " + forest.string() +
                           " --input " + (ds / "Soiling").string() + " --out " + pred.string());
    REQUIRE(pr.exit_code == 0);
    const std::string csv = read_file(pred);
    CHECK(count_lines(csv) == 4);  // header + 3 rows
    CHECK(csv.find("image_id,predicted_class") != std::string::npos);
    CHECK(csv.find("Soiling_000.png") != std::string::npos);

    const fs::path pred2 = dir / "pred2.csv";
    REQUIRE(run_cli("predict --model " + model.string() + " --forest " + forest.string() +
                    " --input " + (ds / "Soiling").string() + " --out " + pred2.string())
                .exit_code == 0);
    CHECK(read_file(pred2) == csv);

    // a corrupt image yields an ERROR row and exit code 5
    const fs::path mixed = dir / "mixed";
    fs::remove_all(mixed);
    fs::create_directories(mixed);
    fs::copy_file(ds / "Dust" / "Dust_000.png", mixed / "ok.png");
    std::ofstream(mixed / "broken.png") << "not an image";
    RunResult partial = run_cli("predict --model " + model.string() + " --forest " +
                                forest.string() + " --input " + mixed.string() + " --out " +
                                (dir / "partial.csv").string());
    CHECK(partial.exit_code == 5);
    const std::string partial_csv = read_file(dir / "partial.csv");
    CHECK(partial_csv.find("broken.png,ERROR") != std::string::npos);
    CHECK(partial_csv.find("ok.png,") != std::string::npos);

    // evaluate writes both report files
    RunResult ev = run_cli("evaluate --model " + model.string() + " --forest " + forest.string() +
                           " --dataset " + ds.string() + " --split " +
                           (dir / "model.bin.split").string() + " --out " +
                           (dir / "report").string());
    REQUIRE(ev.exit_code == 0);
    const std::string kv = read_file(dir / "report.kv");
    CHECK(kv.find("n_samples = 9") != std::string::npos);
    CHECK(kv.find("macro_f1 = ") != std::string::npos);
    CHECK(read_file(dir / "report.txt").find("confusion") != std::string::npos);

    // extract-features emits one row per image
    RunResult ef = run_cli("extract-features --dataset " + ds.string() + " --model " +
                           model.string() + " --out " + (dir / "features.csv").string());
    REQUIRE(ef.exit_code == 0);
    CHECK(count_lines(read_file(dir / "features.csv")) == 28);  // header + 27 rows
}

TEST_CASE("error exit codes") {
    const fs::path dir = work_dir();

    // io error: nonexistent model file
    CHECK(run_cli("predict --model " + (dir / "missing.bin").string() + " --forest " +
                  (dir / "missing2.bin").string() + " --input " + dir.string() + " --out " +
                  (dir / "x.csv").string())
              .exit_code == 3);

    // manifest error: dataset root without the class directories
    const fs::path empty_ds = dir / "empty_ds";
    fs::create_directories(empty_ds);
    RunResult res = run_cli("train-classifier --dataset " + empty_ds.string() + " --out " +
                            (dir / "m.bin").string());
    CHECK(res.exit_code == 4);
    CHECK(res.output.find("missing class directory") != std::string::npos);
}
