#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

// Each test run works in its own scratch directory with a fixed-name
// symlink to the binary, so help output and artifacts are path-independent.
struct Workdir {
    fs::path dir;

    Workdir() {
        dir = fs::temp_directory_path() /
              ("laclip_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(dir);
        fs::create_symlink(LACLIP_CLI_PATH, dir / "laclip");
    }
    ~Workdir() { fs::remove_all(dir); }

    static int& counter() {
        static int c = 0;
        return c;
    }

    int run(const std::string& args, std::string* output = nullptr) const {
        std::string cmd = "cd " + dir.string() + " && ./laclip " + args;
        if (output) {
            cmd += " > cli_stdout.txt 2>&1";
        } else {
            cmd += " > /dev/null 2>&1";
        }
        int status = std::system(cmd.c_str());
        if (output) *output = slurp(dir / "cli_stdout.txt");
        return WEXITSTATUS(status);
    }

    static std::string slurp(const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        REQUIRE(in);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
    }
};

const std::string kCaps =
    "#laclip-kit v1\n"
    R"({"caption":"a red car on the road","id":"c1","image_ref":"f1"})" "\n"
    R"({"caption":"two dogs play on the grass","id":"c2","image_ref":"f2"})" "\n";

std::string golden(const std::string& name) {
    return Workdir::slurp(fs::path(LACLIP_GOLDEN_DIR) / name);
}

}  // namespace

TEST_CASE("help output matches the golden files") {
    Workdir w;
    std::string out;
    CHECK(w.run("--help", &out) == 0);
    CHECK(out == golden("help_top.txt"));
    CHECK(w.run("train --help", &out) == 0);
    CHECK(out == golden("help_train.txt"));
    CHECK(w.run("rewrite --help", &out) == 0);
    CHECK(out == golden("help_rewrite.txt"));
}

TEST_CASE("usage errors print help and exit 2") {
    Workdir w;
    std::string out;
    CHECK(w.run("", &out) == 2);
    CHECK(w.run("no-such-subcommand", &out) == 2);
    CHECK(w.run("train", &out) == 2);  // missing required flags
}

TEST_CASE("rewrite: fixture backend, cache, byte-identical re-run") {
    Workdir w;
    w.write("caps.jsonl", kCaps);
    std::string out;
    int rc = w.run(
        "rewrite --in caps.jsonl --strategies chatgpt,bard,mscoco,human --temp 0.9 "
        "--out aug.jsonl --cache cache.jsonl --backend fixture --seed 3",
        &out);
    CHECK(rc == 0);
    CHECK(out.find("fetched=8") != std::string::npos);

    // M=4 per record
    std::string aug = Workdir::slurp(w.dir / "aug.jsonl");
    CHECK(aug.find("\"strategy\":\"human\"") != std::string::npos);

    rc = w.run(
        "rewrite --in caps.jsonl --strategies chatgpt,bard,mscoco,human --temp 0.9 "
        "--out aug2.jsonl --cache cache.jsonl --backend fixture --seed 3",
        &out);
    CHECK(rc == 0);
    CHECK(out.find("cached=8") != std::string::npos);
    CHECK(out.find("fetched=0") != std::string::npos);
    CHECK(Workdir::slurp(w.dir / "aug2.jsonl") == aug);
    CHECK(fs::exists(w.dir / "aug.jsonl.manifest.json"));
}

TEST_CASE("augment-eda and backtranslate produce valid augmented files") {
    Workdir w;
    w.write("caps.jsonl", kCaps);
    std::string out;
    CHECK(w.run("augment-eda --in caps.jsonl --out eda.jsonl --num 4 --seed 5", &out) == 0);
    CHECK(Workdir::slurp(w.dir / "eda.jsonl").find("eda:composite") != std::string::npos);

    CHECK(w.run("backtranslate --in caps.jsonl --out bt.jsonl --backend fixture", &out) == 0);
    std::string bt = Workdir::slurp(w.dir / "bt.jsonl");
    CHECK(bt.find("backtranslate:es") != std::string::npos);
    CHECK(bt.find("backtranslate:it") != std::string::npos);
}

TEST_CASE("synth -> train -> eval pipeline with idempotent artifacts") {
    Workdir w;
    std::string out;
    int rc = w.run(
        "synth --out-dir s --classes 6 --per-class 24 --dim 16 --test-per-class 20 --seed 7",
        &out);
    REQUIRE(rc == 0);
    for (const char* f :
         {"s/train.jsonl", "s/test.jsonl", "s/test_shifted.jsonl", "s/train_features.fbin",
          "s/test_features.fbin", "s/labels_train.jsonl", "s/labels_test.jsonl",
          "s/classes.json"}) {
        CHECK(fs::exists(w.dir / f));
    }

    const std::string train_args =
        "train --in s/train.jsonl --features s/train_features.fbin --mode laclip "
        "--epochs 3 --batch-size 32 --embed-dim 16 --out-dim 16 --vocab-size 2048 "
        "--context-len 16 --seed 11";
    REQUIRE(w.run(train_args + " --out-dir t1", &out) == 0);
    REQUIRE(w.run(train_args + " --out-dir t2", &out) == 0);
    CHECK(Workdir::slurp(w.dir / "t1/checkpoint.bin") ==
          Workdir::slurp(w.dir / "t2/checkpoint.bin"));
    CHECK(Workdir::slurp(w.dir / "t1/metrics.csv") == Workdir::slurp(w.dir / "t2/metrics.csv"));
    CHECK(Workdir::slurp(w.dir / "t1/checkpoint.bin.manifest.json") ==
          Workdir::slurp(w.dir / "t2/checkpoint.bin.manifest.json"));

    // metrics csv layout
    std::string csv = Workdir::slurp(w.dir / "t1/metrics.csv");
    CHECK(csv.rfind("step,epoch,loss,l_image,l_text,tau,lr\n", 0) == 0);

    rc = w.run(
        "eval-zeroshot --checkpoint t1/checkpoint.bin --features s/test_features.fbin "
        "--labels s/labels_test.jsonl --classes s/classes.json --report zs.json",
        &out);
    CHECK(rc == 0);
    rc = w.run(
        "eval-fewshot --checkpoint t1/checkpoint.bin --features s/test_features.fbin "
        "--labels s/labels_test.jsonl --episodes 30 --way 5 --shot 2 --query 3 "
        "--report fs.json",
        &out);
    CHECK(rc == 0);
    rc = w.run(
        "eval-linear --checkpoint t1/checkpoint.bin --features s/train_features.fbin "
        "--labels s/labels_train.jsonl --report lp.json",
        &out);
    CHECK(rc == 0);

    rc = w.run("report zs.json fs.json lp.json", &out);
    CHECK(rc == 0);
    CHECK(out.find("Dataset") != std::string::npos);
    CHECK(out.find("ZS") != std::string::npos);
    CHECK(out.find("FS") != std::string::npos);
    CHECK(out.find("LP") != std::string::npos);
    CHECK(out.find("synthetic") != std::string::npos);
}

TEST_CASE("validation failures exit 2 without partial outputs") {
    Workdir w;
    std::string out;
    CHECK(w.run("train --mode laclip_mt --in missing.jsonl --features also_missing.fbin",
                &out) == 2);
    CHECK_FALSE(fs::exists(w.dir / "train_out"));

    // mode needs rewrites: synth with zero rewrites, then laclip mode
    REQUIRE(w.run("synth --out-dir s0 --classes 2 --per-class 4 --dim 8 --test-per-class 2 "
                  "--rewrites 0 --seed 1",
                  &out) == 0);
    CHECK(w.run("train --in s0/train.jsonl --features s0/train_features.fbin --mode laclip "
                "--out-dir t0 --epochs 1 --vocab-size 512 --context-len 8",
                &out) == 2);
    CHECK_FALSE(fs::exists(w.dir / "t0"));
}

TEST_CASE("config file supplies defaults, flags override") {
    Workdir w;
    w.write("caps.jsonl", kCaps);
    w.write("conf.json", R"({"num": 2, "seed": 9, "op": "random_swap"})");

    std::string out;
    REQUIRE(w.run("augment-eda --config conf.json --in caps.jsonl --out a.jsonl", &out) == 0);
    CHECK(out.find("2 rewrites each") != std::string::npos);
    CHECK(Workdir::slurp(w.dir / "a.jsonl").find("eda:random_swap") != std::string::npos);

    // flag beats config
    REQUIRE(w.run("augment-eda --config conf.json --in caps.jsonl --out b.jsonl --num 3",
                  &out) == 0);
    CHECK(out.find("3 rewrites each") != std::string::npos);

    // manifest records the merged config
    std::string manifest = Workdir::slurp(w.dir / "b.jsonl.manifest.json");
    CHECK(manifest.find("\"num\": 3") != std::string::npos);
    CHECK(manifest.find("\"op\": \"random_swap\"") != std::string::npos);
    CHECK(manifest.find("\"seed\": 9") != std::string::npos);
}
