#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(CMT_CLI_BINARY) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path tmp_dir() {
    auto dir = fs::temp_directory_path() / "cmt_cli_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("gen-synthetic --help") == 0);
    CHECK(run("gen-synthetic --no-such-flag") == 2);
    CHECK(run("definitely-not-a-command") == 2);
    CHECK(run("gen-synthetic --out x.txt") == 2);  // --seed and --num-records required
}

TEST_CASE("gen-synthetic is deterministic") {
    auto dir = tmp_dir();
    auto a = dir / "gen_a.txt";
    auto b = dir / "gen_b.txt";
    CHECK(run("gen-synthetic --seed 7 --num-records 40 --out " + a.string()) == 0);
    CHECK(run("gen-synthetic --seed 7 --num-records 40 --out " + b.string()) == 0);
    CHECK(slurp(a) == slurp(b));
    auto c = dir / "gen_c.txt";
    CHECK(run("gen-synthetic --seed 8 --num-records 40 --out " + c.string()) == 0);
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("preprocess error handling and fixed point") {
    auto dir = tmp_dir();
    CHECK(run("preprocess --in " + (dir / "missing.txt").string() + " --out " +
              (dir / "x.txt").string()) == 2);

    // A clean synthetic file is already in the output alphabet.
    auto clean = dir / "clean.txt";
    auto out1 = dir / "clean_pre1.txt";
    auto out2 = dir / "clean_pre2.txt";
    REQUIRE(run("gen-synthetic --seed 3 --num-records 20 --out " + clean.string()) == 0);
    CHECK(run("preprocess --in " + clean.string() + " --out " + out1.string()) == 0);
    CHECK(run("preprocess --in " + out1.string() + " --out " + out2.string()) == 0);
    CHECK(slurp(clean) == slurp(out1));
    CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("config file values are applied and unknown keys rejected") {
    auto dir = tmp_dir();
    auto cfg = dir / "gen.cfg";
    {
        std::ofstream out(cfg);
        out << "seed = 5\nnum-records = 10\n";
    }
    auto a = dir / "cfg_a.txt";
    CHECK(run("gen-synthetic --config " + cfg.string() + " --out " + a.string()) == 0);
    CHECK(run("gen-synthetic --seed 5 --num-records 10 --out " +
              (dir / "cfg_b.txt").string()) == 0);
    CHECK(slurp(a) == slurp(dir / "cfg_b.txt"));

    {
        std::ofstream out(cfg, std::ios::app);
        out << "bogus-key = 1\n";
    }
    CHECK(run("gen-synthetic --config " + cfg.string() + " --out " + a.string()) == 2);
}

TEST_CASE("tiny end-to-end pipeline exits cleanly") {
    auto dir = tmp_dir();
    auto data = dir / "e2e.txt";
    auto vocab = dir / "e2e.vocab";
    auto pre = dir / "e2e_pre.ckpt";
    auto ft = dir / "e2e_ft.ckpt";
    auto report = dir / "e2e_report.txt";
    REQUIRE(run("gen-synthetic --seed 9 --num-records 30 --out " + data.string()) == 0);
    REQUIRE(run("build-vocab --in " + data.string() + " --out " + vocab.string()) == 0);
    REQUIRE(run("pretrain --in " + data.string() + " --vocab " + vocab.string() +
                " --out " + pre.string() +
                " --seed 9 --epochs 1 --max-steps 3 --d-model 8 --layers 1 --heads 1 "
                "--d-ff 8 --max-len 8 --log " + (dir / "pre.log").string()) == 0);
    REQUIRE(run("finetune --in " + data.string() + " --vocab " + vocab.string() +
                " --init " + pre.string() + " --out " + ft.string() +
                " --seed 9 --epochs 1 --max-steps 3 --log " +
                (dir / "ft.log").string()) == 0);
    REQUIRE(run("eval --in " + data.string() + " --vocab " + vocab.string() +
                " --ckpt " + ft.string() + " --out " + report.string()) == 0);
    CHECK(slurp(report).find("macro_f1 ") == 0);
    CHECK(run("eval --in " + data.string() + " --vocab " + vocab.string() +
              " --ckpt " + ft.string() + " --json") == 0);

    auto pred = dir / "e2e_pred.txt";
    CHECK(run("predict --in " + data.string() + " --vocab " + vocab.string() +
              " --ckpt " + ft.string() + " --out " + pred.string()) == 0);
    CHECK(!slurp(pred).empty());
}
