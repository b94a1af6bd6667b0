#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "mvlab/io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using mvlab::testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
};

/// Runs the installed binary through the shell, capturing stdout.
CliResult run_cli(const std::string& args, bool merge_stderr = false) {
    const std::string cmd = std::string("\"") + MVLAB_BIN + "\" " + args +
                            (merge_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    std::array<char, 512> buf;
    while (std::fgets(buf.data(), buf.size(), pipe)) res.out += buf.data();
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

}  // namespace

TEST_CASE("layout-inspect output matches the checked-in golden file") {
    const CliResult res = run_cli(
        "layout-inspect --scheme ts --delta 3 --t 2 --height 1 --width 1 --views 2 --views 1");
    CHECK(res.exit_code == 0);
    const std::string golden =
        mvlab::read_text_file(std::string(MVLAB_GOLDEN_DIR) + "/ts_layout.txt");
    CHECK(res.out == golden);
}

TEST_CASE("layout-inspect mirrors stdout into --out") {
    const TempDir dir("cli_layout");
    const std::string out = dir.str("layout.txt");
    const CliResult res = run_cli("layout-inspect --scheme vanilla --t 2 --height 1 --width 2 "
                                  "--views 1 --out \"" + out + "\"");
    CHECK(res.exit_code == 0);
    CHECK(mvlab::read_text_file(out) == res.out);
    CHECK(res.out.find("2 0 0 ref:0:0") != std::string::npos);
}

TEST_CASE("usage errors exit 1 and runtime errors exit 2") {
    CHECK(run_cli("--definitely-not-a-flag").exit_code == 1);
    CHECK(run_cli("layout-inspect --scheme bogus").exit_code == 1);
    CHECK(run_cli("").exit_code == 1);  // a subcommand is required

    const TempDir dir("cli_errors");
    const CliResult missing = run_cli(
        "sample --checkpoint \"" + dir.str("absent.safetensors") + "\" --out \"" +
            dir.str("s") + "\"",
        true);
    CHECK(missing.exit_code == 2);
    CHECK(missing.out.find("error:") != std::string::npos);

    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("train --help").exit_code == 0);
}

TEST_CASE("train then sample produces a checkpoint, losses, and frames") {
    const TempDir dir("cli_train");
    const std::string tdir = dir.str("t");
    const CliResult train =
        run_cli("train --out \"" + tdir + "\" --steps 8 --seed 3");
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(tdir + "/checkpoint.safetensors"));
    CHECK(fs::exists(tdir + "/loss.csv"));
    CHECK(fs::exists(tdir + "/run_config.json"));
    const std::string losses = mvlab::read_text_file(tdir + "/loss.csv");
    CHECK(losses.rfind("step,loss\n", 0) == 0);
    CHECK(std::count(losses.begin(), losses.end(), '\n') == 9);

    const std::string sdir = dir.str("s");
    const CliResult sampled = run_cli("sample --checkpoint \"" + tdir +
                                      "/checkpoint.safetensors\" --out \"" + sdir +
                                      "\" --steps 4 --seed 5 --prompt \"a blue mug\"");
    CHECK(sampled.exit_code == 0);
    CHECK(sampled.out.find("12 denoiser calls") != std::string::npos);
    CHECK(fs::exists(sdir + "/latent.npy"));
    CHECK(fs::exists(sdir + "/frame_000.ppm"));
    CHECK(fs::exists(sdir + "/frame_001.ppm"));

    const mvlab::NpyArray latent = mvlab::load_npy(sdir + "/latent.npy");
    REQUIRE(latent.shape.size() == 4);
    CHECK(latent.shape[0] == 2);  // default training grid is two frames
}

TEST_CASE("curate emits a deterministic manifest digest") {
    const TempDir dir("cli_curate");
    const CliResult r1 =
        run_cli("curate --out \"" + dir.str("c1") + "\" --seed 7 --specs 6");
    const CliResult r2 =
        run_cli("curate --out \"" + dir.str("c2") + "\" --seed 7 --specs 6");
    CHECK(r1.exit_code == 0);
    CHECK(r2.exit_code == 0);
    CHECK(fs::exists(dir.str("c1") + "/manifest.jsonl"));

    const auto digest_line = [](const std::string& out) {
        const std::size_t pos = out.find("digest: ");
        REQUIRE(pos != std::string::npos);
        return out.substr(pos);
    };
    CHECK(digest_line(r1.out) == digest_line(r2.out));
    CHECK(r1.out.find("records: 6") != std::string::npos);
}

TEST_CASE("eval then report turns curated assets into tables and figures") {
    const TempDir dir("cli_eval");
    REQUIRE(run_cli("curate --out \"" + dir.str("c") + "\" --seed 11 --specs 4").exit_code == 0);

    // Reuse curated crops as both generated and reference views.
    std::string manifest;
    int records = 0;
    for (const auto& entry : fs::directory_iterator(dir.str("c") + "/refs")) {
        std::string paths;
        for (const auto& f : fs::directory_iterator(entry.path())) {
            if (!paths.empty()) paths += ",";
            paths += "\"" + fs::relative(f.path(), dir.str("c")).string() + "\"";
        }
        manifest += "{\"sample_id\":\"" + entry.path().filename().string() +
                    "\",\"gen\":[" + paths + "],\"ref\":[" + paths +
                    "],\"scene\":\"OC\"}\n";
        ++records;
    }
    REQUIRE(records >= 2);
    mvlab::write_text_file(dir.str("c") + "/eval.jsonl", manifest);

    const CliResult eval_res = run_cli("eval --manifest \"" + dir.str("c") +
                                       "/eval.jsonl\" --out \"" + dir.str("e") + "\"");
    CHECK(eval_res.exit_code == 0);
    CHECK(fs::exists(dir.str("e") + "/metrics.csv"));

    const CliResult report_res = run_cli("report --table \"" + dir.str("e") +
                                         "/metrics.csv\" --out \"" + dir.str("r") + "\"");
    CHECK(report_res.exit_code == 0);
    CHECK(fs::exists(dir.str("r") + "/aggregate.csv"));
    CHECK(fs::exists(dir.str("r") + "/metric_pair_v2r.svg"));
}
