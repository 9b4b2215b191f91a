#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "latentmark/cli.hpp"
#include "latentmark/core/rng.hpp"
#include "latentmark/io/image_io.hpp"
#include "latentmark/matching/matching.hpp"

using namespace latentmark;

namespace {

int run(std::vector<std::string> args) {
    std::vector<char*> argv;
    args.insert(args.begin(), "latentmark");
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run({"no-such-command"}) == 2);
    CHECK(run({}) == 2);
    CHECK(run({"fpr-table", "--bogus-flag"}) == 2);
}

TEST_CASE("fpr-table rows match fpr_detection") {
    std::filesystem::remove_all("/tmp/lm_cli_fpr");
    CHECK(run({"fpr-table", "--k", "48", "--n-min", "25", "--n-max", "48", "--run-dir", "/tmp/lm_cli_fpr"}) == 0);
    std::ifstream f("/tmp/lm_cli_fpr/fpr_table.tsv");
    REQUIRE(f.good());
    std::string header;
    std::getline(f, header);
    CHECK(header == "n\tfpr_det");
    int rows = 0;
    int n;
    double fpr;
    while (f >> n >> fpr) {
        CHECK(fpr == doctest::Approx(matching::fpr_detection(n, 48)).epsilon(1e-9));
        ++rows;
    }
    CHECK(rows == 24);
    CHECK(std::filesystem::exists("/tmp/lm_cli_fpr/manifest.json"));
}

TEST_CASE("validation failures exit with code 3") {
    CHECK(run({"fpr-table", "--k", "48", "--n-min", "30", "--n-max", "20"}) == 3);
    // config with an invalid value
    {
        std::ofstream f("/tmp/lm_cli_bad.cfg");
        f << "lambda_I = -1\n";
    }
    CHECK(run({"fpr-table", "--config", "/tmp/lm_cli_bad.cfg"}) == 3);
}

TEST_CASE("missing files exit with code 4") {
    CHECK(run({"extract", "--extractor", "/tmp/does_not_exist.ckpt", "--in", "/tmp/nope.png"}) == 4);
}

TEST_CASE("attack subcommand round trips through image files") {
    std::filesystem::remove_all("/tmp/lm_cli_attack");
    std::filesystem::create_directories("/tmp/lm_cli_attack");
    Rng rng(1);
    nn::Tensor<real_t> img({3, 48, 48});
    for (int64_t i = 0; i < img.numel(); ++i) img[i] = static_cast<real_t>(rng.uniform(-0.8, 0.8));
    io::write_png("/tmp/lm_cli_attack/in.png", img);

    CHECK(run({"attack", "--in", "/tmp/lm_cli_attack/in.png", "--kind", "jpeg", "--parameter", "70",
               "--run-dir", "/tmp/lm_cli_attack"}) == 0);
    auto out = io::read_png("/tmp/lm_cli_attack/attacked.png");
    CHECK(out.shape() == img.shape());

    CHECK(run({"attack", "--in", "/tmp/lm_cli_attack/in.png", "--kind", "jpeg", "--parameter", "5",
               "--run-dir", "/tmp/lm_cli_attack"}) == 3);  // out of range
}

TEST_CASE("simulate-attribution prints a perfect-extraction report") {
    std::filesystem::remove_all("/tmp/lm_cli_sim");
    CHECK(run({"simulate-attribution", "--num-users", "200", "--images-per-user", "1", "--flip-p", "0",
               "--k", "48", "--run-dir", "/tmp/lm_cli_sim"}) == 0);
    std::ifstream f("/tmp/lm_cli_sim/simulation.txt");
    std::string line;
    std::getline(f, line);
    CHECK(line.find("accuracy 1") != std::string::npos);
    CHECK(line.find("false_attributions 0") != std::string::npos);
}

TEST_CASE("plot emits an svg for the fpr curve") {
    std::filesystem::remove_all("/tmp/lm_cli_plot");
    CHECK(run({"plot", "--fpr-k", "48", "--run-dir", "/tmp/lm_cli_plot"}) == 0);
    std::ifstream f("/tmp/lm_cli_plot/plot.svg");
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("polyline") != std::string::npos);
}
