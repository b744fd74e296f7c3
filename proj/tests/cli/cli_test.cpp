// Integration test for the command-line binary: exit codes, artifacts,
// deterministic re-runs, and machine-readable error output. The binary path
// arrives in CNNTRADE_BIN.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "../support/synthetic.hpp"
#include "cnntrade/market_data.hpp"

namespace fs = std::filesystem;
namespace ts = cnntrade::testing;

namespace {

int failures = 0;

void expect(bool cond, const std::string& what) {
    if (!cond) {
        ++failures;
        std::cout << "[FAIL] " << what << "\n";
    } else {
        std::cout << "[ok] " << what << "\n";
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& bin, const fs::path& root, const std::string& args) {
    std::string cmd = "cd " + root.string() + " && \"" + bin + "\" " + args +
                      " > stdout.txt 2> stderr.txt";
    int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(rc);
}

}  // namespace

int main() {
    const char* bin_env = std::getenv("CNNTRADE_BIN");
    if (!bin_env) {
        std::cerr << "CNNTRADE_BIN is not set\n";
        return 1;
    }
    std::string bin = bin_env;

    fs::path root = fs::temp_directory_path() / "cnntrade_cli_test";
    fs::remove_all(root);
    fs::create_directories(root / "data");

    cnntrade::PriceSeries series = ts::random_walk_series(42, 620, "AAA", {2018, 1, 2});
    {
        std::ofstream out(root / "data" / "AAA.csv");
        out << cnntrade::serialize_ohlcv_csv(series);
    }
    {
        std::ofstream cfg(root / "config.json");
        cfg << R"({
          "data_dir": "data",
          "output_dir": "out",
          "tickers": ["AAA"],
          "split": {
            "train_start": "2018-01-01", "train_end": "2019-09-30",
            "test_start": "2019-10-01", "test_end": "2020-12-31"
          },
          "normalization": {"mode": "log_row_minmax", "epsilon": 1e-8},
          "train": {"max_epochs": 1, "batch_size": 64},
          "seed": 5
        })";
    }

    expect(run(bin, root, "--config config.json ingest") == 0, "ingest exits 0");
    expect(slurp(root / "stdout.txt").find("AAA") != std::string::npos,
           "ingest log names the ticker");

    // evaluate before its prerequisites: nonzero exit, JSON error on stderr
    // naming the producing command.
    expect(run(bin, root, "--config config.json evaluate") == 1,
           "evaluate without datasets exits 1");
    {
        nlohmann::json err = nlohmann::json::parse(slurp(root / "stderr.txt"));
        std::string message = err.at("error").get<std::string>();
        expect(message.find("build-dataset") != std::string::npos,
               "error JSON names the producing command");
        expect(err.at("command") == "evaluate", "error JSON names the failing command");
    }

    expect(run(bin, root, "--config config.json build-dataset") == 0, "build-dataset exits 0");
    expect(fs::exists(root / "out/AAA/dataset_train.jsonl"), "train dataset written");
    std::string first_build = slurp(root / "out/AAA/dataset_train.jsonl");

    expect(run(bin, root, "--config config.json diagnose") == 0, "diagnose exits 0");
    expect(fs::exists(root / "out/AAA/diagnostics/entropy.csv"), "entropy table written");

    expect(run(bin, root, "--config config.json train") == 0, "train exits 0");
    expect(fs::exists(root / "out/AAA/cnn.ckpt"), "cnn checkpoint written");
    expect(fs::exists(root / "out/AAA/lasso.ckpt"), "lasso checkpoint written");
    expect(fs::exists(root / "out/AAA/train_history.csv"), "training history written");

    expect(run(bin, root, "--config config.json evaluate") == 0, "evaluate exits 0");
    expect(fs::exists(root / "out/AAA/metrics_cnn.csv"), "cnn metrics written");
    expect(run(bin, root, "--config config.json backtest") == 0, "backtest exits 0");
    expect(fs::exists(root / "out/AAA/backtest_cnn.csv"), "backtest trajectory written");
    expect(run(bin, root, "--config config.json report") == 0, "report exits 0");
    expect(fs::exists(root / "out/report/summary.csv"), "summary written");
    expect(fs::exists(root / "out/report/assets_AAA_cnn.csv"), "asset series written");

    // Idempotence: the dataset artifact is byte-identical on a re-run.
    expect(run(bin, root, "--config config.json build-dataset") == 0, "re-run exits 0");
    expect(slurp(root / "out/AAA/dataset_train.jsonl") == first_build,
           "re-run produces byte-identical dataset");

    // Config and usage errors.
    expect(run(bin, root, "--config config.json --tickers ZZZ ingest") == 1,
           "ingest with no readable inputs exits 1");
    expect(run(bin, root, "--config missing.json ingest") != 0, "missing config exits nonzero");
    expect(run(bin, root, "--config config.json no-such-command") != 0,
           "unknown subcommand exits nonzero");
    expect(run(bin, root, "--config config.json") != 0, "missing subcommand exits nonzero");

    // Flag overrides reach the pipeline.
    expect(run(bin, root, "--config config.json --output-dir out2 build-dataset") == 0,
           "output-dir override accepted");
    expect(fs::exists(root / "out2/AAA/dataset_train.jsonl"), "override directory used");

    // The --mode flag switches the preprocessing variant; the dataset header
    // records which one was used.
    expect(run(bin, root,
               "--config config.json --output-dir out3 --mode global_minmax build-dataset") == 0,
           "mode override accepted");
    {
        std::ifstream in(root / "out3/AAA/dataset_train.jsonl");
        std::string header;
        std::getline(in, header);
        expect(header.find("\"mode\":\"global_minmax\"") != std::string::npos,
               "dataset header records the overridden mode");
    }
    expect(slurp(root / "out3/AAA/dataset_train.jsonl") !=
               slurp(root / "out/AAA/dataset_train.jsonl"),
           "different modes produce different datasets");

    fs::remove_all(root);
    if (failures == 0) std::cout << "CLI TEST: all checks passed\n";
    return failures == 0 ? 0 : 1;
}
