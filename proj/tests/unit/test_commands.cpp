#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/synthetic.hpp"
#include "cnntrade/commands.hpp"

using namespace cnntrade;
namespace ts = cnntrade::testing;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path root;

    explicit Workspace(const std::string& name) {
        root = fs::temp_directory_path() / name;
        fs::remove_all(root);
        fs::create_directories(root / "data");
    }
    ~Workspace() { fs::remove_all(root); }

    void add_ticker(const std::string& ticker, const PriceSeries& series) {
        std::ofstream out(root / "data" / (ticker + ".csv"));
        out << serialize_ohlcv_csv(series);
    }

    std::string config_text(const std::string& tickers_json) const {
        return R"({
          "data_dir": "data",
          "output_dir": "out",
          "tickers": )" + tickers_json + R"(,
          "split": {
            "train_start": "2018-01-01", "train_end": "2019-06-30",
            "test_start": "2019-07-01", "test_end": "2020-12-31"
          },
          "normalization": {"mode": "log_row_minmax", "epsilon": 1e-8},
          "train": {"max_epochs": 2, "batch_size": 16},
          "seed": 11
        })";
    }

    RunConfig config(const std::string& tickers_json = R"(["AAA"])") const {
        return parse_config_text(config_text(tickers_json), root);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing resolves paths and seeds the trainer") {
    Workspace ws("cnntrade_cfg_ws");
    RunConfig cfg = ws.config();
    CHECK(cfg.data_dir == ws.root / "data");
    CHECK(cfg.output_dir == ws.root / "out");
    CHECK(cfg.seed == 11);
    CHECK(cfg.train.seed == 11);
    CHECK(cfg.train.max_epochs == 2);
    CHECK(cfg.norm.kind == NormKind::LogRowMinMax);
}

TEST_CASE("config validation rejects impossible settings up front") {
    Workspace ws("cnntrade_cfg_bad");
    // Test range before the train range.
    std::string bad = R"({
      "data_dir": "data", "output_dir": "out", "tickers": ["A"],
      "split": {"train_start": "2018-01-01", "train_end": "2020-01-01",
                 "test_start": "2019-01-01", "test_end": "2021-01-01"}
    })";
    CHECK_THROWS_AS(parse_config_text(bad, ws.root), std::invalid_argument);

    std::string bad_mode = R"({
      "data_dir": "data", "output_dir": "out", "tickers": ["A"],
      "split": {"train_start": "2018-01-01", "train_end": "2019-01-01",
                 "test_start": "2019-06-01", "test_end": "2021-01-01"},
      "normalization": {"mode": "zscore"}
    })";
    CHECK_THROWS_AS(parse_config_text(bad_mode, ws.root), std::invalid_argument);

    std::string no_tickers = R"({
      "data_dir": "data", "output_dir": "out", "tickers": [],
      "split": {"train_start": "2018-01-01", "train_end": "2019-01-01",
                 "test_start": "2019-06-01", "test_end": "2021-01-01"}
    })";
    CHECK_THROWS_AS(parse_config_text(no_tickers, ws.root), std::invalid_argument);

    std::string dup_indicators = R"({
      "data_dir": "data", "output_dir": "out", "tickers": ["A"],
      "split": {"train_start": "2018-01-01", "train_end": "2019-01-01",
                 "test_start": "2019-06-01", "test_end": "2021-01-01"},
      "indicator_order": ["rsi","rsi","sma","ema","wma","hma","tema","cci",
                           "cmo","roc","macd","ppo","cmf","adx","psar"]
    })";
    CHECK_THROWS_AS(parse_config_text(dup_indicators, ws.root), std::invalid_argument);

    CHECK_THROWS_AS(parse_config_text("not json at all", ws.root), std::invalid_argument);
}

TEST_CASE("ingest reports per-ticker stats and keeps going past bad files") {
    Workspace ws("cnntrade_ingest_ws");
    ws.add_ticker("AAA", ts::random_walk_series(1, 50, "AAA", {2018, 1, 2}));
    {
        std::ofstream out(ws.root / "data" / "BBB.csv");
        out << "date,open,high,low,close,volume\n2018-01-02,100,99,98,100,1\n";  // high < low
    }

    RunConfig cfg = ws.config(R"(["AAA", "BBB", "CCC"])");
    std::ostringstream log;
    IngestReport report = cmd_ingest(cfg, log);
    REQUIRE(report.entries.size() == 3);
    CHECK(report.entries[0].error.empty());
    CHECK(report.entries[0].rows == 50);
    CHECK_FALSE(report.entries[1].error.empty());  // invariant violation
    CHECK_FALSE(report.entries[2].error.empty());  // missing file
    CHECK(report.failures == 2);
    CHECK(fs::exists(cfg.output_dir / "ingest_report.json"));
}

TEST_CASE("ingest fails loudly on a missing data directory") {
    Workspace ws("cnntrade_ingest_missing");
    RunConfig cfg = ws.config();
    cfg.data_dir = ws.root / "nope";
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(cmd_ingest(cfg, log), doctest::Contains("does not exist"),
                         std::runtime_error);
}

TEST_CASE("build-dataset writes deterministic files and a label summary") {
    Workspace ws("cnntrade_build_ws");
    ws.add_ticker("AAA", ts::random_walk_series(3, 760, "AAA", {2018, 1, 2}));
    RunConfig cfg = ws.config();

    std::ostringstream log;
    auto summaries = cmd_build_dataset(cfg, log);
    REQUIRE(summaries.size() == 1);
    CHECK(summaries[0].train_counts[0] + summaries[0].train_counts[1] +
              summaries[0].train_counts[2] >
          0);

    auto train_path = artifacts::dataset(cfg, "AAA", "train");
    auto test_path = artifacts::dataset(cfg, "AAA", "test");
    REQUIRE(fs::exists(train_path));
    REQUIRE(fs::exists(test_path));
    CHECK(fs::exists(cfg.ticker_dir("AAA") / "label_summary.json"));

    std::string first_train = slurp(train_path);
    std::string first_test = slurp(test_path);

    // Idempotence: byte-identical artifacts on a re-run.
    std::ostringstream log2;
    cmd_build_dataset(cfg, log2);
    CHECK(slurp(train_path) == first_train);
    CHECK(slurp(test_path) == first_test);
}

TEST_CASE("diagnose emits the entropy, chi-square, and burstiness tables") {
    Workspace ws("cnntrade_diag_ws");
    ws.add_ticker("AAA", ts::random_walk_series(5, 700, "AAA", {2018, 1, 2}));
    RunConfig cfg = ws.config();
    std::ostringstream log;
    cmd_diagnose(cfg, log);

    auto dir = cfg.ticker_dir("AAA") / "diagnostics";
    CHECK(fs::exists(dir / "entropy.csv"));
    CHECK(fs::exists(dir / "chi_square_scaled.csv"));
    CHECK(fs::exists(dir / "chi_square_raw.csv"));
    CHECK(fs::exists(dir / "burst_rsi_14_series.csv"));
    CHECK(fs::exists(dir / "burst_rsi_14_hist.csv"));

    std::string entropy_text = slurp(dir / "entropy.csv");
    CHECK(entropy_text.find("log_row_minmax") != std::string::npos);
    std::string series_text = slurp(dir / "burst_rsi_14_series.csv");
    CHECK(series_text.rfind("date,value", 0) == 0);
}

TEST_CASE("pipeline commands name their missing prerequisites") {
    Workspace ws("cnntrade_prereq_ws");
    ws.add_ticker("AAA", ts::random_walk_series(7, 700, "AAA", {2018, 1, 2}));
    RunConfig cfg = ws.config();
    std::ostringstream log;

    CHECK_THROWS_WITH_AS(cmd_train(cfg, log), doctest::Contains("build-dataset"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(cmd_evaluate(cfg, log), doctest::Contains("build-dataset"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(cmd_report(cfg, log), doctest::Contains("evaluate"),
                         std::runtime_error);

    cmd_build_dataset(cfg, log);
    CHECK_THROWS_WITH_AS(cmd_evaluate(cfg, log), doctest::Contains("train"), std::runtime_error);
}
