#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "pptflow/cli.hpp"
#include "pptflow/synthetic.hpp"

using namespace pptflow;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(PPTFLOW_FIXTURES) / "golden6";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pptflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("PPTFLOW_SEED");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) const { std::ofstream(dir_ / name) << content; }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Raw (unstandardized) two-sine series as CSV: 559 rows give 500 windows at T=48, H=12.
std::string two_sine_csv(std::size_t rows) {
  std::string csv = "a,b\n";
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < rows; ++t) {
    const double x = static_cast<double>(t);
    csv += format_number(std::sin(tau * x / 12.0) + 0.5 * std::sin(tau * x / 24.0 + 0.7)) + "," +
           format_number(std::cos(tau * x / 16.0) + 0.4 * std::sin(tau * x / 8.0 + 1.3)) + "\n";
  }
  return csv;
}

const char* kSmallModel =
    "# small model for the synthetic series\n"
    "lookback = 48\n"
    "d_model = 16\n"
    "d_ff = 32\n"
    "heads = 2\n"
    "top_k = 2\n"
    "periodic_blocks = 1\n"
    "decoder_layers = 1\n"
    "kernel_sizes = 1,3\n"
    "dropout = 0\n"
    "seed = 1\n";

}  // namespace

TEST_F(CliTest, ExtractMatchesGoldenAndWritesStats) {
  const std::vector<std::string> base{"extract", "--meta", (kGolden / "01_recordingMeta.csv").string(), "--tracks",
                                      (kGolden / "01_tracks.csv").string(), "--tracks-meta", (kGolden / "01_tracksMeta.csv").string()};
  auto args = base;
  args.insert(args.end(), {"--direction", "negative_x", "--out", path("neg.csv")});
  ASSERT_EQ(run(args), 0) << err_.str();
  EXPECT_EQ(slurp(path("neg.csv")), slurp(kGolden / "01_flow_negative_x.csv"));
  auto stats = nlohmann::json::parse(slurp(path("neg.csv.json")));
  EXPECT_EQ(stats["gap_rows"], nlohmann::json::array({1}));
  EXPECT_EQ(stats["direction"], "negative_x");

  args = base;
  args.insert(args.end(), {"--out", path("pos.csv")});
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(slurp(path("pos.csv")), slurp(kGolden / "01_flow_positive_x.csv"));
}

TEST_F(CliTest, ExtractErrors) {
  // Semicolon-delimited tracks: the header becomes one unknown column.
  std::string tracks = slurp(kGolden / "01_tracks.csv");
  std::replace(tracks.begin(), tracks.end(), ',', ';');
  write("tracks_semicolon.csv", tracks);
  EXPECT_EQ(run({"extract", "--meta", (kGolden / "01_recordingMeta.csv").string(), "--tracks", path("tracks_semicolon.csv"),
                 "--tracks-meta", (kGolden / "01_tracksMeta.csv").string(), "--out", path("x.csv")}),
            2);
  EXPECT_NE(err_.str().find("frame"), std::string::npos) << err_.str();

  // Positive-only segment: the negative direction is empty.
  std::string meta = "id,class,drivingDirection,length\n", pos_tracks;
  {
    std::istringstream in(slurp(kGolden / "01_tracksMeta.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (line.find(",2,") != std::string::npos) meta += line + "\n";
    std::istringstream tin(slurp(kGolden / "01_tracks.csv"));
    std::getline(tin, line);
    pos_tracks = line + "\n";
    while (std::getline(tin, line)) {
      const long id = std::stol(line.substr(line.find(',') + 1));
      if (id <= 4) pos_tracks += line + "\n";
    }
  }
  write("meta_pos.csv", meta);
  write("tracks_pos.csv", pos_tracks);
  EXPECT_EQ(run({"extract", "--meta", (kGolden / "01_recordingMeta.csv").string(), "--tracks", path("tracks_pos.csv"), "--tracks-meta",
                 path("meta_pos.csv"), "--direction", "negative_x", "--out", path("empty.csv")}),
            3);
  EXPECT_FALSE(fs::exists(path("empty.csv")));
  EXPECT_FALSE(fs::exists(path("empty.csv.json")));

  EXPECT_EQ(run({"extract", "--meta", path("missing.csv"), "--tracks", path("tracks_pos.csv"), "--tracks-meta", path("meta_pos.csv"),
                 "--out", path("m.csv")}),
            66);
  EXPECT_EQ(run({"extract", "--meta", "a"}), 2);  // missing required flags
}

TEST_F(CliTest, HelpDocumentsEveryFlag) {
  EXPECT_EQ(run({"train", "--help"}), 0);
  for (const char* flag : {"--data", "--horizon", "--config", "--epochs", "--seed", "--out", "--log"})
    EXPECT_NE(out_.str().find(flag), std::string::npos) << flag;
  for (const auto& key : cli::config_keys()) EXPECT_NE(out_.str().find(key), std::string::npos) << key;
  for (const char* cmd : {"extract", "detect-periods", "predict", "congestion", "evaluate", "plot"}) {
    EXPECT_EQ(run({cmd, "--help"}), 0) << cmd;
    EXPECT_NE(out_.str().find("--out"), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, ConfigRejectsUnknownKeysAndBadValues) {
  write("series.csv", two_sine_csv(200));
  write("bad.cfg", "d_model = 8\nlearning_rate = 0.1\n");
  EXPECT_EQ(run({"train", "--data", path("series.csv"), "--config", path("bad.cfg"), "--out", path("m.ckpt")}), 2);
  EXPECT_NE(err_.str().find("learning_rate"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find(":2"), std::string::npos) << err_.str();
  write("bad2.cfg", "dropout = lots\n");
  EXPECT_EQ(run({"train", "--data", path("series.csv"), "--config", path("bad2.cfg"), "--out", path("m.ckpt")}), 2);
  write("bad3.cfg", "heads = 3\nd_model = 16\n");
  EXPECT_EQ(run({"train", "--data", path("series.csv"), "--config", path("bad3.cfg"), "--out", path("m.ckpt")}), 2);
  EXPECT_FALSE(fs::exists(path("m.ckpt")));

  cli::RunConfig rc;
  cli::apply_config_text(rc, "targets = k, v_x\nkernel_sizes=1,3,5,7\nuse_decoder=false\n", "inline");
  EXPECT_EQ(rc.targets, (std::vector<std::string>{"k", "v_x"}));
  EXPECT_EQ(rc.model.kernel_sizes, (std::vector<std::size_t>{1, 3, 5, 7}));
  EXPECT_FALSE(rc.model.use_decoder);
}

TEST_F(CliTest, HorizonLongerThanSeriesIsDomainError) {
  write("short.csv", two_sine_csv(40));
  EXPECT_EQ(run({"train", "--data", path("short.csv"), "--horizon", "30", "--out", path("m.ckpt")}), 3);
  EXPECT_FALSE(fs::exists(path("m.ckpt")));
}

TEST_F(CliTest, SeedPrecedenceAndDeterministicLogs) {
  write("series.csv", two_sine_csv(400));
  write("small.cfg", std::string(kSmallModel) + "d_model = 8\nd_ff = 16\n");
  const std::vector<std::string> base{"train", "--data", path("series.csv"), "--horizon", "12", "--config", path("small.cfg"), "--epochs", "2"};
  auto with_out = [&](const std::string& name) {
    auto a = base;
    a.insert(a.end(), {"--out", path(name)});
    return a;
  };
  ASSERT_EQ(run(with_out("a.ckpt")), 0) << err_.str();
  ASSERT_EQ(run(with_out("b.ckpt")), 0);
  EXPECT_EQ(slurp(path("a.ckpt.log.jsonl")), slurp(path("b.ckpt.log.jsonl")));
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(load_checkpoint(path("a.ckpt")).meta["seed"], 1);

  setenv("PPTFLOW_SEED", "5", 1);
  ASSERT_EQ(run(with_out("env.ckpt")), 0);
  EXPECT_EQ(load_checkpoint(path("env.ckpt")).meta["seed"], 5);
  EXPECT_NE(slurp(path("env.ckpt.log.jsonl")), slurp(path("a.ckpt.log.jsonl")));
  auto flagged = with_out("flag.ckpt");
  flagged.insert(flagged.end(), {"--seed", "9"});
  ASSERT_EQ(run(flagged), 0);
  EXPECT_EQ(load_checkpoint(path("flag.ckpt")).meta["seed"], 9);
  unsetenv("PPTFLOW_SEED");
}

TEST_F(CliTest, TrainPredictEvaluateOnSyntheticSeries) {
  write("series.csv", two_sine_csv(559));
  write("model.cfg", std::string(kSmallModel) + "epochs = 200\nstop_val_mse = 0.01\n");
  ASSERT_EQ(run({"train", "--data", path("series.csv"), "--horizon", "12", "--config", path("model.cfg"), "--out", path("m.ckpt")}), 0) << err_.str();
  const auto summary = nlohmann::json::parse(out_.str());
  EXPECT_LT(summary["val"]["mse"].get<double>(), 0.01);
  ASSERT_TRUE(fs::exists(path("m.ckpt")));
  std::size_t lines = 0;
  std::istringstream log(slurp(path("m.ckpt.log.jsonl")));
  for (std::string line; std::getline(log, line); ++lines) {
    const auto rec = nlohmann::json::parse(line);
    EXPECT_TRUE(rec.contains("val_rmse"));
  }
  EXPECT_EQ(lines, summary["epochs_run"].get<std::size_t>());

  // Re-evaluating the validation split reproduces the stored validation metrics exactly.
  ASSERT_EQ(run({"evaluate", "--checkpoint", path("m.ckpt"), "--data", path("series.csv"), "--split", "val"}), 0) << err_.str();
  const auto ev = nlohmann::json::parse(out_.str());
  const Checkpoint ck = load_checkpoint(path("m.ckpt"));
  EXPECT_EQ(ev["standardized"]["mse"].get<double>(), ck.meta["val_metrics"]["mse"].get<double>());
  EXPECT_EQ(ev["standardized"]["mae"].get<double>(), ck.meta["val_metrics"]["mae"].get<double>());
  EXPECT_TRUE(ev.contains("physical"));

  ASSERT_EQ(run({"predict", "--checkpoint", path("m.ckpt"), "--data", path("series.csv"), "--origin", "0", "--out", path("f.csv")}), 0);
  const CsvTable f = CsvTable::load(path("f.csv"));
  EXPECT_EQ(f.rows(), 12u);
  EXPECT_EQ(f.header(), (std::vector<std::string>{"step", "a", "b"}));
  // Physical units: the forecast tracks the clean signal at rows 48..59.
  const cli::SeriesTable truth = cli::read_series_csv(path("series.csv"));
  for (std::size_t h = 0; h < 12; ++h) EXPECT_NEAR(f.number(h, 1), truth.values[(48 + h) * 2], 0.35);

  // Predicted rows evaluated against the true rows.
  std::string truth_csv = "step,a,b\n";
  for (std::size_t h = 0; h < 12; ++h)
    truth_csv += std::to_string(h + 1) + "," + format_number(truth.values[(48 + h) * 2]) + "," + format_number(truth.values[(48 + h) * 2 + 1]) + "\n";
  write("truth.csv", truth_csv);
  ASSERT_EQ(run({"evaluate", "--pred", path("f.csv"), "--truth", path("truth.csv"), "--checkpoint", path("m.ckpt")}), 0) << err_.str();
  const auto pt = nlohmann::json::parse(out_.str());
  EXPECT_GT(pt["physical"]["mae"].get<double>(), 0.0);
  EXPECT_TRUE(pt.contains("standardized"));

  // Checkpoint/data mismatch and corruption.
  write("other.csv", "a,c\n1,2\n");
  EXPECT_EQ(run({"predict", "--checkpoint", path("m.ckpt"), "--data", path("other.csv"), "--out", path("g.csv")}), 5);
  std::string bytes = slurp(path("m.ckpt"));
  bytes[0] = 'X';
  write("bad.ckpt", bytes);
  EXPECT_EQ(run({"predict", "--checkpoint", path("bad.ckpt"), "--data", path("series.csv"), "--out", path("g.csv")}), 5);
  EXPECT_FALSE(fs::exists(path("g.csv")));
}

TEST_F(CliTest, EvaluateIdenticalIsZero) {
  write("p.csv", "step,k,v_x\n1,0.1,5\n2,0.2,6\n");
  ASSERT_EQ(run({"evaluate", "--pred", path("p.csv"), "--truth", path("p.csv"), "--out", path("m.json")}), 0);
  const auto m = nlohmann::json::parse(slurp(path("m.json")));
  EXPECT_EQ(m["physical"]["mae"], 0.0);
  EXPECT_EQ(m["physical"]["mse"], 0.0);
  EXPECT_EQ(m["physical"]["rmse"], 0.0);
  write("q.csv", "step,k,q\n1,0.1,5\n2,0.2,6\n");
  EXPECT_EQ(run({"evaluate", "--pred", path("p.csv"), "--truth", path("q.csv")}), 2);
}

TEST_F(CliTest, CongestionOnConstantSeries) {
  std::string csv = "second,k,v_x\n";
  for (int t = 0; t < 5; ++t) csv += std::to_string(t) + ",0.12,0\n";
  write("c.csv", csv);
  ASSERT_EQ(run({"congestion", "--data", path("c.csv"), "--density-range", "0,0.12", "--speed-range", "0,12", "--out", path("p.csv")}), 0)
      << err_.str();
  const CsvTable t = CsvTable::load(path("p.csv"));
  ASSERT_EQ(t.rows(), 5u);
  EXPECT_EQ(t.header(), (std::vector<std::string>{"t", "P", "label"}));
  FuzzySystem ref{make_variable("density", 0.0, 0.12), make_variable("speed", 0.0, 12.0), {}};
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(t.number(r, 1), ref.infer(0.12, 0.0).probability);
    EXPECT_EQ(t.text(r, 2), "full");
    EXPECT_EQ(t.number(r, 0), static_cast<double>(r));
  }
  EXPECT_GT(t.number(0, 1), 0.85);
  EXPECT_LT(t.number(0, 1), 8.0 / 9.0);

  // Calibrating on a constant series has a degenerate range.
  EXPECT_EQ(run({"congestion", "--data", path("c.csv"), "--out", path("p2.csv")}), 2);
  write("nok.csv", "second,density,v_x\n0,1,2\n");
  EXPECT_EQ(run({"congestion", "--data", path("nok.csv"), "--density-range", "0,1", "--speed-range", "0,1", "--out", path("p3.csv")}), 2);
}

TEST_F(CliTest, DetectPeriodsFindsSinePeriods) {
  write("s.csv", two_sine_csv(96));
  ASSERT_EQ(run({"detect-periods", "--data", path("s.csv"), "-k", "4"}), 0) << err_.str();
  const auto rep = nlohmann::json::parse(out_.str());
  std::set<std::size_t> periods;
  for (const auto& p : rep["periods"]) periods.insert(p["period"].get<std::size_t>());
  for (std::size_t p : {12, 24, 16, 8}) EXPECT_TRUE(periods.contains(p)) << p;
  EXPECT_EQ(run({"detect-periods", "--data", path("s.csv"), "--columns", "zz"}), 2);
  EXPECT_EQ(run({"detect-periods", "--data", path("s.csv"), "--length", "500"}), 3);
}

TEST_F(CliTest, PlotWritesSvgAndRejectsEmptySeries) {
  write("s.csv", "second,k,v_x\n0,0.1,5\n1,0.2,4\n2,0.15,6\n");
  write("f.csv", "step,k,v_x\n1,0.12,5\n2,0.13,5.5\n");
  ASSERT_EQ(run({"plot", "--data", path("s.csv"), "--columns", "k", "--forecast", path("f.csv"), "--out", path("p.svg")}), 0) << err_.str();
  const std::string svg = slurp(path("p.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t polylines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++polylines;
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find("k (forecast)"), std::string::npos);

  write("p.csv", "t,P,label\n0,0.5,medium\n1,0.9,full\n");
  EXPECT_EQ(run({"plot", "--data", path("p.csv"), "--out", path("pc.svg")}), 0) << err_.str();
  write("empty.csv", "second,k\n");
  EXPECT_EQ(run({"plot", "--data", path("empty.csv"), "--out", path("e.svg")}), 3);
  EXPECT_FALSE(fs::exists(path("e.svg")));
}

TEST_F(CliTest, DivergenceExitsWithLastGoodCheckpoint) {
  write("series.csv", two_sine_csv(400));
  write("hot.cfg", std::string(kSmallModel) + "d_model = 8\nd_ff = 16\nlr_init = 1e300\nepochs = 3\n");
  EXPECT_EQ(run({"train", "--data", path("series.csv"), "--horizon", "12", "--config", path("hot.cfg"), "--out", path("m.ckpt")}), 4);
  EXPECT_NE(err_.str().find(path("m.ckpt")), std::string::npos) << err_.str();
  const Checkpoint ck = load_checkpoint(path("m.ckpt"));
  EXPECT_EQ(ck.meta["stop_reason"], "diverged");
}
