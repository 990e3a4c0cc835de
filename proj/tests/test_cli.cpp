#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "covnet/cli.hpp"

using namespace covnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("covnet_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> tiny_train(const TempDir& dir, const std::string& task) {
  return {"train", "--data", dir / "gen/plays.jsonl", "--task", task, "--out", dir / "model", "--epochs", "1",
          "--layers", "1", "--d-model", "16", "--heads", "2"};
}

}  // namespace

TEST_CASE("gen is deterministic and writes a manifest") {
  TempDir dir;
  const Run a = run({"gen", "--n-plays", "25", "--seed", "5", "--out", dir / "a"});
  const Run b = run({"gen", "--n-plays", "25", "--seed", "5", "--out", dir / "b"});
  const Run c = run({"gen", "--n-plays", "25", "--seed", "6", "--out", dir / "c"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(slurp(dir / "a/plays.jsonl") == slurp(dir / "b/plays.jsonl"));
  CHECK(slurp(dir / "a/plays.jsonl") != slurp(dir / "c/plays.jsonl"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a/manifest.json"));
  CHECK(manifest["n_plays"] == 25);
  CHECK(a.out.find("wrote 25 plays") != std::string::npos);

  const Run teams = run({"gen", "--n-plays", "6", "--out", dir / "t", "--team", "AAA:0", "--team", "BBB:0.8"});
  CHECK(teams.code == kExitOk);
  CHECK(run({"gen", "--out", dir / "t", "--team", "AAA"}).code == kExitUsage);
  CHECK(run({"gen", "--out", dir / "t", "--p-disguise", "1.5"}).code == kExitUsage);
}

TEST_CASE("usage and data errors map to exit codes") {
  TempDir dir;
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"train"}).code == kExitUsage);
  CHECK(run({"train", "--data", dir / "missing.jsonl", "--task", "nonsense"}).code == kExitUsage);
  const Run missing = run({"train", "--data", dir / "missing.jsonl"});
  CHECK(missing.code == kExitData);
  CHECK(missing.err.find("data error") != std::string::npos);
  CHECK(run({"eval", "--data", dir / "x.jsonl", "--checkpoint", dir / "nope.ckpt"}).code == kExitData);
  CHECK(run({"--help"}).code == kExitOk);

  std::ofstream(dir / "junk.jsonl") << "{not json\n[]\n";
  CHECK(run({"train", "--data", dir / "junk.jsonl"}).code == kExitData);
}

TEST_CASE("train, eval, predict and metrics end to end") {
  TempDir dir;
  REQUIRE(run({"gen", "--n-plays", "40", "--seed", "9", "--out", dir / "gen"}).code == kExitOk);
  for (const std::string task : {"coverage", "matchup", "target"}) {
    const Run t = run(tiny_train(dir, task));
    INFO(t.err);
    REQUIRE(t.code == kExitOk);
    CHECK(fs::exists(dir / ("model/" + task + ".ckpt")));
    CHECK(slurp(dir / ("model/" + task + "_metrics.csv")).rfind("epoch,step,lr,train_loss,val_loss,val_accuracy", 0) == 0);
    CHECK(fs::exists(dir / ("model/" + task + "_config.json")));
  }

  const Run e = run({"eval", "--data", dir / "gen/plays.jsonl", "--checkpoint", dir / "model/target.ckpt",
                     "--matchup-checkpoint", dir / "model/matchup.ckpt", "--out", dir / "eval"});
  INFO(e.err);
  REQUIRE(e.code == kExitOk);
  const std::string csv = slurp(dir / "eval/target_strategies.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  CHECK(slurp(dir / "eval/target_table.csv").find("transformer_postprocessed,") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(dir / "eval/target_report.json")).contains("target_table"));
  CHECK(run({"eval", "--data", dir / "gen/plays.jsonl", "--checkpoint", dir / "model/coverage.ckpt",
             "--matchup-checkpoint", dir / "model/matchup.ckpt", "--out", dir / "eval"})
            .code == kExitUsage);

  const std::string first_id = nlohmann::json::parse(slurp(dir / "gen/plays.jsonl").substr(0, slurp(dir / "gen/plays.jsonl").find('\n')))["play_id"];
  const Run p = run({"predict", "--data", dir / "gen/plays.jsonl", "--checkpoint", dir / "model/coverage.ckpt",
                     "--checkpoint", dir / "model/matchup.ckpt", "--play-id", first_id, "--stride", "5", "--out",
                     dir / "pred/rows.jsonl"});
  INFO(p.err);
  REQUIRE(p.code == kExitOk);
  std::istringstream rows(slurp(dir / "pred/rows.jsonl"));
  std::string line;
  long n = 0, last_end = -1000;
  while (std::getline(rows, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["play_id"] == first_id);
    CHECK(j["start_frame"] == -30);
    CHECK(j["end_frame"].get<long>() > last_end);
    last_end = j["end_frame"].get<long>();
    CHECK(j.contains("coverage_probabilities"));
    CHECK(j.contains("matchup_probabilities"));
    for (const auto& row : j["coverage_probabilities"]) {
      double s = 0;
      for (double v : row) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    ++n;
  }
  CHECK(n > 1);
  CHECK(last_end - (n - 1) * 5 == -30);
  const Run unknown = run({"predict", "--data", dir / "gen/plays.jsonl", "--checkpoint", dir / "model/coverage.ckpt",
                           "--play-id", "no-such-play", "--out", dir / "pred/x.jsonl"});
  CHECK(unknown.code == kExitData);
  CHECK(unknown.err.find(first_id) != std::string::npos);

  const Run d = run({"metrics", "--data", dir / "gen/plays.jsonl", "--kind", "disguise", "--coverage-checkpoint",
                     dir / "model/coverage.ckpt", "--out", dir / "metrics"});
  CHECK(d.code == kExitOk);
  CHECK(slurp(dir / "metrics/disguise.csv").rfind("team_id,", 0) == 0);
  const Run dc = run({"metrics", "--data", dir / "gen/plays.jsonl", "--kind", "double-coverage",
                      "--coverage-checkpoint", dir / "model/coverage.ckpt", "--matchup-checkpoint",
                      dir / "model/matchup.ckpt", "--group-by", "defense_team", "--out", dir / "metrics"});
  CHECK(dc.code == kExitOk);
  CHECK(slurp(dir / "metrics/double_coverage_defense_team.csv").find("\nALL,") != std::string::npos);
  const Run cal = run({"metrics", "--data", dir / "gen/plays.jsonl", "--kind", "double-coverage",
                       "--coverage-checkpoint", dir / "model/coverage.ckpt", "--matchup-checkpoint",
                       dir / "model/matchup.ckpt", "--calibrate-on", dir / "gen/plays.jsonl", "--out",
                       dir / "metrics"});
  CHECK((cal.code == kExitOk || cal.code == kExitData));
  if (cal.code == kExitOk) CHECK(cal.err.find("calibrated min confidence") != std::string::npos);
  CHECK(run({"metrics", "--data", dir / "gen/plays.jsonl", "--kind", "double-coverage", "--coverage-checkpoint",
             dir / "model/coverage.ckpt", "--matchup-checkpoint", dir / "model/matchup.ckpt", "--min-confidence",
             "2"})
            .code == kExitUsage);
  CHECK(run({"metrics", "--data", dir / "gen/plays.jsonl", "--kind", "weather"}).code == kExitUsage);
}

TEST_CASE("training is reproducible through the command line") {
  TempDir dir;
  REQUIRE(run({"gen", "--n-plays", "30", "--seed", "3", "--out", dir / "gen"}).code == kExitOk);
  auto args = tiny_train(dir, "matchup");
  REQUIRE(run(args).code == kExitOk);
  const std::string first = slurp(dir / "model/matchup.ckpt");
  const std::string first_metrics = slurp(dir / "model/matchup_metrics.csv");
  REQUIRE(run(args).code == kExitOk);
  CHECK(slurp(dir / "model/matchup.ckpt") == first);
  CHECK(slurp(dir / "model/matchup_metrics.csv") == first_metrics);
}

TEST_CASE("config files supply defaults and flags override them") {
  TempDir dir;
  std::ofstream(dir / "run.ini") << "[gen]\nn-plays = 7\nseed = 11\n";
  const Run a = run({"gen", "--config", dir / "run.ini", "--out", dir / "g1"});
  INFO(a.err);
  REQUIRE(a.code == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "g1/manifest.json"))["n_plays"] == 7);
  const Run b = run({"gen", "--config", dir / "run.ini", "--n-plays", "3", "--out", dir / "g2"});
  REQUIRE(b.code == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "g2/manifest.json"))["n_plays"] == 3);
}

TEST_CASE("a diverging run aborts with the numeric exit code") {
  TempDir dir;
  REQUIRE(run({"gen", "--n-plays", "40", "--seed", "4", "--out", dir / "gen"}).code == kExitOk);
  auto args = tiny_train(dir, "coverage");
  args.insert(args.end(), {"--lr", "1e30"});
  const Run r = run(args);
  CHECK(r.code == kExitNumeric);
  CHECK(r.err.find("numeric abort") != std::string::npos);
}
