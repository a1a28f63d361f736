#include "support.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <string>

namespace fs = std::filesystem;
using test_support::read_file;
using test_support::write_file;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(PARITY_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::size_t lines(const fs::path& p) {
  const auto text = read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* kSmall =
    "n_units = 12\n"
    "n_days = 60\n"
    "u_black = 0.4\n"
    "u_hispanic = 0.3\n"
    "encoder_len = 10\n"
    "horizon = 4\n"
    "hidden_sizes = 8\n"
    "epochs = 4\n"
    "test_days = 14\n";

nlohmann::json layers_of(const fs::path& checkpoint) {
  return nlohmann::json::parse(read_file(checkpoint))["layers"];
}

}  // namespace

TEST_CASE("synth with the default config writes full panels") {
  const auto dir = test_support::scratch("cli_synth");
  const auto r = run("synth --out " + (dir / "a").string());
  CHECK(r.status == 0);
  CHECK(lines(dir / "a/cases.csv") == 40 * 120 + 1);
  CHECK(lines(dir / "a/mobility.csv") == 40 * 120 + 1);
  CHECK(lines(dir / "a/demographics.csv") == 41);
  CHECK(read_file(dir / "a/run_info.txt").find("version = ") != std::string::npos);
  CHECK(read_file(dir / "a/config.txt").find("seed = 1\n") != std::string::npos);
  CHECK(run("synth --out " + (dir / "b").string()).status == 0);
  for (const char* f : {"cases.csv", "demographics.csv", "mobility.csv", "run_info.txt"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  CHECK(run("synth --seed 2 --out " + (dir / "c").string()).status == 0);
  CHECK(read_file(dir / "a/cases.csv") != read_file(dir / "c/cases.csv"));
}

TEST_CASE("help lists the subcommands") {
  const auto top = run("--help");
  CHECK(top.status == 0);
  for (const char* sub : {"synth", "train", "audit", "report"}) CHECK(top.output.find(sub) != std::string::npos);
  const auto train = run("train --help");
  CHECK(train.status == 0);
  CHECK(train.output.find("--method") != std::string::npos);
}

TEST_CASE("bad configs fail with one categorized line") {
  const auto dir = test_support::scratch("cli_bad");
  write_file(dir / "bad.cfg", "n_units = 12\nbogus_key = 3\n");
  const auto r = run("synth --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string());
  CHECK(r.status != 0);
  CHECK(r.output.rfind("error: config: ", 0) == 0);
  CHECK(r.output.find("bogus_key") != std::string::npos);
  CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 1);

  const auto usage = run("train --method");
  CHECK(usage.status != 0);
  CHECK(usage.output.rfind("error: usage: ", 0) == 0);
  const auto method = run("train --method fairest --out " + (dir / "o").string());
  CHECK(method.output.rfind("error: config: ", 0) == 0);
  CHECK(run("--version").status == 0);
}

TEST_CASE("training writes checkpoint, logs and run info") {
  const auto dir = test_support::scratch("cli_train");
  write_file(dir / "exp.cfg", kSmall);
  const std::string base = "--config " + (dir / "exp.cfg").string() + " --out " + (dir / "run").string();
  REQUIRE(run("train --method none " + base).status == 0);
  REQUIRE(run("train --method demopts " + base).status == 0);
  for (const char* f : {"checkpoint.json", "diagnostics.csv", "training_loss.csv", "batches.csv", "config.txt",
                        "run_info.txt"}) {
    CHECK(fs::exists(dir / "run/none" / f));
    CHECK(fs::exists(dir / "run/demopts" / f));
  }
  CHECK(lines(dir / "run/none/diagnostics.csv") == 1);
  CHECK(lines(dir / "run/demopts/diagnostics.csv") > 1);
  CHECK(read_file(dir / "run/demopts/config.txt").find("method = demopts") != std::string::npos);

  // Same initial parameters, so the epoch-0 forward pass agrees.
  const auto none_ck = nlohmann::json::parse(read_file(dir / "run/none/checkpoint.json"));
  const auto demo_ck = nlohmann::json::parse(read_file(dir / "run/demopts/checkpoint.json"));
  CHECK(none_ck["loss_history"][0] == demo_ck["loss_history"][0]);
  const bool fired = read_file(dir / "run/demopts/diagnostics.csv").find(",1\n") != std::string::npos;
  CHECK(fired == (none_ck["layers"] != demo_ck["layers"]));

  write_file(dir / "zero.cfg", std::string(kSmall) + "p_threshold = 0\n");
  REQUIRE(run("train --method demopts --config " + (dir / "zero.cfg").string() + " --out " + (dir / "zero").string())
              .status == 0);
  CHECK(layers_of(dir / "zero/demopts/checkpoint.json") == layers_of(dir / "run/none/checkpoint.json"));

  REQUIRE(run("train --method demopts " + base.substr(0, base.find(" --out")) + " --out " + (dir / "again").string())
              .status == 0);
  for (const char* f : {"checkpoint.json", "diagnostics.csv", "training_loss.csv", "batches.csv"}) {
    CHECK(read_file(dir / "run/demopts" / f) == read_file(dir / "again/demopts" / f));
  }
}

TEST_CASE("missing demographics rows fail before training") {
  const auto dir = test_support::scratch("cli_ref");
  REQUIRE(run("synth --out " + (dir / "data").string()).status == 0);
  auto demo = read_file(dir / "data/demographics.csv");
  demo.erase(demo.find("U003"), demo.find('\n', demo.find("U003")) - demo.find("U003") + 1);
  write_file(dir / "data/demographics.csv", demo);
  write_file(dir / "exp.cfg", "cases_csv = " + (dir / "data/cases.csv").string() +
                                  "\ndemographics_csv = " + (dir / "data/demographics.csv").string() + "\n");
  const auto r = run("train --config " + (dir / "exp.cfg").string() + " --out " + (dir / "o").string());
  CHECK(r.status != 0);
  CHECK(r.output.rfind("error: referential: ", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "o/none/checkpoint.json"));
}

TEST_CASE("audit and report combine several checkpoints") {
  const auto dir = test_support::scratch("cli_audit");
  write_file(dir / "exp.cfg", kSmall);
  const std::string cfg = "--config " + (dir / "exp.cfg").string();
  std::string checkpoints;
  for (const char* m : {"none", "demopts", "individual", "group", "sufficiency"}) {
    REQUIRE(run(std::string("train --method ") + m + " " + cfg + " --out " + (dir / "run").string()).status == 0);
    checkpoints += " " + (dir / "run" / m / "checkpoint.json").string();
  }
  const auto one = run("audit " + cfg + " --out " + (dir / "one").string() + " " +
                       (dir / "run/none/checkpoint.json").string());
  CHECK(one.status == 0);
  CHECK(fs::exists(dir / "one/none/report.json"));
  CHECK(lines(dir / "one/anova.csv") == 2);

  REQUIRE(run("audit " + cfg + " --out " + (dir / "all").string() + checkpoints).status == 0);
  CHECK(lines(dir / "all/anova.csv") == 6);
  const auto header = read_file(dir / "all/mean_pbl.csv");
  for (const char* m : {"none_mean_pbl", "demopts_mean_pbl", "individual_mean_pbl", "group_mean_pbl",
                        "sufficiency_mean_pbl"}) {
    CHECK(header.find(m) != std::string::npos);
  }
  REQUIRE(run("audit " + cfg + " --out " + (dir / "all2").string() + checkpoints).status == 0);
  for (const char* f : {"anova.csv", "tukey.csv", "soft_parity.csv", "mean_pbl.csv", "none/report.json",
                        "sufficiency/unit_errors.csv"}) {
    CHECK(read_file(dir / "all" / f) == read_file(dir / "all2" / f));
  }

  const auto rep = run("report --out " + (dir / "rep").string() + " " + (dir / "all/none/report.json").string() +
                       " " + (dir / "all/demopts/report.json").string());
  CHECK(rep.status == 0);
  CHECK(read_file(dir / "rep/tukey.csv").find("demopts_p_adj") != std::string::npos);
  CHECK(read_file(dir / "all/anova.csv").rfind(read_file(dir / "rep/anova.csv"), 0) == 0);

}

TEST_CASE("audit rejects checkpoints that do not fit the panel windows") {
  const auto dir = test_support::scratch("cli_shape");
  write_file(dir / "a.cfg", kSmall);
  std::string other = kSmall;
  other.replace(other.find("encoder_len = 10"), 16, "encoder_len = 12");
  write_file(dir / "b.cfg", other);
  REQUIRE(run("train --config " + (dir / "a.cfg").string() + " --out " + (dir / "run").string()).status == 0);
  const auto r = run("audit --config " + (dir / "b.cfg").string() + " --out " + (dir / "o").string() + " " +
                     (dir / "run/none/checkpoint.json").string());
  CHECK(r.status != 0);
  CHECK(r.output.rfind("error: dimension: ", 0) == 0);
}
