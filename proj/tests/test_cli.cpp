#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "camsel/manifest.hpp"
#include "json.hpp"
#include "test_util.hpp"

#ifndef CAMSEL_CLI_PATH
#error "CAMSEL_CLI_PATH must name the camsel binary"
#endif

using camsel::testing::TempDir;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(CAMSEL_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST(Cli, SynthImputeChainWithManifest) {
  TempDir t("cli_chain");
  write(t.file("synth.json"), R"({"n_samples": 400, "n_sequences": 4, "p_miss": 0.5})");
  ASSERT_EQ(run("--seed 3 gen-synth --config " + t.file("synth.json") + " --out-visible " +
                t.file("vis.jsonl") + " --out-truth " + t.file("truth.jsonl")),
            0);
  ASSERT_EQ(run("--seed 3 --threads 1 impute --method rsf --data " + t.file("vis.jsonl") + " --truth " +
                t.file("truth.jsonl") + " --out " + t.file("imp.jsonl") + " --report " +
                t.file("rep.json")),
            0);
  const auto rep = read_json(t.file("rep.json"));
  EXPECT_EQ(rep["method"], "rsf");
  ASSERT_TRUE(rep.contains("error"));
  EXPECT_TRUE(rep["error"].contains("thresholds"));
  EXPECT_TRUE(rep["error"].contains("fraction_within"));

  const auto m = read_json(t.file("imp.jsonl") + ".manifest.json");
  EXPECT_EQ(m["command"], "impute");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["seed_was_random"], false);
  bool found = false;
  for (const auto& o : m["outputs"]) {
    if (o["path"] == t.file("imp.jsonl")) {
      found = true;
      EXPECT_EQ(o["sha256"], camsel::sha256_file(t.file("imp.jsonl")));
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(m["inputs"].size(), 2u);
}

TEST(Cli, RerunIsByteIdentical) {
  TempDir t("cli_rerun");
  write(t.file("synth.json"), R"({"n_samples": 300, "n_sequences": 3, "p_miss": 0.0})");
  ASSERT_EQ(run("--seed 1 gen-synth --config " + t.file("synth.json") + " --out-visible " + t.file("d.jsonl")), 0);
  for (const char* out : {"a.json", "b.json"}) {
    ASSERT_EQ(run("--seed 9 train --data " + t.file("d.jsonl") + " --out " + t.file(out)), 0);
  }
  EXPECT_EQ(slurp(t.file("a.json")), slurp(t.file("b.json")));
  ASSERT_EQ(run("--seed 9 train --data " + t.file("d.jsonl") + " --out " + t.file("c.json"),
                "CAMSEL_THREADS=3"),
            0);
  EXPECT_EQ(slurp(t.file("a.json")), slurp(t.file("c.json")));
  EXPECT_EQ(read_json(t.file("c.json.manifest.json"))["threads"], 3);
}

TEST(Cli, EvalReportFields) {
  TempDir t("cli_eval");
  write(t.file("synth.json"), R"({"n_samples": 300, "n_sequences": 6, "p_miss": 0.0})");
  ASSERT_EQ(run("--seed 2 gen-synth --config " + t.file("synth.json") + " --out-visible " + t.file("d.jsonl")), 0);
  ASSERT_EQ(run("--seed 2 --threads 1 eval --data " + t.file("d.jsonl") + " --out " + t.file("e.json") +
                " --confusion-csv " + t.file("c.csv")),
            0);
  const auto e = read_json(t.file("e.json"));
  EXPECT_EQ(e["schema"], "camsel-eval-report");
  EXPECT_TRUE(e.contains("baseline_constant_accuracy"));
  EXPECT_EQ(e["samples"], 300);
  ASSERT_TRUE(e.contains("imputation"));
  EXPECT_TRUE(e["imputation"].contains("fraction_within"));
  EXPECT_EQ(slurp(t.file("c.csv")).substr(0, 14), "true\\predicted");
}

TEST(Cli, ErrorsExitNonZero) {
  TempDir t("cli_err");
  EXPECT_EQ(run("train --bogus"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --data " + t.file("missing.jsonl") + " --out " + t.file("m.json")), 2);
  write(t.file("bad.jsonl"), "{not json\n");
  EXPECT_EQ(run("train --data " + t.file("bad.jsonl") + " --out " + t.file("m.json")), 1);
  EXPECT_FALSE(std::filesystem::exists(t.file("m.json")));
}

TEST(Cli, RandomSeedIsRecorded) {
  TempDir t("cli_seed");
  write(t.file("synth.json"), R"({"n_samples": 50, "n_sequences": 1})");
  ASSERT_EQ(run("gen-synth --config " + t.file("synth.json") + " --out-visible " + t.file("v.jsonl")), 0);
  EXPECT_EQ(read_json(t.file("v.jsonl.manifest.json"))["seed_was_random"], true);
}
