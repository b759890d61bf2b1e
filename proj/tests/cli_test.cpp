// Drives the installed binary end to end through std::system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kCli = SSMHAR_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("ssmhar_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_tiny_corpus(const fs::path& dir) {
  // two recordings, two channels, labels 0/1 alternating every 40 samples
  for (int r = 0; r < 2; ++r) {
    std::ofstream os(dir / ("rec" + std::to_string(r) + ".csv"));
    os << "timestamp,label,acc_x,acc_y\n";
    for (int t = 0; t < 400; ++t) {
      const int label = (t / 40) % 2;
      os << t * 0.02 << "," << label << "," << 0.1 * ((t + r) % 7) << ","
         << 0.05 * ((t * 3 + r) % 11) << "\n";
    }
  }
}

const char* kManifest = R"({
  "name": "tinycorpus",
  "n_classes": 2,
  "rate_hz": 50,
  "window": 40,
  "channels": ["acc_x", "acc_y"]
})";

const char* kTrainConfig = R"({
  "model": {
    "channels": 3, "window": 64, "patch_len": 8, "patch_stride": 4,
    "token_dim": 8, "expand_dim": 16, "state_dim": 4, "layers": 1,
    "classes": 3, "conv_kernel": 4
  },
  "optim": {"lr": 0.001, "batch_size": 8, "epochs": 1},
  "seed": 3
})";

}  // namespace

TEST_CASE("missing manifest path exits with the usage code") {
  CHECK(run("preprocess --manifest /nonexistent/m.json --input-dir /tmp "
            "--out /tmp/x.harw") == 2);
}

TEST_CASE("unknown subcommands and bad flags exit with the usage code") {
  CHECK(run("frobnicate") == 2);
  CHECK(run("synth") == 2);  // --out is required
}

TEST_CASE("synth is deterministic and idempotent") {
  fs::path dir = fresh_dir("synth");
  const std::string a = (dir / "a.harw").string();
  const std::string b = (dir / "b.harw").string();
  REQUIRE(run("synth --out " + a + " --classes 3 --channels 2 --window 32 "
              "--per-class 5 --seed 9") == 0);
  REQUIRE(run("synth --out " + b + " --classes 3 --channels 2 --window 32 "
              "--per-class 5 --seed 9") == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a + ".json") == slurp(b + ".json"));
  fs::remove_all(dir);
}

TEST_CASE("preprocess emits the windowed dataset and stats sidecar") {
  fs::path dir = fresh_dir("pre");
  fs::path corpus = dir / "csv";
  fs::create_directories(corpus);
  write_tiny_corpus(corpus);
  std::ofstream(dir / "manifest.json") << kManifest;
  const std::string out = (dir / "tiny.harw").string();
  REQUIRE(run("preprocess --manifest " + (dir / "manifest.json").string() +
              " --input-dir " + corpus.string() + " --out " + out) == 0);
  CHECK(fs::exists(out));
  CHECK(fs::exists(out + ".json"));
  const std::string bytes = slurp(out);
  CHECK(bytes.substr(0, 5) == "HARW1");

  // byte-identical on rerun
  const std::string out2 = (dir / "tiny2.harw").string();
  REQUIRE(run("preprocess --manifest " + (dir / "manifest.json").string() +
              " --input-dir " + corpus.string() + " --out " + out2) == 0);
  CHECK(slurp(out2) == bytes);
  fs::remove_all(dir);
}

TEST_CASE("train, eval, ablate, bench and gradcheck round-trip") {
  fs::path dir = fresh_dir("train");
  const std::string data = (dir / "synth.harw").string();
  REQUIRE(run("synth --out " + data +
              " --classes 3 --channels 3 --window 64 --per-class 12 --seed 4") == 0);
  std::ofstream(dir / "config.json") << kTrainConfig;
  const std::string cfg = (dir / "config.json").string();
  const std::string out = (dir / "run1").string();

  REQUIRE(run("train --config " + cfg + " --data " + data + " --out " + out) == 0);
  CHECK(fs::exists(out + "/checkpoint.bin"));
  CHECK(fs::exists(out + "/checkpoint.bin.json"));
  CHECK(fs::exists(out + "/train_log.csv"));
  const std::string log1 = slurp(out + "/train_log.csv");
  CHECK(log1.find("epoch,train_loss") == 0);

  // identical rerun: byte-identical checkpoint and log
  const std::string out2 = (dir / "run2").string();
  REQUIRE(run("train --config " + cfg + " --data " + data + " --out " + out2) == 0);
  CHECK(slurp(out2 + "/checkpoint.bin") == slurp(out + "/checkpoint.bin"));
  CHECK(slurp(out2 + "/train_log.csv") == log1);

  REQUIRE(run("eval --checkpoint " + out + "/checkpoint.bin --data " + data +
              " --split test --out " + out) == 0);
  CHECK(fs::exists(out + "/report_test.json"));
  CHECK(fs::exists(out + "/confusion_test.csv"));

  // checkpoint against a mismatched architecture is a runtime failure
  std::string bad_cfg_text = kTrainConfig;
  bad_cfg_text.replace(bad_cfg_text.find("\"token_dim\": 8"),
                       std::string("\"token_dim\": 8").size(),
                       "\"token_dim\": 12");
  std::ofstream(dir / "bad.json") << bad_cfg_text;
  CHECK(run("eval --checkpoint " + out + "/checkpoint.bin --data " + data +
            " --config " + (dir / "bad.json").string()) == 1);

  REQUIRE(run("ablate --suite class_token --config " + cfg + " --data " + data +
              " --seeds 4 --out " + out) == 0);
  const std::string csv = slurp(out + "/ablation_class_token.csv");
  CHECK(csv.find("No class token") != std::string::npos);
  CHECK(csv.find("End class token") != std::string::npos);
  CHECK(run("ablate --suite bogus --config " + cfg + " --data " + data) == 2);

  REQUIRE(run("bench --lengths 32,64 --config " + cfg + " --out " + out) == 0);
  CHECK(slurp(out + "/bench.json").find("\"window\": 32") != std::string::npos);

  CHECK(run("gradcheck --probes 1") == 0);
  fs::remove_all(dir);
}

TEST_CASE("config errors carry exit code 2 and name the offending keys") {
  fs::path dir = fresh_dir("cfg");
  std::ofstream(dir / "bad.json") << R"({"modle": {}, "seed": 1})";
  const std::string data = (dir / "d.harw").string();
  REQUIRE(run("synth --out " + data +
              " --classes 2 --channels 1 --window 16 --per-class 10 --seed 1") == 0);
  CHECK(run("train --config " + (dir / "bad.json").string() + " --data " + data) == 2);
  fs::remove_all(dir);
}
