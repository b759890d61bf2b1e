// Command-line front end: preprocess, synth, train, eval, ablate, bench,
// gradcheck. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ssmhar/checkpoint.hpp"
#include "ssmhar/config.hpp"
#include "ssmhar/cost.hpp"
#include "ssmhar/data.hpp"
#include "ssmhar/dataset_io.hpp"
#include "ssmhar/gradcheck.hpp"
#include "ssmhar/log.hpp"
#include "ssmhar/metrics.hpp"
#include "ssmhar/model.hpp"
#include "ssmhar/train.hpp"

namespace fs = std::filesystem;
using namespace ssmhar;

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  std::string precision;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Root seed (overrides config)");
    cmd->add_option("--threads", threads,
                    "Worker threads; 1 is bit-deterministic (overrides config)");
    cmd->add_option("--out", out_dir, "Output directory (overrides config)");
    cmd->add_option("--precision", precision, "f32 or f64 (overrides config)")
        ->check(CLI::IsMember({"f32", "f64"}));
  }

  RunConfig resolve(const CLI::App* cmd) const {
    RunConfig cfg = config_path.empty() ? RunConfig{}
                                        : RunConfig::from_json_file(config_path);
    if (cmd->count("--seed")) cfg.seed = seed;
    if (cmd->count("--threads")) cfg.threads = threads;
    if (cmd->count("--out")) cfg.out_dir = out_dir;
    if (cmd->count("--precision"))
      cfg.precision = precision == "f64" ? Precision::kF64 : Precision::kF32;
    return cfg;
  }
};

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<std::size_t> parse_length_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (std::uint64_t v : parse_seed_list(text)) out.push_back(v);
  return out;
}

void print_dataset_summary(const WindowedDataset& ds) {
  std::cout << "dataset: " << ds.name << "  channels=" << ds.channel_count()
            << " window=" << ds.window_len << " classes=" << ds.n_classes
            << "\n";
  std::cout << "windows: train=" << ds.split.train << " val=" << ds.split.val
            << " test=" << ds.split.test << "\n";
  std::vector<std::size_t> per_class(ds.n_classes, 0);
  for (const auto& w : ds.windows) per_class[w.label] += 1;
  std::cout << "per-class:";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    std::cout << " " << c << ":" << per_class[c];
  }
  std::cout << "\n";
}

int cmd_preprocess(const std::string& manifest_path, const std::string& input_dir,
                   const std::string& out_path) {
  DatasetManifest manifest = load_manifest(manifest_path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw std::runtime_error("no CSV files in '" + input_dir + "'");
  }
  std::vector<RawRecording> recs;
  for (const auto& f : files) recs.push_back(ingest_csv(f.string(), manifest));
  WindowedDataset ds = preprocess(std::move(recs), manifest);
  save_windowed_dataset(ds, out_path);
  print_dataset_summary(ds);
  std::cout << "wrote " << out_path << " and " << out_path << ".json\n";
  return 0;
}

template <typename T>
int run_train(const RunConfig& cfg, const WindowedDataset& ds) {
  Model<T> model = Model<T>::init(cfg.model, cfg.seed);
  TrainResult result = train_model(model, ds, cfg.train, cfg.seed);

  fs::create_directories(cfg.out_dir);
  const fs::path ckpt = fs::path(cfg.out_dir) / "checkpoint.bin";
  {
    std::ofstream os(ckpt, std::ios::binary);
    os.write(reinterpret_cast<const char*>(result.best_checkpoint.data()),
             static_cast<std::streamsize>(result.best_checkpoint.size()));
  }
  write_file(fs::path(cfg.out_dir) / "checkpoint.bin.json", cfg.to_json_text());
  write_file(fs::path(cfg.out_dir) / "train_log.csv", result.log_csv());
  std::cout << "best epoch " << result.best_epoch << " (val F1 "
            << result.best_val_f1 << "); wrote " << ckpt.string() << "\n";
  return 0;
}

template <typename T>
int run_eval(const RunConfig& cfg, const std::string& ckpt_path,
             const WindowedDataset& ds, const std::string& split) {
  Model<T> model = Model<T>::init(cfg.model, cfg.seed);
  auto params = model.parameters();
  load_checkpoint(ckpt_path, params);
  EvalReport rep =
      evaluate_model(model, ds, split, cfg.train.batch_size, cfg.threads);
  std::cout << rep.to_json();
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / ("report_" + split + ".json"),
               rep.to_json());
    write_file(fs::path(cfg.out_dir) / ("confusion_" + split + ".csv"),
               rep.confusion.to_csv());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bidirectional selective state-space sequence classifier for "
               "wearable-sensor activity recognition"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess",
                                 "CSV recordings -> windowed dataset file");
  std::string manifest_path, input_dir, pre_out;
  pre->add_option("--manifest", manifest_path, "Dataset manifest JSON")
      ->required()
      ->check(CLI::ExistingFile);
  pre->add_option("--input-dir", input_dir, "Directory of CSV recordings")
      ->required()
      ->check(CLI::ExistingDirectory);
  pre->add_option("--out", pre_out, "Output dataset path")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  std::string synth_out;
  int synth_classes = 6;
  std::size_t synth_channels = 3, synth_window = 128, synth_per_class = 200;
  std::uint64_t synth_seed = 7;
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  synth->add_option("--classes", synth_classes, "Number of classes");
  synth->add_option("--channels", synth_channels, "Sensor channels");
  synth->add_option("--window", synth_window, "Window length");
  synth->add_option("--per-class", synth_per_class, "Windows per class");
  synth->add_option("--seed", synth_seed, "Generator seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  CommonFlags train_flags;
  train_flags.attach(train_cmd);
  std::string train_data;
  train_cmd->add_option("--data", train_data,
                        "Windowed dataset (overrides config data.dataset)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "test";
  CommonFlags eval_flags;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "Windowed dataset")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_flags.attach(eval_cmd);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation suite");
  std::string suite, ablate_seeds, ablate_data;
  CommonFlags ablate_flags;
  ablate_cmd->add_option("--suite", suite,
                         "directionality, channel_mode or class_token")
      ->required();
  ablate_cmd->add_option("--seeds", ablate_seeds, "Comma-separated seed list");
  ablate_cmd->add_option("--data", ablate_data, "Windowed dataset");
  ablate_flags.attach(ablate_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Parameter/FLOP/memory report");
  std::string lengths = "128,256,512,1024";
  CommonFlags bench_flags;
  bench_cmd->add_option("--lengths", lengths, "Comma-separated window lengths");
  bench_flags.attach(bench_cmd);

  // gradcheck
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "Finite-difference verification of all backward rules");
  std::size_t gc_probes = 20;
  double gc_eps = 1e-4, gc_tol = 1e-3;
  std::uint64_t gc_seed = 42;
  gc_cmd->add_option("--probes", gc_probes, "Probes per op");
  gc_cmd->add_option("--eps", gc_eps, "Perturbation");
  gc_cmd->add_option("--tol", gc_tol, "Relative error tolerance");
  gc_cmd->add_option("--seed", gc_seed, "Probe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    if (pre->parsed()) return cmd_preprocess(manifest_path, input_dir, pre_out);

    if (synth->parsed()) {
      WindowedDataset ds = synth_har(synth_classes, synth_channels, synth_window,
                                     synth_per_class, synth_seed);
      save_windowed_dataset(ds, synth_out);
      print_dataset_summary(ds);
      std::cout << "wrote " << synth_out << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      RunConfig cfg = train_flags.resolve(train_cmd);
      const std::string data =
          train_cmd->count("--data") ? train_data : cfg.dataset_path;
      if (data.empty() || !fs::exists(data)) {
        std::cerr << "train: dataset file '" << data << "' not found\n";
        return 2;
      }
      WindowedDataset ds = load_windowed_dataset(data);
      return cfg.precision == Precision::kF64 ? run_train<double>(cfg, ds)
                                              : run_train<float>(cfg, ds);
    }

    if (eval_cmd->parsed()) {
      RunConfig cfg;
      const std::string side = eval_ckpt + ".json";
      if (eval_flags.config_path.empty() && fs::exists(side)) {
        cfg = RunConfig::from_json_file(side);  // config stored beside ckpt
        // flag overrides still apply
        if (eval_cmd->count("--seed")) cfg.seed = eval_flags.seed;
        if (eval_cmd->count("--threads")) cfg.threads = eval_flags.threads;
        if (eval_cmd->count("--out")) cfg.out_dir = eval_flags.out_dir;
        else cfg.out_dir.clear();
        if (eval_cmd->count("--precision"))
          cfg.precision = eval_flags.precision == "f64" ? Precision::kF64
                                                        : Precision::kF32;
      } else {
        cfg = eval_flags.resolve(eval_cmd);
        if (!eval_cmd->count("--out")) cfg.out_dir.clear();
      }
      const std::string data =
          eval_cmd->count("--data") ? eval_data : cfg.dataset_path;
      if (data.empty() || !fs::exists(data)) {
        std::cerr << "eval: dataset file '" << data << "' not found\n";
        return 2;
      }
      WindowedDataset ds = load_windowed_dataset(data);
      return cfg.precision == Precision::kF64
                 ? run_eval<double>(cfg, eval_ckpt, ds, eval_split)
                 : run_eval<float>(cfg, eval_ckpt, ds, eval_split);
    }

    if (ablate_cmd->parsed()) {
      RunConfig cfg = ablate_flags.resolve(ablate_cmd);
      const std::string data =
          ablate_cmd->count("--data") ? ablate_data : cfg.dataset_path;
      if (data.empty() || !fs::exists(data)) {
        std::cerr << "ablate: dataset file '" << data << "' not found\n";
        return 2;
      }
      WindowedDataset ds = load_windowed_dataset(data);
      std::vector<std::uint64_t> seeds =
          ablate_cmd->count("--seeds")
              ? parse_seed_list(ablate_seeds)
              : std::vector<std::uint64_t>{cfg.seed, cfg.seed + 1, cfg.seed + 2};
      std::vector<AblationRow> rows = run_ablation(suite, cfg, ds, seeds);
      const std::string csv = ablation_csv(rows);
      std::cout << csv;
      fs::create_directories(cfg.out_dir);
      write_file(fs::path(cfg.out_dir) / ("ablation_" + suite + ".csv"), csv);
      return 0;
    }

    if (bench_cmd->parsed()) {
      RunConfig cfg = bench_flags.resolve(bench_cmd);
      std::vector<CostReport> reports =
          cost_report(cfg.model, parse_length_list(lengths), cfg.seed);
      const std::string json = cost_report_json(reports);
      std::cout << json;
      if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        write_file(fs::path(cfg.out_dir) / "bench.json", json);
      }
      return 0;
    }

    if (gc_cmd->parsed()) {
      bool all_pass = true;
      for (const auto& r : run_gradcheck_suite(gc_probes, gc_eps, gc_tol, gc_seed)) {
        std::cout << (r.pass ? "[pass] " : "[FAIL] ") << r.op
                  << "  max_rel_err=" << r.max_rel_err << "  probes=" << r.probes
                  << "\n";
        all_pass = all_pass && r.pass;
      }
      return all_pass ? 0 : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
