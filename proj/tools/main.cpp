#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "sessionrec/config.hpp"
#include "sessionrec/data.hpp"
#include "sessionrec/evaluator.hpp"
#include "sessionrec/experiments.hpp"
#include "sessionrec/manifest.hpp"
#include "sessionrec/synth.hpp"
#include "sessionrec/trainer.hpp"

namespace fs = std::filesystem;
using namespace sessionrec;

namespace {

struct Common {
  std::size_t threads = 1;
  std::vector<std::string> overrides;
  fs::path run_dir;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("bad value in ") + what + ": '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string("empty ") + what);
  return out;
}

// defaults < config file < --set overrides < --threads.
TrainConfig resolve_config(const std::string& config_path, const Common& common,
                           bool threads_given) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path, cfg);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (threads_given) cfg.threads = common.threads;
  validate(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-session recommendation: data preparation, training, evaluation"};
  app.require_subcommand(1);
  Common common;
  auto* threads_opt = app.add_option("--threads", common.threads, "Worker threads (1 = deterministic)")
                          ->check(CLI::PositiveNumber);
  app.add_option("--run-dir", common.run_dir, "Directory for the run manifest");

  // synth
  SynthConfig synth;
  std::string pattern = "copy-last-session";
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic interaction log");
  synth_cmd->add_option("--users", synth.users, "Number of users");
  synth_cmd->add_option("--sessions", synth.sessions, "Sessions per user");
  synth_cmd->add_option("--pattern", pattern, "copy-last-session | rotate-catalog | hard-negative-sessions");
  synth_cmd->add_option("--catalog", synth.catalog, "Catalog size");
  synth_cmd->add_option("--positives", synth.positives, "Positive items per session");
  synth_cmd->add_option("--negatives", synth.negatives, "Exposure-only items per session");
  synth_cmd->add_option("--topic-size", synth.topic_size, "Items per topic (hard-negative-sessions)");
  synth_cmd->add_option("--topics-per-user", synth.topics_per_user, "Topics per user (hard-negative-sessions)");
  synth_cmd->add_flag("--category", synth.category_feature, "Emit a category column");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--output", synth_out, "Output CSV path")->required();

  // prepare-data
  fs::path prep_in, prep_out;
  std::size_t max_pos_len = 200, num_bins = 10;
  auto* prep_cmd = app.add_subcommand("prepare-data", "Ingest, sessionize and filter a raw log");
  prep_cmd->add_option("--input", prep_in, "Raw interaction CSV")->required();
  prep_cmd->add_option("--output", prep_out, "Processed dataset directory")->required();
  prep_cmd->add_option("--max-pos-len", max_pos_len, "Keep at most this many recent positives");
  prep_cmd->add_option("--bins", num_bins, "Bins for continuous (num_*) columns");

  // train
  fs::path data_dir, train_out;
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", data_dir, "Processed dataset directory")->required();
  train_cmd->add_option("--config", config_path, "Config file (key = value)");
  train_cmd->add_option("--out", train_out, "Run directory")->required();
  train_cmd->add_option("--set", common.overrides, "Override a config key, key=value");

  // evaluate
  fs::path ckpt_path;
  std::string protocol = "session";
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint; prints a JSON report");
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "Processed dataset directory")->required();
  eval_cmd->add_option("--protocol", protocol, "session | item")
      ->check(CLI::IsMember({"session", "item"}));

  // sweep-alpha
  std::string alphas_text = "0,0.05,0.1,0.2,0.5,1,2";
  fs::path sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "Train and evaluate across rank-loss weights");
  sweep_cmd->add_option("--data", data_dir, "Processed dataset directory")->required();
  sweep_cmd->add_option("--config", config_path, "Config file");
  sweep_cmd->add_option("--alphas", alphas_text, "Comma-separated weights");
  sweep_cmd->add_option("--protocol", protocol, "session | item")
      ->check(CLI::IsMember({"session", "item"}));
  sweep_cmd->add_option("--out", sweep_out, "Run directory")->required();
  sweep_cmd->add_option("--set", common.overrides, "Override a config key, key=value");

  // scaling
  std::string fractions_text = "0.25,0.5,0.75,1";
  fs::path scaling_out;
  auto* scaling_cmd = app.add_subcommand("scaling", "Train on growing time prefixes");
  scaling_cmd->add_option("--data", data_dir, "Processed dataset directory")->required();
  scaling_cmd->add_option("--config", config_path, "Config file");
  scaling_cmd->add_option("--fractions", fractions_text, "Comma-separated fractions in (0, 1]");
  scaling_cmd->add_option("--out", scaling_out, "Run directory")->required();
  scaling_cmd->add_option("--set", common.overrides, "Override a config key, key=value");

  // bench
  std::size_t bench_n = 1024, bench_m = 16;
  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Attention cost at item versus session granularity");
  bench_cmd->add_option("--n", bench_n, "Item tokens");
  bench_cmd->add_option("--m", bench_m, "Session length");
  bench_cmd->add_option("--d", bench.d, "Model width");
  bench_cmd->add_option("--heads", bench.heads, "Attention heads");
  bench_cmd->add_option("--layers", bench.layers, "Attention layers");
  bench_cmd->add_option("--reps", bench.repetitions, "Timed repetitions (best is kept)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto started = std::chrono::system_clock::now();
  RunManifest manifest;
  manifest.git_describe = build_git_describe();
  manifest.started_at = utc_timestamp(started);
  {
    std::ostringstream args;
    for (int i = 1; i < argc; ++i) args << (i > 1 ? " " : "") << argv[i];
    manifest.arguments = args.str();
  }
  fs::path run_dir = common.run_dir;
  const bool threads_given = threads_opt->count() > 0;

  auto begin = [&](const std::string& command, const fs::path& default_dir) {
    manifest.command = command;
    if (run_dir.empty()) run_dir = default_dir;
    if (!run_dir.empty()) write_manifest(manifest, run_dir);
  };

  int code = 0;
  try {
    if (*synth_cmd) {
      synth.pattern = parse_synth_pattern(pattern);
      manifest.seed = synth.seed;
      manifest.paths["output"] = synth_out.string();
      begin("synth", {});
      write_synthetic_log(synth, synth_out);
    } else if (*prep_cmd) {
      manifest.paths["input"] = prep_in.string();
      manifest.paths["output"] = prep_out.string();
      begin("prepare-data", prep_out);
      IngestOptions io;
      io.num_bins = num_bins;
      ProcessedDataset data = filter_dataset(ingest(prep_in, io));
      data.max_positive_length = max_pos_len;
      save_processed(data, prep_out);
      std::cout << stats_json(data.stats) << "\n";
    } else if (*train_cmd) {
      const TrainConfig cfg = resolve_config(config_path, common, threads_given);
      manifest.resolved_config = config_to_text(cfg);
      manifest.seed = cfg.seed;
      manifest.paths["data"] = data_dir.string();
      manifest.paths["out"] = train_out.string();
      if (!config_path.empty()) manifest.paths["config"] = config_path;
      begin("train", train_out);
      write_text(train_out / "config.txt", manifest.resolved_config);
      const ProcessedDataset data = load_processed(data_dir);
      TrainOptions opts;
      opts.out_dir = train_out;
      opts.on_epoch = [](const EpochLog& log) {
        std::cerr << "epoch " << log.epoch << " loss/positive " << log.loss << " (retrieval "
                  << log.retrieval_loss << ", rank " << log.rank_loss << ")";
        if (log.validation_recall) std::cerr << " validation recall " << *log.validation_recall;
        std::cerr << "\n";
      };
      const TrainResult result = train(make_training_set(data), cfg, opts);
      std::cerr << "best epoch " << result.best_epoch << ", checkpoint "
                << (train_out / "best.ckpt").string() << "\n";
    } else if (*eval_cmd) {
      manifest.paths["checkpoint"] = ckpt_path.string();
      manifest.paths["data"] = data_dir.string();
      begin("evaluate", {});
      const ProcessedDataset data = load_processed(data_dir);
      EvalOptions eo;
      eo.threads = common.threads;
      const EvalReport report = evaluate_checkpoint(ckpt_path, data, parse_protocol(protocol), eo);
      std::cout << report.to_json() << "\n";
      if (!run_dir.empty()) {
        write_text(run_dir / "report.json", report.to_json() + "\n");
        write_text(run_dir / "report.txt", report.to_table());
      }
    } else if (*sweep_cmd) {
      const TrainConfig cfg = resolve_config(config_path, common, threads_given);
      manifest.resolved_config = config_to_text(cfg);
      manifest.seed = cfg.seed;
      manifest.paths["data"] = data_dir.string();
      manifest.paths["out"] = sweep_out.string();
      begin("sweep-alpha", sweep_out);
      const ProcessedDataset data = load_processed(data_dir);
      const auto rows =
          alpha_sweep(data, cfg, parse_list(alphas_text, "--alphas"), parse_protocol(protocol), sweep_out);
      const std::string csv = alpha_table_csv(rows);
      write_text(sweep_out / "alpha_sweep.csv", csv);
      std::cout << csv;
    } else if (*scaling_cmd) {
      const TrainConfig cfg = resolve_config(config_path, common, threads_given);
      manifest.resolved_config = config_to_text(cfg);
      manifest.seed = cfg.seed;
      manifest.paths["data"] = data_dir.string();
      manifest.paths["out"] = scaling_out.string();
      begin("scaling", scaling_out);
      const ProcessedDataset data = load_processed(data_dir);
      const auto rows = scaling_run(data, cfg, parse_list(fractions_text, "--fractions"));
      const std::string csv = scaling_table_csv(rows);
      write_text(scaling_out / "scaling.csv", csv);
      std::cout << csv;
    } else if (*bench_cmd) {
      begin("bench", {});
      const ComplexityResult r = complexity_bench(bench_n, bench_m, bench);
      std::cout << r.to_json() << "\n";
      if (!run_dir.empty()) write_text(run_dir / "bench.json", r.to_json() + "\n");
    }
    manifest.status = "ok";
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << msg << "\n";
    manifest.status = "failed";
    manifest.error = msg;
    code = 1;
  }
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::system_clock::now() - started).count();
  if (!run_dir.empty()) {
    try {
      write_manifest(manifest, run_dir);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = code == 0 ? 1 : code;
    }
  }
  return code;
}
