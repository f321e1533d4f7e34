// Command-line front end: data generation, training, evaluation and the
// experiment drivers.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "blm/data/synthetic.hpp"
#include "blm/error.hpp"
#include "blm/harness/runner.hpp"
#include "blm/io/binary.hpp"
#include "blm/models/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::string seed_list;
  std::string data_dir = "data";
  std::string out_dir = "runs";
  bool quiet = false;
};

blm::TrainConfig resolve_config(const Globals& g) {
  blm::TrainConfig c = g.config.empty() ? blm::parse_config("") : blm::load_config(g.config);
  if (!g.seed_list.empty()) c.seeds = blm::parse_seed_list(g.seed_list);
  c.validate();
  return c;
}

blm::EpochCallback progress(const Globals& g) {
  if (g.quiet) return {};
  return [](const blm::EpochLog& l) {
    fmt::print(stderr, "epoch {:3d}  loss {:.5f}  answer {:.5f}  kl {:.5f}  recon {:.5f}  dev F1 {:.4f}\n", l.epoch,
               l.loss, l.answer, l.kl, l.recon, l.dev_f1);
  };
}

fs::path out_path(const Globals& g, const std::string& configured, const std::string& fallback) {
  if (configured.empty()) return fs::path(g.out_dir) / fallback;
  const fs::path p(configured);
  return p.is_absolute() ? p : fs::path(g.out_dir) / p;
}

void write_report(const Globals& g, const blm::RunReport& r, const std::string& configured, const std::string& stem) {
  const auto json_path = out_path(g, configured, stem + ".json");
  blm::io::write_file(json_path, blm::to_json(r));
  auto tsv_path = json_path;
  tsv_path.replace_extension(".tsv");
  blm::io::write_file(tsv_path, blm::tsv_header() + blm::to_tsv_row(r));
  fmt::print("{}\n{}", json_path.string(), blm::tsv_header() + blm::to_tsv_row(r));
}

int gen_synthetic(const Globals& g, std::size_t episodes, std::uint64_t seed, std::size_t test_episodes,
                  std::uint64_t test_seed) {
  const fs::path dir(g.data_dir);
  auto write_sentences = [&](const std::string& name, std::uint64_t s, std::size_t n) {
    std::string tsv;
    for (const auto& [id, text] : blm::synthetic_sentences(s, n)) tsv += id + "\t" + text + "\n";
    blm::io::write_file(dir / name, tsv);
  };
  if (test_episodes == 0) {
    blm::write_dataset(dir / "type_I.jsonl", blm::generate_synthetic(seed, episodes), "type_I.blme");
    write_sentences("type_I.sentences.tsv", seed, episodes);
    fmt::print("wrote {} episodes to {}\n", episodes, (dir / "type_I.jsonl").string());
  } else {
    blm::write_dataset(dir / "type_I.train.jsonl", blm::generate_synthetic(seed, episodes), "type_I.train.blme");
    blm::write_dataset(dir / "type_I.test.jsonl", blm::generate_synthetic(test_seed, test_episodes),
                       "type_I.test.blme");
    write_sentences("type_I.train.sentences.tsv", seed, episodes);
    write_sentences("type_I.test.sentences.tsv", test_seed, test_episodes);
    fmt::print("wrote {} training and {} test episodes to {}\n", episodes, test_episodes, dir.string());
  }
  return 0;
}

int train_cmd(const Globals& g) {
  const auto config = resolve_config(g);
  const auto data = blm::DataSource::open(g.data_dir);
  const auto split = data.split(config);
  const auto seed = config.seeds.front();
  fmt::print(stderr, "{}: {} train / {} dev / {} test, {} epochs, seed {}\n", blm::system_name(config.model),
             split.train.size(), split.dev.size(), split.test.size(), config.resolved_epochs(), seed);
  const auto result = blm::train(config, seed, split, data.store(), progress(g));
  const auto ckpt = out_path(g, config.checkpoint, fmt::format("{}_seed{}.blmc", blm::system_name(config.model), seed));
  blm::write_checkpoint(ckpt, result.model, fmt::format("seed = {}\n", seed) + blm::serialize(config));

  std::string log = "epoch\tloss\tanswer\tkl\trecon\tdev_f1\n";
  for (const auto& l : result.log) {
    log += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", l.epoch, l.loss, l.answer, l.kl, l.recon, l.dev_f1);
  }
  auto log_path = ckpt;
  log_path.replace_extension(".epochs.tsv");
  blm::io::write_file(log_path, log);
  fmt::print("{}\nbest epoch {} dev F1 {:.4f}\n", ckpt.string(), result.best_epoch, result.best_dev_f1);
  return 0;
}

int evaluate_cmd(const Globals& g, const std::string& checkpoint) {
  const auto config = resolve_config(g);
  const auto ck = blm::read_checkpoint(checkpoint);
  const auto data = blm::DataSource::open(g.data_dir);
  const auto split = data.split(config);
  const auto ev = blm::evaluate(ck.model, split.test, data.store());
  blm::RunReport r;
  r.system = blm::system_name(ck.model.spec());
  r.train_type = config.train_type;
  r.test_type = config.test_type;
  r.test_size = split.test.size();
  r.test_fingerprint = blm::fingerprint(split.test);
  blm::SeedResult s{0, ev.f1(), {}, 0, 0};
  for (const auto c : blm::kAllCategories) s.chosen[static_cast<std::size_t>(c)] = ev.error_fraction(c);
  r.runs.push_back(s);
  r.config = ck.record;
  blm::aggregate(r);
  write_report(g, r, config.report, fs::path(checkpoint).stem().string() + ".eval");
  return 0;
}

int multirun_cmd(const Globals& g) {
  const auto config = resolve_config(g);
  const auto data = blm::DataSource::open(g.data_dir);
  blm::MultiRunOptions opts{fs::path(g.out_dir), progress(g)};
  const auto report = blm::multi_run(config, data.split(config), data.store(), opts);
  write_report(g, report, config.report,
               fmt::format("{}_{}-{}", report.system, blm::data_type_name(report.train_type),
                           blm::data_type_name(report.test_type)));
  return 0;
}

int sweep_cmd(const Globals& g) {
  const auto config = resolve_config(g);
  const auto data = blm::DataSource::open(g.data_dir);
  const auto cells = blm::sweep_reshape(config, data, {{}, progress(g)});
  std::string tsv = blm::tsv_header();
  for (const auto& c : cells) {
    tsv += blm::to_tsv_row(c.report);
    blm::io::write_file(fs::path(g.out_dir) / fmt::format("sweep_{}_{}-{}.json", c.report.system,
                                                           blm::data_type_name(c.train_type),
                                                           blm::data_type_name(c.test_type)),
                        blm::to_json(c.report));
  }
  blm::io::write_file(fs::path(g.out_dir) / "sweep_reshape.tsv", tsv);
  const auto grid = blm::render_sweep(cells);
  blm::io::write_file(fs::path(g.out_dir) / "sweep_reshape.grid.tsv", grid);
  fmt::print("{}", grid);
  return 0;
}

int curve_cmd(const Globals& g, const std::string& sizes_text) {
  const auto config = resolve_config(g);
  std::vector<std::size_t> sizes(blm::kDefaultCurveSizes);
  if (!sizes_text.empty()) {
    sizes.clear();
    for (const auto v : blm::parse_seed_list(sizes_text)) sizes.push_back(static_cast<std::size_t>(v));
  }
  const auto data = blm::DataSource::open(g.data_dir);
  const auto points = blm::learning_curve(config, data, sizes, {{}, progress(g)});
  const auto table = blm::render_curve(points);
  blm::io::write_file(fs::path(g.out_dir) / "learning_curve.tsv", table);
  fmt::print("{}", table);
  return 0;
}

int errors_cmd(const Globals& g, const std::vector<std::string>& paths) {
  std::vector<blm::RunReport> reports;
  for (const auto& p : paths) reports.push_back(blm::report_from_json(blm::io::read_file(p)));
  if (reports.empty()) throw blm::ConfigError("error-analysis needs at least one report");
  const auto table = blm::render_errors(blm::error_analysis(reports));
  blm::io::write_file(fs::path(g.out_dir) / "error_analysis.tsv", table);
  fmt::print("{}", table);
  return 0;
}

int inspect_cmd(const Globals& g, const std::string& model, const std::string& reshape, std::int64_t batch) {
  blm::ModelSpec spec;
  if (!model.empty()) {
    spec.kind = blm::parse_model_kind(model);
    if (blm::is_2d(spec.kind)) spec.reshape = reshape.empty() ? blm::Reshape{48, 16} : blm::parse_reshape(reshape);
  } else {
    spec = resolve_config(g).model;
  }
  fmt::print("{}", blm::Model::build(spec, 0).parameter_report().render(batch));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blackbird Language Matrix probes over sentence embeddings"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Flat key = value training config");
  app.add_option("--seed-list", g.seed_list, "Comma-separated run seeds, overriding the config");
  app.add_option("--data-dir", g.data_dir, "Directory with type_<T>[.train|.test].jsonl manifests");
  app.add_option("--out-dir", g.out_dir, "Directory for checkpoints and reports");
  app.add_flag("-q,--quiet", g.quiet, "No per-epoch progress");

  std::size_t episodes = 2304, test_episodes = 0;
  std::uint64_t seed = 1, test_seed = 2;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic Type I dataset");
  gen->add_option("--episodes", episodes, "Episodes (training pool when --test-episodes is set)");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--test-episodes", test_episodes, "Also write a separate test set of this size");
  gen->add_option("--test-seed", test_seed, "Generator seed for the test set");

  auto* train = app.add_subcommand("train", "Train one model (first seed) and keep the best-dev checkpoint");

  std::string checkpoint;
  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on the configured test split");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* multi = app.add_subcommand("multirun", "Train and evaluate once per seed; report mean and std");
  auto* sweep = app.add_subcommand("sweep-reshape", "Multirun for every 2D reshape and train/test type pair");

  std::string sizes;
  auto* curve = app.add_subcommand("learning-curve", "Multirun over growing train+dev budgets");
  curve->add_option("--sizes", sizes, "Comma-separated budgets (default 50,100,250,500,1000,1658,2073)");

  std::vector<std::string> reports;
  auto* errors = app.add_subcommand("error-analysis", "Compare error categories across run reports");
  errors->add_option("reports", reports, "Run report JSON files")->required();

  std::string model, reshape;
  std::int64_t batch = 100;
  auto* inspect = app.add_subcommand("inspect-model", "Print the layer/parameter summary table");
  inspect->add_option("--model", model, "Model kind, e.g. Dual_VAE_2D (default: from --config)");
  inspect->add_option("--reshape", reshape, "Reshape for 2D kinds, e.g. 48x16");
  inspect->add_option("--batch", batch, "Batch size shown in the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : blm::exit_codes::kConfig;
  }

  try {
    if (*gen) return gen_synthetic(g, episodes, seed, test_episodes, test_seed);
    if (*train) return train_cmd(g);
    if (*eval) return evaluate_cmd(g, checkpoint);
    if (*multi) return multirun_cmd(g);
    if (*sweep) return sweep_cmd(g);
    if (*curve) return curve_cmd(g, sizes);
    if (*errors) return errors_cmd(g, reports);
    if (*inspect) return inspect_cmd(g, model, reshape, batch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return blm::exit_code(e);
  }
  return blm::exit_codes::kGeneric;
}
