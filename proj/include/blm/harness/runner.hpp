#pragma once

// Training, evaluation and the experiment drivers built on them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blm/data/dataset.hpp"
#include "blm/harness/config.hpp"
#include "blm/models/model.hpp"

namespace blm {

// Episodes of each available data type, with one merged store. A data
// directory holds type_<T>.jsonl, or type_<T>.train.jsonl plus
// type_<T>.test.jsonl when the type ships with a fixed test set.
class DataSource {
 public:
  static DataSource open(const std::filesystem::path& dir);
  void add(DataType type, std::vector<Episode> pool, std::vector<Episode> test, bool presplit,
           const EmbeddingStore& store);

  bool has(DataType type) const { return parts_.contains(type); }
  std::vector<DataType> types() const;
  const EmbeddingStore& store() const { return store_; }

  // Train/dev from the train type's pool, test from the test type. When a
  // type has no fixed test set its episodes are split 90:10 by split_seed.
  // Restricted configs keep n_total train+dev episodes.
  DataSplit split(const TrainConfig& config) const;

 private:
  struct Part {
    std::vector<Episode> pool;  // train+dev candidates
    std::vector<Episode> test;
  };
  const Part& part(DataType type) const;
  std::map<DataType, Part> parts_;
  EmbeddingStore store_;
};

struct Evaluation {
  std::size_t episodes = 0;
  std::array<std::size_t, kCandidateCount> chosen{};  // by Category

  double f1() const;  // fraction of episodes whose Correct candidate is chosen
  double error_fraction(Category c) const;
};

// Argmax-cosine selection for one prediction per episode.
Evaluation evaluate_predictions(const std::vector<std::vector<float>>& preds, const std::vector<Episode>& episodes,
                                const EmbeddingStore& store);
// Eval-mode forward (latent mean) in batches. IntegrityError on malformed episodes.
Evaluation evaluate(const Model& model, const std::vector<Episode>& episodes, const EmbeddingStore& store,
                    int batch = 100);

struct EpochLog {
  int epoch = 0;
  double loss = 0, answer = 0, kl = 0, recon = 0;  // batch means
  double dev_f1 = 0;
};

struct TrainResult {
  Model model;  // best-dev parameters
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_dev_f1 = -1;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam on shuffled minibatches; the batch order of epoch e is drawn from
// (seed, e). NumericError on a non-finite loss.
TrainResult train(const TrainConfig& config, std::uint64_t seed, const DataSplit& split, const EmbeddingStore& store,
                  const EpochCallback& on_epoch = {});

struct SeedResult {
  std::uint64_t seed = 0;
  double f1 = 0;
  std::array<double, kCandidateCount> chosen{};  // fractions by Category
  int best_epoch = 0;
  double best_dev_f1 = 0;
};

struct RunReport {
  std::string system;  // model kind, plus reshape for 2D kinds
  DataType train_type = DataType::kI;
  DataType test_type = DataType::kI;
  std::size_t test_size = 0;
  std::string test_fingerprint;
  std::vector<SeedResult> runs;
  double mean_f1 = 0;
  double std_f1 = 0;  // sample std; 0 for one seed
  std::array<double, kCandidateCount> mean_chosen{};
  std::string config;  // serialized TrainConfig

  double error_fraction(Category c) const { return mean_chosen[static_cast<std::size_t>(c)]; }
};

std::string system_name(const ModelSpec& spec);
std::string fingerprint(const std::vector<Episode>& episodes);

// Mean and sample standard deviation over per-seed F1.
void aggregate(RunReport& report);

std::string to_json(const RunReport& r);
RunReport report_from_json(std::string_view text);
std::string tsv_header();
std::string to_tsv_row(const RunReport& r);

struct MultiRunOptions {
  std::filesystem::path checkpoint_dir;  // per-seed checkpoints when non-empty
  EpochCallback on_epoch;
};

RunReport multi_run(const TrainConfig& config, const DataSplit& split, const EmbeddingStore& store,
                    const MultiRunOptions& options = {});

struct SweepCell {
  DataType train_type, test_type;
  Reshape shape;
  RunReport report;
};

// One multi_run per allowed reshape and per train/test type pair available.
std::vector<SweepCell> sweep_reshape(const TrainConfig& config, const DataSource& data,
                                     const MultiRunOptions& options = {});
std::string render_sweep(const std::vector<SweepCell>& cells);

inline const std::vector<std::size_t> kDefaultCurveSizes = {50, 100, 250, 500, 1000, 1658, 2073};

struct CurvePoint {
  DataType train_type;
  std::size_t size;
  RunReport report;
};

// One restricted multi_run per size and per available train type, tested on
// config.test_type. ConfigError unless sizes ascend and fit the pool.
std::vector<CurvePoint> learning_curve(const TrainConfig& config, const DataSource& data,
                                       const std::vector<std::size_t>& sizes, const MultiRunOptions& options = {});
std::string render_curve(const std::vector<CurvePoint>& points);

// Error percentages relative to test size, one row per report.
// ConfigError when the reports were evaluated on different test sets.
struct ErrorRow {
  std::string system;
  double f1 = 0;
  std::array<double, 5> percent{};  // Coord, WNA, AE, WN1, WN2
};
std::vector<ErrorRow> error_analysis(const std::vector<RunReport>& reports);
std::string render_errors(const std::vector<ErrorRow>& rows);

}  // namespace blm
