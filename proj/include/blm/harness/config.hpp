#pragma once

// Training configuration as flat "key = value" text. '#' starts a comment.
//
//   model = Dual_VAE_2D        reshape = 48x16      latent = 5
//   lr = 0.001                 batch = 100          epochs = auto
//   alpha = 0.01               beta = 1.0           seeds = 1,2,3,4,5
//   train_type = I             test_type = I        restricted = true
//   n_total = 2073             split_seed = 13      custom_reshape = false
//   checkpoint = run.blmc      report = run.json

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "blm/data/episode.hpp"
#include "blm/models/model.hpp"
#include "blm/objectives.hpp"

namespace blm {

struct TrainConfig {
  ModelSpec model;
  double lr = 0.001;
  int batch = 100;
  int epochs = 0;  // 0 = auto: 120 for Type I or restricted runs, else 50
  LossWeights weights;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  DataType train_type = DataType::kI;
  DataType test_type = DataType::kI;
  bool restricted = false;
  std::size_t n_total = 2073;
  std::uint64_t split_seed = 13;
  std::string checkpoint;
  std::string report;

  // ConfigError on batch < 1, lr <= 0, no seeds, negative weights, ...
  void validate() const;
  int resolved_epochs() const;
};

int default_epochs(DataType train_type, bool restricted);

// Unknown keys and malformed values throw ConfigError naming the line.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
std::string serialize(const TrainConfig& c);

std::vector<std::uint64_t> parse_seed_list(std::string_view text);  // "1,2,3"

}  // namespace blm
