#pragma once

// Manifests, reshaping and train/dev/test splits.
//
// A manifest is JSON Lines. The first line is a header naming the store file
// (relative to the manifest); each further line is one episode:
//
//   {"format":"blm-manifest","version":1,"store":"type_I.blme"}
//   {"type":"I","context":["id1",...,"id7"],
//    "candidates":[{"id":"...","category":"Correct"}, ...]}

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "blm/data/episode.hpp"

namespace blm {

struct Dataset {
  std::vector<Episode> episodes;
  EmbeddingStore store;
};

inline constexpr int kManifestVersion = 1;

// Writes the manifest and its store (store_name next to the manifest).
void write_dataset(const std::filesystem::path& manifest, const Dataset& data, const std::string& store_name);

// FormatError on malformed lines or a store whose dim differs from
// expected_dim; IntegrityError listing ids that the store lacks. A manifest
// with no episodes (even an empty file) yields an empty dataset.
Dataset load_dataset(const std::filesystem::path& manifest, int expected_dim = kEmbeddingDim);

// Row-major view of a sentence vector: out[i * cols + j] = v[i * cols + j],
// returned as rows of length cols. ConfigError if rows * cols != v.size() or
// the shape is outside the allowed set and allow_custom is false.
std::vector<std::vector<float>> reshape_embedding(std::span<const float> v, int rows, int cols,
                                                  bool allow_custom = false);
std::vector<float> flatten(const std::vector<std::vector<float>>& m);

struct DataSplit {
  std::vector<Episode> train;
  std::vector<Episode> dev;
  std::vector<Episode> test;
  std::uint64_t seed = 0;
  // Shuffled train+dev pool, kept for restriction.
  std::vector<Episode> pool;
};

struct SplitSizes {
  std::size_t train, dev, test;
};

// test = N - floor(0.9 N); dev = train+dev - floor(0.8 (train+dev)).
SplitSizes split_sizes(std::size_t n);

// Seeded shuffle, then test, then train, then dev slices.
DataSplit split_dataset(const std::vector<Episode>& episodes, std::uint64_t seed);

// For data that ships with its own test set: shuffle the training pool and
// split it 80:20 into train and dev.
DataSplit split_pool(const std::vector<Episode>& pool, std::vector<Episode> test, std::uint64_t seed);

// Keeps the first n_total episodes of the shuffled pool and re-splits them
// 80:20. ConfigError when n_total is zero or exceeds the pool.
DataSplit subsample_train(const DataSplit& split, std::size_t n_total);

}  // namespace blm
