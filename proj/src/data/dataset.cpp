#include "blm/data/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "blm/error.hpp"
#include "blm/io/binary.hpp"
#include "blm/models/model.hpp"

namespace blm {

namespace {

using nlohmann::json;

json episode_json(const Episode& e) {
  json candidates = json::array();
  for (const auto& c : e.candidates) candidates.push_back({{"id", c.id}, {"category", category_name(c.category)}});
  return {{"type", data_type_name(e.type)}, {"context", e.context}, {"candidates", std::move(candidates)}};
}

Episode parse_episode(const json& j, const std::string& where) {
  try {
    Episode e;
    e.type = parse_data_type(j.at("type").get<std::string>());
    e.context = j.at("context").get<std::vector<std::string>>();
    for (const auto& c : j.at("candidates")) {
      e.candidates.push_back({c.at("id").get<std::string>(), parse_category(c.at("category").get<std::string>())});
    }
    validate(e);
    return e;
  } catch (const json::exception& ex) {
    throw FormatError(fmt::format("{}: {}", where, ex.what()));
  } catch (const Error& ex) {
    throw FormatError(fmt::format("{}: {}", where, ex.what()));
  }
}

std::vector<Episode> shuffled(std::vector<Episode> episodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(episodes.begin(), episodes.end(), rng);
  return episodes;
}

void split_pool_into(DataSplit& s, std::size_t n) {
  const auto train = n * 4 / 5;
  s.train.assign(s.pool.begin(), s.pool.begin() + static_cast<std::ptrdiff_t>(train));
  s.dev.assign(s.pool.begin() + static_cast<std::ptrdiff_t>(train), s.pool.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

void write_dataset(const std::filesystem::path& manifest, const Dataset& data, const std::string& store_name) {
  std::ostringstream out;
  out << json{{"format", "blm-manifest"}, {"version", kManifestVersion}, {"store", store_name}}.dump() << '\n';
  for (const auto& e : data.episodes) out << episode_json(e).dump() << '\n';
  write_store(manifest.parent_path() / store_name, data.store);
  io::write_file(manifest, out.str());
}

Dataset load_dataset(const std::filesystem::path& manifest, int expected_dim) {
  const auto text = io::read_file(manifest);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset data{{}, EmbeddingStore(expected_dim)};
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = fmt::format("{}:{}", manifest.string(), line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw FormatError(fmt::format("{}: {}", where, ex.what()));
    }
    if (!have_header) {
      if (!j.is_object() || j.value("format", "") != "blm-manifest") {
        throw FormatError(where + ": missing blm-manifest header");
      }
      if (j.value("version", 0) != kManifestVersion) {
        throw FormatError(fmt::format("{}: unsupported manifest version {}", where, j.value("version", 0)));
      }
      have_header = true;
      if (j.contains("store")) {
        data.store = read_store(manifest.parent_path() / j.at("store").get<std::string>());
        if (data.store.dim() != expected_dim) {
          throw FormatError(fmt::format("{}: store dim {} does not match expected {}", where, data.store.dim(),
                                        expected_dim));
        }
      }
      continue;
    }
    data.episodes.push_back(parse_episode(j, where));
  }
  std::vector<std::string> missing;
  std::size_t missing_count = 0;
  auto check = [&](const std::string& id) {
    if (data.store.contains(id)) return;
    if (std::find(missing.begin(), missing.end(), id) != missing.end()) return;
    ++missing_count;
    if (missing.size() < 10) missing.push_back(id);
  };
  for (const auto& e : data.episodes) {
    for (const auto& id : e.context) check(id);
    for (const auto& c : e.candidates) check(c.id);
  }
  if (missing_count > 0) {
    throw IntegrityError(fmt::format("{}: {} sentence id(s) missing from the store: {}{}", manifest.string(),
                                     missing_count, fmt::join(missing, ", "), missing_count > missing.size() ? ", ..." : ""));
  }
  return data;
}

std::vector<std::vector<float>> reshape_embedding(std::span<const float> v, int rows, int cols, bool allow_custom) {
  if (rows <= 0 || cols <= 0 || static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != v.size()) {
    throw ConfigError(fmt::format("cannot view a {}-vector as {}x{}", v.size(), rows, cols));
  }
  const Reshape shape{rows, cols};
  if (!allow_custom && std::find(std::begin(kAllowedReshapes), std::end(kAllowedReshapes), shape) ==
                           std::end(kAllowedReshapes)) {
    throw ConfigError(fmt::format("reshape {} is not one of 16x48, 24x32, 32x24, 48x16", to_string(shape)));
  }
  std::vector<std::vector<float>> out(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) out[i].assign(v.begin() + i * cols, v.begin() + (i + 1) * cols);
  return out;
}

std::vector<float> flatten(const std::vector<std::vector<float>>& m) {
  std::vector<float> out;
  for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  const auto trainval = n * 9 / 10;
  const auto train = trainval * 4 / 5;
  return {train, trainval - train, n - trainval};
}

DataSplit split_dataset(const std::vector<Episode>& episodes, std::uint64_t seed) {
  auto order = shuffled(episodes, seed);
  const auto sizes = split_sizes(order.size());
  DataSplit s;
  s.seed = seed;
  const auto trainval = sizes.train + sizes.dev;
  s.pool.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(trainval));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(trainval), order.end());
  split_pool_into(s, trainval);
  return s;
}

DataSplit split_pool(const std::vector<Episode>& pool, std::vector<Episode> test, std::uint64_t seed) {
  DataSplit s;
  s.seed = seed;
  s.pool = shuffled(pool, seed);
  s.test = std::move(test);
  split_pool_into(s, s.pool.size());
  return s;
}

DataSplit subsample_train(const DataSplit& split, std::size_t n_total) {
  if (n_total == 0 || n_total > split.pool.size()) {
    throw ConfigError(fmt::format("cannot restrict training to {} episodes; {} available", n_total,
                                  split.pool.size()));
  }
  DataSplit s;
  s.seed = split.seed;
  s.test = split.test;
  s.pool.assign(split.pool.begin(), split.pool.begin() + static_cast<std::ptrdiff_t>(n_total));
  split_pool_into(s, n_total);
  return s;
}

}  // namespace blm
