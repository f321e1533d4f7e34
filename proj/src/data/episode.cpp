#include "blm/data/episode.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "blm/error.hpp"
#include "blm/io/binary.hpp"

namespace blm {

namespace {

constexpr std::array<std::string_view, 6> kCategoryNames = {"Correct", "Coord", "WNA", "AE", "WN1", "WN2"};
constexpr std::array<std::string_view, 3> kDataTypeNames = {"I", "II", "III"};

}  // namespace

std::string_view category_name(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

Category parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  throw FormatError(fmt::format("unknown candidate category '{}'", name));
}

std::string_view data_type_name(DataType t) { return kDataTypeNames[static_cast<std::size_t>(t)]; }

DataType parse_data_type(std::string_view name) {
  for (std::size_t i = 0; i < kDataTypeNames.size(); ++i) {
    if (kDataTypeNames[i] == name) return static_cast<DataType>(i);
  }
  throw ConfigError(fmt::format("unknown data type '{}' (expected I, II or III)", name));
}

void validate(const Episode& e) {
  if (e.context.size() != kContextSize) {
    throw IntegrityError(fmt::format("episode has {} context sentences, expected {}", e.context.size(), kContextSize));
  }
  if (e.candidates.size() != kCandidateCount) {
    throw IntegrityError(fmt::format("episode has {} candidates, expected {}", e.candidates.size(), kCandidateCount));
  }
  std::array<int, kCandidateCount> seen{};
  for (const auto& c : e.candidates) {
    if (++seen[static_cast<std::size_t>(c.category)] > 1) {
      throw IntegrityError(fmt::format("episode repeats candidate category {}", category_name(c.category)));
    }
  }
}

int Episode::correct_index() const {
  validate(*this);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].category == Category::kCorrect) return static_cast<int>(i);
  }
  throw IntegrityError("episode has no Correct candidate");
}

EmbeddingStore::EmbeddingStore(int dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError(fmt::format("embedding dim must be positive, got {}", dim));
}

void EmbeddingStore::add(const std::string& id, std::span<const float> values) {
  if (values.size() != static_cast<std::size_t>(dim_)) {
    throw DimensionError(fmt::format("vector for '{}' has length {}, store dim is {}", id, values.size(), dim_));
  }
  if (const auto it = index_.find(id); it != index_.end()) {
    const auto existing = at(id);
    if (!std::equal(existing.begin(), existing.end(), values.begin())) {
      throw IntegrityError(fmt::format("conflicting vectors for sentence id '{}'", id));
    }
    return;
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  values_.insert(values_.end(), values.begin(), values.end());
}

bool EmbeddingStore::contains(std::string_view id) const { return index_.contains(std::string(id)); }

std::span<const float> EmbeddingStore::at(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw IntegrityError(fmt::format("sentence id '{}' not in embedding store", id));
  return {values_.data() + it->second * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
}

std::string encode_store(const EmbeddingStore& store) {
  io::ByteWriter w;
  w.bytes("BLME");
  w.u32(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  w.u32(static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.ids()) {
    if (id.size() > 0xFFFF) throw FormatError(fmt::format("sentence id of {} bytes is too long", id.size()));
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
    for (const float v : store.at(id)) w.f32(v);
  }
  return w.buffer();
}

EmbeddingStore decode_store(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (r.bytes(4) != "BLME") throw FormatError(source + ": not an embedding store (bad magic)");
  const auto version = r.u32();
  if (version != kStoreVersion) throw FormatError(fmt::format("{}: unsupported store version {}", source, version));
  const auto count = r.u32();
  const auto dim = r.u32();
  if (dim == 0 || dim > (1u << 20)) throw FormatError(fmt::format("{}: implausible dim {}", source, dim));
  EmbeddingStore store(static_cast<int>(dim));
  std::vector<float> values(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto id = r.bytes(r.u16());
    for (auto& v : values) v = r.f32();
    if (store.contains(id)) throw FormatError(fmt::format("{}: duplicate sentence id '{}'", source, id));
    store.add(id, values);
  }
  if (!r.at_end()) throw FormatError(source + ": trailing bytes after last record");
  return store;
}

void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  io::write_file(path, encode_store(store));
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  return decode_store(io::read_file(path), path.string());
}

std::size_t store_size_bytes(std::size_t count, std::size_t id_bytes, int dim) {
  return 16 + count * (2 + static_cast<std::size_t>(dim) * 4) + id_bytes;
}

std::string sentence_id(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace blm
