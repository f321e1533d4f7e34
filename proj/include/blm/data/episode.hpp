#pragma once

// BLM episodes and the embedding store they index into.
//
// An episode is 7 context sentences plus 6 candidate answers, one per
// category. Sentences are referenced by id; vectors live in the store.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace blm {

enum class Category { kCorrect, kCoord, kWNA, kAE, kWN1, kWN2 };

inline constexpr Category kAllCategories[] = {Category::kCorrect, Category::kCoord, Category::kWNA,
                                              Category::kAE,      Category::kWN1,   Category::kWN2};
inline constexpr Category kErrorCategories[] = {Category::kCoord, Category::kWNA, Category::kAE, Category::kWN1,
                                                Category::kWN2};

std::string_view category_name(Category c);           // "Correct", "Coord", ...
Category parse_category(std::string_view name);       // FormatError on unknown names

enum class DataType { kI, kII, kIII };

std::string_view data_type_name(DataType t);          // "I", "II", "III"
DataType parse_data_type(std::string_view name);      // ConfigError on unknown names

inline constexpr int kContextSize = 7;
inline constexpr int kCandidateCount = 6;
inline constexpr int kEmbeddingDim = 768;

struct Candidate {
  std::string id;
  Category category = Category::kCorrect;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct Episode {
  DataType type = DataType::kI;
  std::vector<std::string> context;
  std::vector<Candidate> candidates;

  // Index of the Correct candidate; IntegrityError if the episode is malformed.
  int correct_index() const;
  friend bool operator==(const Episode&, const Episode&) = default;
};

// IntegrityError unless the context has 7 ids, there are 6 candidates and the
// six categories are pairwise distinct (so exactly one is Correct).
void validate(const Episode& e);

// Sentence id -> vector of length dim, in insertion order.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(int dim = kEmbeddingDim);

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  // Adds a vector. Re-adding an id is a no-op when the values agree and an
  // IntegrityError otherwise. DimensionError on a wrong length.
  void add(const std::string& id, std::span<const float> values);
  bool contains(std::string_view id) const;
  // IntegrityError naming the id when absent.
  std::span<const float> at(std::string_view id) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
  }

 private:
  int dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kStoreVersion = 1;

// "BLME", u32 version, u32 count, u32 dim, then per record u16 id length,
// id bytes and dim float32 values, all little-endian.
std::string encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::string_view bytes, const std::string& source);
void write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore read_store(const std::filesystem::path& path);

// Exact encoded size of a store with `count` ids of `id_bytes` total length.
std::size_t store_size_bytes(std::size_t count, std::size_t id_bytes, int dim);

// 16 hex digits of the FNV-1a 64-bit hash of the text.
std::string sentence_id(std::string_view text);

}  // namespace blm
