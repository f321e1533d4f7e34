#pragma once

// Deterministic BLM agreement episodes with pseudo-embeddings.
//
// Context rows follow the agreement template: NP-PP1(-PP2)-VP with the verb
// agreeing with the subject and the attractor numbers varying row by row.
// The answer is NP-pl PP1-pl PP2-sg VP-pl; each wrong candidate changes the
// answer by exactly one rule:
//   Coord  PP2 joined by "et" instead of "de"
//   WNA    PP2 dropped
//   AE     verb number flipped
//   WN1    PP1 number flipped
//   WN2    PP2 number flipped
//
// A sentence vector is a weighted sum of Gaussian bases keyed by its
// features (lemmas, per-lemma inflections, per-slot number, clause frame,
// attractor count, PP2 link, the whole tuple) plus noise seeded by the
// sentence text. Bases depend only on the space seed, so separately
// generated sets share a space.
// Apart from the tuple basis the answer equals row4 + row6 - row2, so the
// rule is linearly recoverable. PP2 number has the smallest weight, so WN2
// is the nearest wrong candidate.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blm/data/dataset.hpp"

namespace blm {

enum class Frame { kMain, kCompletive, kRelative };
enum class Number { kSg, kPl };

struct SentenceSpec {
  Frame frame = Frame::kMain;
  int subject = 0;  // noun lemma indices
  int attractor1 = 0;
  int attractor2 = 0;
  int verb = 0;
  Number subject_number = Number::kSg;
  Number a1_number = Number::kSg;
  Number a2_number = Number::kSg;
  Number verb_number = Number::kSg;
  bool has_a2 = false;
  bool coordinated = false;  // "et N2" in place of "de N2"
  friend bool operator==(const SentenceSpec&, const SentenceSpec&) = default;
};

std::string render(const SentenceSpec& s);

// Context rows 1-7 for one lexical/frame choice; numbers per the template.
std::vector<SentenceSpec> context_rows(const SentenceSpec& lexical);
SentenceSpec correct_answer(const SentenceSpec& lexical);
SentenceSpec corrupt(const SentenceSpec& answer, Category category);

// Defaults keep the six candidates near-exchangeable under a random
// projection (the tuple basis dominates their differences) while the
// structured part still separates them for an aligned predictor.
struct SyntheticOptions {
  std::uint64_t space_seed = 0x5eed0b1a;
  int dim = kEmbeddingDim;
  double scale = 0.15;
  double noise = 0.05;
  double w_lemma = 0.3;
  double w_inflection = 1.0;
  double w_subject_number = 1.0;
  double w_a1_number = 1.0;
  double w_a2_number = 0.8;
  double w_verb_number = 1.0;
  double w_frame = 0.3;
  double w_count = 0.6;
  double w_link = 1.5;
  double w_tuple = 3.0;  // idiosyncratic basis keyed by the whole feature tuple
};

class SyntheticSpace {
 public:
  explicit SyntheticSpace(SyntheticOptions options = {}) : opt_(options) {}
  std::vector<float> embed(const SentenceSpec& s);
  const SyntheticOptions& options() const { return opt_; }

 private:
  const std::vector<float>& basis(const std::string& key);
  std::vector<float> draw(const std::string& key) const;
  SyntheticOptions opt_;
  std::map<std::string, std::vector<float>> bases_;
  std::vector<float> tuple_;
};

struct SyntheticEpisode {
  Episode episode;
  std::vector<SentenceSpec> context;
  std::vector<SentenceSpec> candidates;  // same order as episode.candidates
};

std::vector<SyntheticEpisode> synthesize_episodes(std::uint64_t seed, std::size_t n);
Dataset generate_synthetic(std::uint64_t seed, std::size_t n, const SyntheticOptions& options = {});

// Sentence texts by id, in store order, for external embedding tools.
std::vector<std::pair<std::string, std::string>> synthetic_sentences(std::uint64_t seed, std::size_t n);

}  // namespace blm
