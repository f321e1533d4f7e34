#include "blm/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>

#include <fmt/format.h>

#include "blm/error.hpp"

namespace blm {

namespace {

struct Noun {
  const char* sg;
  const char* pl;
  bool feminine;
  bool elided;  // l' instead of le/la
};

struct Verb {
  const char* sg;
  const char* pl;
};

constexpr Noun kNouns[] = {
    {"ordinateur", "ordinateurs", false, true}, {"programme", "programmes", false, false},
    {"expérience", "expériences", true, true},  {"voiture", "voitures", true, false},
    {"moteur", "moteurs", false, false},        {"garage", "garages", false, false},
    {"lampe", "lampes", true, false},           {"ampoule", "ampoules", true, true},
    {"salon", "salons", false, false},          {"bouteille", "bouteilles", true, false},
    {"étagère", "étagères", true, true},        {"cuisine", "cuisines", true, false},
    {"livre", "livres", false, false},          {"page", "pages", true, false},
    {"auteur", "auteurs", false, true},         {"table", "tables", true, false},
    {"jardin", "jardins", false, false},        {"vase", "vases", false, false},
    {"fleur", "fleurs", true, false},           {"fenêtre", "fenêtres", true, false},
    {"maison", "maisons", true, false},         {"porte", "portes", true, false},
    {"clé", "clés", true, false},               {"bureau", "bureaux", false, false},
    {"directeur", "directeurs", false, false},  {"entreprise", "entreprises", true, true},
    {"machine", "machines", true, false},       {"usine", "usines", true, true},
    {"avion", "avions", false, true},           {"pilote", "pilotes", false, false},
    {"compagnie", "compagnies", true, false},   {"bateau", "bateaux", false, false},
    {"port", "ports", false, false},            {"ville", "villes", true, false},
    {"téléphone", "téléphones", false, false},  {"batterie", "batteries", true, false},
    {"écran", "écrans", false, true},           {"appareil", "appareils", false, true},
    {"serveur", "serveurs", false, false},      {"réseau", "réseaux", false, false},
};

constexpr Verb kVerbs[] = {
    {"est en panne", "sont en panne"},
    {"fonctionne mal", "fonctionnent mal"},
    {"a disparu", "ont disparu"},
    {"coûte cher", "coûtent cher"},
    {"fait du bruit", "font du bruit"},
    {"reste introuvable", "restent introuvables"},
    {"attire l'attention", "attirent l'attention"},
    {"date de l'an dernier", "datent de l'an dernier"},
    {"brille", "brillent"},
    {"vieillit vite", "vieillissent vite"},
    {"plaît à Marie", "plaisent à Marie"},
    {"arrive demain", "arrivent demain"},
};

constexpr int kNounCount = static_cast<int>(std::size(kNouns));
constexpr int kVerbCount = static_cast<int>(std::size(kVerbs));

// Template rows 1-7: subject, PP1, PP2 numbers; PP2 absent in rows 1-4.
struct Row {
  Number subject, a1, a2;
  bool has_a2;
};
constexpr Number S = Number::kSg;
constexpr Number P = Number::kPl;
constexpr std::array<Row, kContextSize> kTemplate = {{
    {S, S, S, false},
    {P, S, S, false},
    {S, P, S, false},
    {P, P, S, false},
    {S, S, S, true},
    {P, S, S, true},
    {S, P, S, true},
}};

std::string noun_phrase(const char* prep, const Noun& n, Number num) {
  // prep is "", "avec", "de" or "et"; French contracts de+le and elides le/la.
  const std::string p = prep;
  if (num == Number::kPl) return (p == "de" ? std::string("des ") : (p.empty() ? "" : p + " ") + "les ") + n.pl;
  if (n.elided) return (p.empty() ? "" : p + " ") + "l'" + n.sg;
  if (p == "de" && !n.feminine) return std::string("du ") + n.sg;
  return (p.empty() ? "" : p + " ") + (n.feminine ? "la " : "le ") + n.sg;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

const char* number_tag(Number n) { return n == Number::kSg ? "sg" : "pl"; }

}  // namespace

std::string render(const SentenceSpec& s) {
  std::string subject = noun_phrase("", kNouns[s.subject], s.subject_number);
  std::string body = noun_phrase("avec", kNouns[s.attractor1], s.a1_number);
  if (s.has_a2) body += " " + noun_phrase(s.coordinated ? "et" : "de", kNouns[s.attractor2], s.a2_number);
  if (s.frame == Frame::kRelative) body += " dont Jean se servait";
  const auto& v = kVerbs[s.verb];
  const std::string verb = s.verb_number == Number::kSg ? v.sg : v.pl;
  if (s.frame == Frame::kCompletive) {
    return "Jean suppose que " + subject + " " + body + " " + verb + ".";
  }
  return capitalize(subject) + " " + body + " " + verb + ".";
}

std::vector<SentenceSpec> context_rows(const SentenceSpec& lexical) {
  std::vector<SentenceSpec> rows;
  for (const auto& t : kTemplate) {
    SentenceSpec s = lexical;
    s.subject_number = t.subject;
    s.verb_number = t.subject;
    s.a1_number = t.a1;
    s.a2_number = t.a2;
    s.has_a2 = t.has_a2;
    s.coordinated = false;
    rows.push_back(s);
  }
  return rows;
}

SentenceSpec correct_answer(const SentenceSpec& lexical) {
  SentenceSpec s = lexical;
  s.subject_number = s.verb_number = s.a1_number = Number::kPl;
  s.a2_number = Number::kSg;
  s.has_a2 = true;
  s.coordinated = false;
  return s;
}

SentenceSpec corrupt(const SentenceSpec& answer, Category category) {
  auto flip = [](Number n) { return n == Number::kSg ? Number::kPl : Number::kSg; };
  SentenceSpec s = answer;
  switch (category) {
    case Category::kCorrect: break;
    case Category::kCoord: s.coordinated = true; break;
    case Category::kWNA: s.has_a2 = false; break;
    case Category::kAE: s.verb_number = flip(s.verb_number); break;
    case Category::kWN1: s.a1_number = flip(s.a1_number); break;
    case Category::kWN2: s.a2_number = flip(s.a2_number); break;
  }
  return s;
}

std::vector<float> SyntheticSpace::draw(const std::string& key) const {
  std::mt19937_64 rng(fnv1a(key) ^ opt_.space_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> b(static_cast<std::size_t>(opt_.dim));
  for (auto& v : b) v = static_cast<float>(normal(rng));
  return b;
}

const std::vector<float>& SyntheticSpace::basis(const std::string& key) {
  if (key.starts_with("tuple/")) {
    // One per sentence; not worth caching.
    tuple_ = draw(key);
    return tuple_;
  }
  auto it = bases_.find(key);
  if (it != bases_.end()) return it->second;
  return bases_.emplace(key, draw(key)).first->second;
}

std::vector<float> SyntheticSpace::embed(const SentenceSpec& s) {
  std::vector<double> acc(static_cast<std::size_t>(opt_.dim), 0.0);
  auto add = [&](double w, const std::string& key) {
    const auto& b = basis(key);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * b[i];
  };
  auto slot = [&](const char* name, int lemma, Number num, double w_number) {
    add(opt_.w_lemma, fmt::format("lemma/{}/{}", name, lemma));
    add(opt_.w_inflection, fmt::format("infl/{}/{}/{}", name, lemma, number_tag(num)));
    add(w_number, fmt::format("number/{}/{}", name, number_tag(num)));
  };
  slot("subject", s.subject, s.subject_number, opt_.w_subject_number);
  slot("pp1", s.attractor1, s.a1_number, opt_.w_a1_number);
  if (s.has_a2) {
    slot("pp2", s.attractor2, s.a2_number, opt_.w_a2_number);
    add(opt_.w_link, s.coordinated ? "link/et" : "link/de");
  }
  add(opt_.w_lemma, fmt::format("lemma/verb/{}", s.verb));
  add(opt_.w_inflection, fmt::format("infl/verb/{}/{}", s.verb, number_tag(s.verb_number)));
  add(opt_.w_verb_number, fmt::format("number/verb/{}", number_tag(s.verb_number)));
  add(opt_.w_frame, fmt::format("frame/{}", static_cast<int>(s.frame)));
  add(opt_.w_count, fmt::format("count/{}", s.has_a2 ? 2 : 1));

  const auto text = render(s);
  add(opt_.w_tuple, "tuple/" + text);
  std::mt19937_64 rng(fnv1a(text) ^ opt_.space_seed);
  std::normal_distribution<double> normal(0.0, opt_.noise);
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(opt_.scale * acc[i] + normal(rng));
  return out;
}

std::vector<SyntheticEpisode> synthesize_episodes(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw ConfigError("synthetic generation needs at least one episode");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noun(0, kNounCount - 1);
  std::uniform_int_distribution<int> verb(0, kVerbCount - 1);
  std::uniform_int_distribution<int> frame(0, 2);
  std::vector<SyntheticEpisode> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SentenceSpec lex;
    lex.subject = noun(rng);
    do lex.attractor1 = noun(rng);
    while (lex.attractor1 == lex.subject);
    do lex.attractor2 = noun(rng);
    while (lex.attractor2 == lex.subject || lex.attractor2 == lex.attractor1);
    lex.verb = verb(rng);
    lex.frame = static_cast<Frame>(frame(rng));

    SyntheticEpisode ep;
    ep.context = context_rows(lex);
    std::vector<Category> order(std::begin(kAllCategories), std::end(kAllCategories));
    std::shuffle(order.begin(), order.end(), rng);
    const auto answer = correct_answer(lex);
    for (const auto c : order) {
      ep.candidates.push_back(corrupt(answer, c));
      ep.episode.candidates.push_back({sentence_id(render(ep.candidates.back())), c});
    }
    for (const auto& s : ep.context) ep.episode.context.push_back(sentence_id(render(s)));
    out.push_back(std::move(ep));
  }
  return out;
}

Dataset generate_synthetic(std::uint64_t seed, std::size_t n, const SyntheticOptions& options) {
  SyntheticSpace space(options);
  Dataset data{{}, EmbeddingStore(options.dim)};
  auto put = [&](const SentenceSpec& s) {
    const auto id = sentence_id(render(s));
    if (!data.store.contains(id)) data.store.add(id, space.embed(s));
  };
  for (auto& ep : synthesize_episodes(seed, n)) {
    for (const auto& s : ep.context) put(s);
    for (const auto& s : ep.candidates) put(s);
    data.episodes.push_back(std::move(ep.episode));
  }
  return data;
}

std::vector<std::pair<std::string, std::string>> synthetic_sentences(std::uint64_t seed, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> out;
  std::map<std::string, bool> have;
  for (const auto& ep : synthesize_episodes(seed, n)) {
    auto put = [&](const SentenceSpec& s) {
      auto text = render(s);
      auto id = sentence_id(text);
      if (have.emplace(id, true).second) out.emplace_back(std::move(id), std::move(text));
    };
    for (const auto& s : ep.context) put(s);
    for (const auto& s : ep.candidates) put(s);
  }
  return out;
}

}  // namespace blm
