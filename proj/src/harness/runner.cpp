#include "blm/harness/runner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "blm/error.hpp"
#include "blm/models/checkpoint.hpp"
#include "blm/objectives.hpp"

namespace blm {

namespace {

using nlohmann::json;

struct Batch {
  Tensor inputs;      // [B, 7, D]
  Tensor candidates;  // [B, 6, D]
  std::vector<int> correct;
};

Batch make_batch(const std::vector<const Episode*>& eps, const EmbeddingStore& store, bool with_candidates) {
  const auto b = static_cast<std::int64_t>(eps.size());
  const auto d = static_cast<std::size_t>(store.dim());
  std::vector<float> x;
  x.reserve(eps.size() * kContextSize * d);
  std::vector<float> c;
  Batch out;
  for (const auto* e : eps) {
    for (const auto& id : e->context) {
      const auto v = store.at(id);
      x.insert(x.end(), v.begin(), v.end());
    }
    if (with_candidates) {
      out.correct.push_back(e->correct_index());
      for (const auto& cand : e->candidates) {
        const auto v = store.at(cand.id);
        c.insert(c.end(), v.begin(), v.end());
      }
    }
  }
  out.inputs = Tensor({b, kContextSize, store.dim()}, std::move(x));
  if (with_candidates) out.candidates = Tensor({b, kCandidateCount, store.dim()}, std::move(c));
  return out;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ull + b + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

std::vector<std::pair<std::size_t, std::size_t>> type_pairs(const DataSource& data) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto tr : data.types()) {
    for (const auto te : data.types()) out.emplace_back(static_cast<std::size_t>(tr), static_cast<std::size_t>(te));
  }
  return out;
}

std::string cell(const RunReport& r) { return fmt::format("{:.4f} ({:.4f})", r.mean_f1, r.std_f1); }

}  // namespace

DataSource DataSource::open(const std::filesystem::path& dir) {
  DataSource src;
  for (const auto type : {DataType::kI, DataType::kII, DataType::kIII}) {
    const auto stem = fmt::format("type_{}", data_type_name(type));
    const auto whole = dir / (stem + ".jsonl");
    const auto train = dir / (stem + ".train.jsonl");
    const auto test = dir / (stem + ".test.jsonl");
    if (std::filesystem::exists(train) && std::filesystem::exists(test)) {
      auto tr = load_dataset(train);
      auto te = load_dataset(test);
      src.add(type, std::move(tr.episodes), {}, true, tr.store);
      src.parts_[type].test = std::move(te.episodes);
      for (const auto& id : te.store.ids()) src.store_.add(id, te.store.at(id));
    } else if (std::filesystem::exists(whole)) {
      auto all = load_dataset(whole);
      src.add(type, std::move(all.episodes), {}, false, all.store);
    }
  }
  if (src.parts_.empty()) {
    throw IntegrityError(fmt::format("{}: no type_I/II/III manifests found", dir.string()));
  }
  return src;
}

void DataSource::add(DataType type, std::vector<Episode> pool, std::vector<Episode> test, bool presplit,
                     const EmbeddingStore& store) {
  if (store.dim() != store_.dim()) {
    throw FormatError(fmt::format("store dim {} does not match {}", store.dim(), store_.dim()));
  }
  for (const auto& id : store.ids()) store_.add(id, store.at(id));
  Part p;
  if (presplit) {
    p.pool = std::move(pool);
    p.test = std::move(test);
  } else {
    p.pool = std::move(pool);
  }
  parts_[type] = std::move(p);
}

std::vector<DataType> DataSource::types() const {
  std::vector<DataType> out;
  for (const auto& [t, _] : parts_) out.push_back(t);
  return out;
}

const DataSource::Part& DataSource::part(DataType type) const {
  const auto it = parts_.find(type);
  if (it == parts_.end()) throw ConfigError(fmt::format("no Type {} data available", data_type_name(type)));
  return it->second;
}

DataSplit DataSource::split(const TrainConfig& config) const {
  // A type without a fixed test set is split 90:10; its test slice is used
  // whenever that type is the test type and its pool slice for training.
  auto carve = [&](DataType t) {
    const auto& p = part(t);
    if (!p.test.empty()) return split_pool(p.pool, p.test, config.split_seed);
    return split_dataset(p.pool, config.split_seed);
  };
  const auto train_side = carve(config.train_type);
  DataSplit s = config.train_type == config.test_type
                    ? train_side
                    : split_pool(train_side.pool, carve(config.test_type).test, config.split_seed);
  if (config.restricted) s = subsample_train(s, config.n_total);
  return s;
}

double Evaluation::f1() const {
  return episodes == 0 ? 0.0 : static_cast<double>(chosen[0]) / static_cast<double>(episodes);
}

double Evaluation::error_fraction(Category c) const {
  return episodes == 0 ? 0.0 : static_cast<double>(chosen[static_cast<std::size_t>(c)]) / static_cast<double>(episodes);
}

Evaluation evaluate_predictions(const std::vector<std::vector<float>>& preds, const std::vector<Episode>& episodes,
                                const EmbeddingStore& store) {
  if (preds.size() != episodes.size()) {
    throw DimensionError(fmt::format("{} predictions for {} episodes", preds.size(), episodes.size()));
  }
  Evaluation ev;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    validate(e);
    std::vector<std::span<const float>> cands;
    for (const auto& c : e.candidates) cands.push_back(store.at(c.id));
    const auto pick = select_answer(preds[i], cands);
    ++ev.chosen[static_cast<std::size_t>(e.candidates[pick].category)];
    ++ev.episodes;
  }
  return ev;
}

Evaluation evaluate(const Model& model, const std::vector<Episode>& episodes, const EmbeddingStore& store,
                    int batch) {
  NoGradGuard no_grad;
  Evaluation ev;
  for (std::size_t start = 0; start < episodes.size(); start += static_cast<std::size_t>(batch)) {
    const auto end = std::min(episodes.size(), start + static_cast<std::size_t>(batch));
    std::vector<const Episode*> eps;
    for (auto i = start; i < end; ++i) {
      validate(episodes[i]);
      eps.push_back(&episodes[i]);
    }
    const auto b = make_batch(eps, store, false);
    const auto out = model.forward(b.inputs, ForwardMode::kEval);
    const auto d = static_cast<std::size_t>(store.dim());
    for (std::size_t k = 0; k < eps.size(); ++k) {
      std::vector<std::span<const float>> cands;
      for (const auto& c : eps[k]->candidates) cands.push_back(store.at(c.id));
      const std::span<const float> pred(out.pred.data().data() + k * d, d);
      ++ev.chosen[static_cast<std::size_t>(eps[k]->candidates[select_answer(pred, cands)].category)];
      ++ev.episodes;
    }
  }
  return ev;
}

TrainResult train(const TrainConfig& config, std::uint64_t seed, const DataSplit& split, const EmbeddingStore& store,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw ConfigError("training split is empty");
  const auto kind = config.model.kind;
  TrainResult result;
  Model model = Model::build(config.model, seed);
  auto& params = model.parameters();
  auto adam = make_adam_state(params, AdamOptions{config.lr});
  std::mt19937_64 sampler(mix(seed, 0x5a3b1e));

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch);
  const int epochs = config.resolved_epochs();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::mt19937_64 shuffler(mix(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffler);
    EpochLog log{epoch};
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      std::vector<const Episode*> eps;
      for (auto i = start; i < end; ++i) eps.push_back(&split.train[order[i]]);
      const auto b = make_batch(eps, store, true);
      const auto out = model.forward(b.inputs, ForwardMode::kTrain, &sampler);
      LossTerms<float> terms;
      terms.answer = max_margin_loss(out.pred, b.candidates, b.correct);
      if (is_vae(kind)) {
        if (!all_finite(out.mu) || !all_finite(out.logvar)) {
          throw NumericError(fmt::format("non-finite latent code at epoch {}, batch {}", epoch, batches + 1));
        }
        terms.kl = kl_standard_normal(out.mu, out.logvar);
      }
      if (is_dual(kind)) terms.recon = reconstruction_loss(b.inputs, out.recon);
      LossBreakdown parts;
      auto loss = total_loss(terms, config.weights, parts);
      if (!std::isfinite(parts.total)) {
        throw NumericError(fmt::format("non-finite loss at epoch {}, batch {}: answer={} kl={} recon={} total={}",
                                       epoch, batches + 1, parts.answer_loss, parts.kl_loss, parts.recon_loss,
                                       parts.total));
      }
      zero_grads(params);
      loss.backward();
      adam_step(params, adam);
      log.loss += parts.total;
      log.answer += parts.answer_loss;
      log.kl += parts.kl_loss;
      log.recon += parts.recon_loss;
      ++batches;
    }
    log.loss /= batches;
    log.answer /= batches;
    log.kl /= batches;
    log.recon /= batches;
    // Without a dev set the last epoch is kept.
    log.dev_f1 = split.dev.empty() ? 0.0 : evaluate(model, split.dev, store).f1();
    if (split.dev.empty() || log.dev_f1 > result.best_dev_f1) {
      result.best_dev_f1 = log.dev_f1;
      result.best_epoch = epoch;
      result.model = model.cast<float>();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::string system_name(const ModelSpec& spec) {
  std::string name(model_kind_name(spec.kind));
  if (spec.reshape) name += "_" + to_string(*spec.reshape);
  return name;
}

std::string fingerprint(const std::vector<Episode>& episodes) {
  std::string all;
  for (const auto& e : episodes) {
    for (const auto& id : e.context) all += id;
    for (const auto& c : e.candidates) all += c.id + std::string(category_name(c.category));
  }
  return sentence_id(all);
}

void aggregate(RunReport& r) {
  const auto n = static_cast<double>(r.runs.size());
  r.mean_f1 = 0;
  r.mean_chosen.fill(0);
  for (const auto& s : r.runs) {
    r.mean_f1 += s.f1 / n;
    for (std::size_t c = 0; c < s.chosen.size(); ++c) r.mean_chosen[c] += s.chosen[c] / n;
  }
  double ss = 0;
  for (const auto& s : r.runs) ss += (s.f1 - r.mean_f1) * (s.f1 - r.mean_f1);
  r.std_f1 = r.runs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

std::string to_json(const RunReport& r) {
  json runs = json::array();
  auto cats = [](const std::array<double, kCandidateCount>& a) {
    json o = json::object();
    for (const auto c : kAllCategories) o[std::string(category_name(c))] = a[static_cast<std::size_t>(c)];
    return o;
  };
  for (const auto& s : r.runs) {
    runs.push_back({{"seed", s.seed},
                    {"f1", s.f1},
                    {"chosen", cats(s.chosen)},
                    {"best_epoch", s.best_epoch},
                    {"best_dev_f1", s.best_dev_f1}});
  }
  const json j = {{"system", r.system},
                  {"train_type", data_type_name(r.train_type)},
                  {"test_type", data_type_name(r.test_type)},
                  {"test_size", r.test_size},
                  {"test_fingerprint", r.test_fingerprint},
                  {"runs", runs},
                  {"mean_f1", r.mean_f1},
                  {"std_f1", r.std_f1},
                  {"mean_chosen", cats(r.mean_chosen)},
                  {"config", r.config}};
  return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    auto cats = [](const json& o) {
      std::array<double, kCandidateCount> a{};
      for (const auto c : kAllCategories) a[static_cast<std::size_t>(c)] = o.at(std::string(category_name(c)));
      return a;
    };
    RunReport r;
    r.system = j.at("system");
    r.train_type = parse_data_type(j.at("train_type").get<std::string>());
    r.test_type = parse_data_type(j.at("test_type").get<std::string>());
    r.test_size = j.at("test_size");
    r.test_fingerprint = j.at("test_fingerprint");
    for (const auto& s : j.at("runs")) {
      r.runs.push_back({s.at("seed"), s.at("f1"), cats(s.at("chosen")), s.at("best_epoch"), s.at("best_dev_f1")});
    }
    r.mean_f1 = j.at("mean_f1");
    r.std_f1 = j.at("std_f1");
    r.mean_chosen = cats(j.at("mean_chosen"));
    r.config = j.at("config");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed run report: {}", e.what()));
  }
}

std::string tsv_header() {
  return "system\ttrain_type\ttest_type\tseeds\tmean_f1\tstd_f1\tCoord\tWNA\tAE\tWN1\tWN2\n";
}

std::string to_tsv_row(const RunReport& r) {
  std::string row = fmt::format("{}\t{}\t{}\t{}\t{}\t{}", r.system, data_type_name(r.train_type),
                                data_type_name(r.test_type), r.runs.size(), r.mean_f1, r.std_f1);
  for (const auto c : kErrorCategories) row += fmt::format("\t{}", r.error_fraction(c));
  return row + "\n";
}

RunReport multi_run(const TrainConfig& config, const DataSplit& split, const EmbeddingStore& store,
                    const MultiRunOptions& options) {
  config.validate();
  RunReport report;
  report.system = system_name(config.model);
  report.train_type = config.train_type;
  report.test_type = config.test_type;
  report.test_size = split.test.size();
  report.test_fingerprint = fingerprint(split.test);
  report.config = serialize(config);

  auto one = [&](std::uint64_t seed) {
    auto trained = train(config, seed, split, store, options.on_epoch);
    const auto ev = evaluate(trained.model, split.test, store);
    SeedResult s{seed, ev.f1(), {}, trained.best_epoch, trained.best_dev_f1};
    for (const auto c : kAllCategories) s.chosen[static_cast<std::size_t>(c)] = ev.error_fraction(c);
    if (!options.checkpoint_dir.empty()) {
      write_checkpoint(options.checkpoint_dir / fmt::format("{}_seed{}.blmc", report.system, seed), trained.model,
                       fmt::format("seed = {}\n", seed) + report.config);
    }
    return s;
  };

  // Seeds are independent; run as many at once as there are cores.
  const auto workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < config.seeds.size(); start += workers) {
    const auto end = std::min(config.seeds.size(), start + workers);
    if (end - start == 1) {
      report.runs.push_back(one(config.seeds[start]));
      continue;
    }
    std::vector<std::future<SeedResult>> pending;
    for (auto i = start; i < end; ++i) pending.push_back(std::async(std::launch::async, one, config.seeds[i]));
    for (auto& f : pending) report.runs.push_back(f.get());
  }
  aggregate(report);
  return report;
}

std::vector<SweepCell> sweep_reshape(const TrainConfig& config, const DataSource& data,
                                     const MultiRunOptions& options) {
  if (!is_2d(config.model.kind)) {
    throw ConfigError(fmt::format("{} does not use a 2D reshape", model_kind_name(config.model.kind)));
  }
  std::vector<SweepCell> cells;
  for (const auto& [tr, te] : type_pairs(data)) {
    for (const auto shape : kAllowedReshapes) {
      auto c = config;
      c.train_type = static_cast<DataType>(tr);
      c.test_type = static_cast<DataType>(te);
      c.model.reshape = shape;
      cells.push_back({c.train_type, c.test_type, shape, multi_run(c, data.split(c), data.store(), options)});
    }
  }
  return cells;
}

std::string render_sweep(const std::vector<SweepCell>& cells) {
  std::string out = "train\ttest";
  for (const auto shape : kAllowedReshapes) out += "\t" + to_string(shape);
  out += "\n";
  for (std::size_t i = 0; i < cells.size(); i += std::size(kAllowedReshapes)) {
    out += fmt::format("{}\t{}", data_type_name(cells[i].train_type), data_type_name(cells[i].test_type));
    for (std::size_t k = 0; k < std::size(kAllowedReshapes) && i + k < cells.size(); ++k) {
      out += "\t" + cell(cells[i + k].report);
    }
    out += "\n";
  }
  return out;
}

std::vector<CurvePoint> learning_curve(const TrainConfig& config, const DataSource& data,
                                       const std::vector<std::size_t>& sizes, const MultiRunOptions& options) {
  if (sizes.empty()) throw ConfigError("learning curve needs at least one size");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("learning-curve sizes must ascend");
  }
  std::vector<CurvePoint> points;
  for (const auto tr : data.types()) {
    auto base = config;
    base.train_type = tr;
    base.restricted = false;
    const auto full = data.split(base);
    if (sizes.back() > full.pool.size()) {
      throw ConfigError(fmt::format("size {} exceeds the {} Type {} train+dev episodes", sizes.back(),
                                    full.pool.size(), data_type_name(tr)));
    }
    for (const auto n : sizes) {
      auto c = base;
      c.restricted = true;
      c.n_total = n;
      points.push_back({tr, n, multi_run(c, subsample_train(full, n), data.store(), options)});
    }
  }
  return points;
}

std::string render_curve(const std::vector<CurvePoint>& points) {
  std::string out = "train_type\tsize\tmean_f1\tstd_f1\n";
  for (const auto& p : points) {
    out += fmt::format("{}\t{}\t{}\t{}\n", data_type_name(p.train_type), p.size, p.report.mean_f1, p.report.std_f1);
  }
  return out;
}

std::vector<ErrorRow> error_analysis(const std::vector<RunReport>& reports) {
  std::vector<ErrorRow> rows;
  for (const auto& r : reports) {
    if (r.test_fingerprint != reports.front().test_fingerprint) {
      throw ConfigError(fmt::format("{} was evaluated on a different test set than {}", r.system,
                                    reports.front().system));
    }
    ErrorRow row{r.system, r.mean_f1, {}};
    for (std::size_t k = 0; k < std::size(kErrorCategories); ++k) {
      row.percent[k] = 100.0 * r.error_fraction(kErrorCategories[k]);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string render_errors(const std::vector<ErrorRow>& rows) {
  std::string out = "system\tF1\tCoord\tWNA\tAE\tWN1\tWN2\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{:.4f}", r.system, r.f1);
    for (const auto p : r.percent) out += fmt::format("\t{:.2f}", p);
    out += "\n";
  }
  return out;
}

}  // namespace blm
