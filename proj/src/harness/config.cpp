#include "blm/harness/config.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "blm/error.hpp"
#include "blm/io/binary.hpp"

namespace blm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view text, std::string_view key) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  return v;
}

bool parse_bool(std::string_view text, std::string_view key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

}  // namespace

int default_epochs(DataType train_type, bool restricted) {
  return train_type == DataType::kI || restricted ? 120 : 50;
}

int TrainConfig::resolved_epochs() const { return epochs > 0 ? epochs : default_epochs(train_type, restricted); }

void TrainConfig::validate() const {
  blm::validate(model);
  if (!(lr > 0)) throw ConfigError(fmt::format("lr must be positive, got {}", lr));
  if (batch < 1) throw ConfigError(fmt::format("batch must be at least 1, got {}", batch));
  if (epochs < 0) throw ConfigError(fmt::format("epochs must be positive or auto, got {}", epochs));
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (weights.alpha < 0 || weights.beta < 0) throw ConfigError("alpha and beta must be non-negative");
  if (restricted && n_total == 0) throw ConfigError("n_total must be positive for restricted runs");
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    const auto item = trim(text.substr(start, comma - start));
    if (item.empty()) throw ConfigError(fmt::format("seed list '{}' has an empty entry", text));
    seeds.push_back(parse_number<std::uint64_t>(item, "seeds"));
    start = comma + 1;
  }
  return seeds;
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig c;
  bool have_reshape = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "model") {
        c.model.kind = parse_model_kind(value);
      } else if (key == "reshape") {
        c.model.reshape = parse_reshape(value);
        have_reshape = true;
      } else if (key == "custom_reshape") {
        c.model.custom_reshape = parse_bool(value, key);
      } else if (key == "latent") {
        c.model.latent = parse_number<int>(value, key);
      } else if (key == "lr") {
        c.lr = parse_number<double>(value, key);
      } else if (key == "batch") {
        c.batch = parse_number<int>(value, key);
      } else if (key == "epochs") {
        c.epochs = value == "auto" ? 0 : parse_number<int>(value, key);
      } else if (key == "alpha") {
        c.weights.alpha = parse_number<double>(value, key);
      } else if (key == "beta") {
        c.weights.beta = parse_number<double>(value, key);
      } else if (key == "seeds") {
        c.seeds = parse_seed_list(value);
      } else if (key == "train_type") {
        c.train_type = parse_data_type(value);
      } else if (key == "test_type") {
        c.test_type = parse_data_type(value);
      } else if (key == "restricted") {
        c.restricted = parse_bool(value, key);
      } else if (key == "n_total") {
        c.n_total = parse_number<std::size_t>(value, key);
      } else if (key == "split_seed") {
        c.split_seed = parse_number<std::uint64_t>(value, key);
      } else if (key == "checkpoint") {
        c.checkpoint = value;
      } else if (key == "report") {
        c.report = value;
      } else {
        throw ConfigError(fmt::format("unknown key '{}'", key));
      }
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  if (is_2d(c.model.kind) && !have_reshape) c.model.reshape = Reshape{48, 16};
  if (!is_2d(c.model.kind)) c.model.reshape.reset();
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string serialize(const TrainConfig& c) {
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
  std::string out;
  out += fmt::format("model = {}\n", model_kind_name(c.model.kind));
  if (c.model.reshape) out += fmt::format("reshape = {}\n", to_string(*c.model.reshape));
  if (c.model.custom_reshape) out += "custom_reshape = true\n";
  out += fmt::format("latent = {}\n", c.model.latent);
  out += fmt::format("lr = {}\nbatch = {}\n", c.lr, c.batch);
  out += c.epochs > 0 ? fmt::format("epochs = {}\n", c.epochs) : std::string("epochs = auto\n");
  out += fmt::format("alpha = {}\nbeta = {}\nseeds = {}\n", c.weights.alpha, c.weights.beta, seeds);
  out += fmt::format("train_type = {}\ntest_type = {}\n", data_type_name(c.train_type), data_type_name(c.test_type));
  out += fmt::format("restricted = {}\nn_total = {}\nsplit_seed = {}\n", c.restricted, c.n_total, c.split_seed);
  if (!c.checkpoint.empty()) out += fmt::format("checkpoint = {}\n", c.checkpoint);
  if (!c.report.empty()) out += fmt::format("report = {}\n", c.report);
  return out;
}

}  // namespace blm
