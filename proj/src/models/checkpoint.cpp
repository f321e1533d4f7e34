#include "blm/models/checkpoint.hpp"

#include "blm/error.hpp"
#include "blm/io/binary.hpp"

namespace blm {

void write_checkpoint(const std::filesystem::path& path, const Model& model, const std::string& config_record) {
  io::ByteWriter w;
  w.bytes("BLMC");
  w.u32(kCheckpointVersion);
  const std::string record = serialize(model.spec()) + config_record;
  w.u32(static_cast<std::uint32_t>(record.size()));
  w.bytes(record);
  const auto& params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (const auto extent : p.tensor.shape()) w.u64(static_cast<std::uint64_t>(extent));
    for (const float v : p.tensor.data()) w.f32(v);
  }
  io::write_file(path, w.buffer());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  io::ByteReader r(data, path.string());
  if (r.bytes(4) != "BLMC") throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck{Model{}, r.bytes(r.u32())};
  ModelSpec spec;
  try {
    spec = parse_model_spec(ck.record);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": invalid model record: " + e.what());
  }
  ck.model = Model::build(spec, 0);
  auto& params = ck.model.parameters();
  const auto count = r.u32();
  if (count != params.size()) {
    throw FormatError(path.string() + ": " + std::to_string(count) + " tensors, architecture has " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = r.bytes(r.u16());
    if (name != p.name) throw FormatError(path.string() + ": expected tensor '" + p.name + "', found '" + name + "'");
    Shape shape(r.u32());
    for (auto& extent : shape) extent = static_cast<std::int64_t>(r.u64());
    if (shape != p.tensor.shape()) {
      throw FormatError(path.string() + ": tensor '" + name + "' has shape " + to_string(shape) + ", expected " +
                        to_string(p.tensor.shape()));
    }
    for (auto& v : p.tensor.data()) v = r.f32();
  }
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes after tensor table");
  return ck;
}

}  // namespace blm
