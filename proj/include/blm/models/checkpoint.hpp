#pragma once

// Checkpoint container (all integers little-endian):
//   "BLMC"  magic
//   u32     version (1)
//   u32     record length, then that many bytes of key=value text holding
//           the model spec followed by any caller-supplied config lines
//   u32     tensor count, then per tensor:
//             u16 name length, name bytes, u32 rank, rank × u64 extents,
//             numel × float32

#include <filesystem>
#include <string>

#include "blm/models/model.hpp"

namespace blm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::string record;  // full embedded text record
};

void write_checkpoint(const std::filesystem::path& path, const Model& model, const std::string& config_record = {});

// FormatError on bad magic/version, truncation, or a tensor table that does
// not match the architecture named in the record.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace blm
