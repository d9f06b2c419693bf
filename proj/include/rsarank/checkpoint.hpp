#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   magic     8 bytes  "RSARANK\0"
//   version   u32      kCheckpointVersion
//   n_meta    u32      then n_meta x (string key, string value)
//   n_params  u32      then n_params x (string name, u32 ndim, u64 dims[ndim], f64 data[])
//
// Strings are u32 length + bytes. Model structure is rebuilt from the
// metadata and every parameter must match it by name and shape.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "rsarank/model.hpp"

namespace rsarank {

inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'A', 'R', 'A', 'N', 'K', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

struct Checkpoint {
  RsaModel model;
  Metadata metadata;  // model config plus caller extras (e.g. normalization)
};

void write_checkpoint(std::ostream& out, const RsaModel& model, const Metadata& extra = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const RsaModel& model, const std::filesystem::path& path,
                     const Metadata& extra = {});
RsaModel load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint_with_metadata(const std::filesystem::path& path);

}  // namespace rsarank
