#pragma once

// Binary checkpoints: magic "MANS", u32 version, then per entry
// u64 name length, name bytes, u64 rank, rank x u64 dims and a float32 payload,
// all little-endian. Entries run to the end of the file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "mans/model.hpp"
#include "mans/params.hpp"

namespace mans {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const NamedTensors<float>& entries);
/// Throws FormatError on a bad magic, an unsupported version or a truncated entry.
NamedTensors<float> read_checkpoint(std::istream& in);

/// Parameters, batch-normalization statistics and "meta.*" architecture scalars.
template <typename T>
void save_model(const std::filesystem::path& path, const MansModel<T>& model);

/// Rebuilds the architecture from the meta entries and copies every tensor.
/// A missing, unexpected or misshapen entry throws FormatError.
template <typename T>
MansModel<T> load_model(const std::filesystem::path& path);

}  // namespace mans
