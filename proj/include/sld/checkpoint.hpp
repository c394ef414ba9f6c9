#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sld/diffusion.hpp"
#include "sld/param_store.hpp"
#include "sld/vocab.hpp"

namespace sld {

// Binary layout (little-endian throughout):
//   magic "SLD1", version u16, config fingerprint u64,
//   vocab dump (u32 count, then u32 length + bytes per token),
//   parameter manifest (u32 count; per entry u32 path length + bytes,
//     u8 frozen, u32 ndim, u32 dims...),
//   parameter data as f32 in manifest order,
//   standardizer (u8 flag; u32 dims, f32 means, f32 stds),
//   schedule (u8 flag; u32 T, f32 beta_min, f32 beta_max).
struct CheckpointExtras {
  std::optional<Standardizer> standardizer;
  std::optional<NoiseSchedule> schedule;
};

void save_checkpoint(const std::string& path, const ParamStore& params, const Vocab& vocab,
                     uint64_t config_fingerprint, const CheckpointExtras& extras);

struct LoadedCheckpoint {
  uint16_t version = 0;
  uint64_t config_fingerprint = 0;
  Vocab vocab;
  struct Entry {
    std::string path;
    bool frozen = false;
    Shape shape;
    std::vector<float> data;
  };
  std::vector<Entry> entries;
  CheckpointExtras extras;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

// Copies loaded values into an already-built store. The manifest must match
// the store's paths and shapes exactly, in order.
void apply_checkpoint(const LoadedCheckpoint& ckpt, ParamStore& params);

// Fingerprint guard shared by every command that loads a checkpoint.
void require_fingerprint(const LoadedCheckpoint& ckpt, uint64_t expected, bool force,
                         const std::string& what);

}  // namespace sld
