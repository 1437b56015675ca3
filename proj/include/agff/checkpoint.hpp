// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout (all integers little-endian):
//
//   offset 0   4 bytes   magic "AGFF"
//   offset 4   u32       format version (kCheckpointVersion)
//   offset 8   u64       metadata length L
//   offset 16  L bytes   metadata, UTF-8 JSON
//   then       payload   every ModelParams tensor in field order, row-major,
//                        as IEEE-754 binary32
//
// The metadata holds the model config, label names, the feature space
// (tokenizer id, stop words and their fingerprint, both vocabularies) and
// the name and shape of every tensor.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "agff/model.hpp"
#include "agff/train.hpp"

namespace agff {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kTokenizerId = "alnum-lower-v1";

struct CheckpointMeta {
  std::vector<std::string> label_names;
  FeatureSpace features;
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

std::string encode_checkpoint(const ModelParams& params, const CheckpointMeta& meta);
/// Throws FormatError on bad magic, malformed metadata or a payload whose
/// length differs from the declared tensors; VersionError on an unknown
/// version.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace agff
