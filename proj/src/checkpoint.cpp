// SPDX-License-Identifier: Apache-2.0
#include "agff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "agff/errors.hpp"

namespace agff {

namespace {

constexpr std::string_view kMagic = "AGFF";
constexpr std::size_t kHeaderSize = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

nlohmann::json tensor_table(const ModelParams& params) {
  nlohmann::json table = nlohmann::json::array();
  for (const Parameter* p : params.all()) {
    table.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  return table;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const CheckpointMeta& meta) {
  const nlohmann::json j = {{"config", params.config.to_json()},
                            {"label_names", meta.label_names},
                            {"tokenizer", std::string(kTokenizerId)},
                            {"features", meta.features.to_json()},
                            {"tensors", tensor_table(params)}};
  const std::string meta_bytes = j.dump();

  std::string out;
  out.append(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, meta_bytes.size());
  out.append(meta_bytes);
  for (const Parameter* p : params.all()) {
    for (double v : p->value.values()) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kHeaderSize) {
    throw FormatError("checkpoint truncated: " + std::to_string(bytes.size()) +
                      " bytes is shorter than the header");
  }
  if (bytes.substr(0, 4) != kMagic) throw FormatError("not a checkpoint: bad magic");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version) +
                       " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t meta_len = get_le(bytes, 8, 8);
  if (meta_len > bytes.size() - kHeaderSize) {
    throw FormatError("checkpoint truncated inside metadata");
  }

  Checkpoint ck;
  std::vector<std::pair<std::string, Shape>> declared;
  try {
    const auto j = nlohmann::json::parse(bytes.substr(kHeaderSize, meta_len));
    for (const auto& entry : j.at("tensors")) {
      declared.emplace_back(entry.at("name").get<std::string>(), entry.at("shape").get<Shape>());
    }
    ck.params.config = ModelConfig::from_json(j.at("config"));
    ck.meta.label_names = j.at("label_names").get<std::vector<std::string>>();
    if (j.at("tokenizer").get<std::string>() != kTokenizerId) {
      throw FormatError("checkpoint uses unknown tokenizer '" +
                        j.at("tokenizer").get<std::string>() + "'");
    }
    ck.meta.features = FeatureSpace::from_json(j.at("features"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  try {
    ck.params.config.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  if (ck.params.config.vocab_size_semantic != ck.meta.features.semantic.size() ||
      ck.params.config.tfidf_dim != ck.meta.features.tfidf.size()) {
    throw FormatError("checkpoint config disagrees with its vocabularies");
  }
  if (ck.meta.label_names.size() != ck.params.config.num_classes) {
    throw FormatError("checkpoint has " + std::to_string(ck.meta.label_names.size()) +
                      " label names for " + std::to_string(ck.params.config.num_classes) +
                      " classes");
  }

  const auto shapes = ModelParams::shapes_for(ck.params.config);
  std::size_t expected = 0;
  for (const Shape& s : shapes) expected += shape_size(s) * 4;
  const std::size_t actual = bytes.size() - kHeaderSize - meta_len;
  if (actual != expected) {
    throw FormatError("checkpoint payload has " + std::to_string(actual) + " bytes, expected " +
                      std::to_string(expected));
  }

  std::vector<Parameter*> fields = ck.params.all();
  if (declared.size() != fields.size()) throw FormatError("checkpoint tensor table mismatch");
  std::size_t offset = kHeaderSize + meta_len;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& [name, shape] = declared[i];
    if (shape != shapes[i]) {
      throw FormatError("checkpoint tensor " + name + " has shape " + shape_string(shape) +
                        ", config implies " + shape_string(shapes[i]));
    }
    Tensor t(shapes[i]);
    for (double& v : t.values()) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4)));
      offset += 4;
    }
    if (!t.all_finite()) throw FormatError("checkpoint tensor holds non-finite values");
    *fields[i] = Parameter(name, std::move(t));
  }
  return ck;
}

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(params, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace agff
