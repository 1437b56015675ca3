#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/oracles.hpp"
#include "agff/checkpoint.hpp"
#include "agff/errors.hpp"
#include "agff/inspect.hpp"

using namespace agff;
using namespace agff::testing;

namespace {

Checkpoint sample(FusionMode mode = FusionMode::gated) {
  const Dataset ds = keyword_corpus(3, 3, 1);
  FeatureOptions opts;
  opts.min_token_count = 1;
  Checkpoint ck;
  ck.meta.features = FeatureSpace::fit(ds, StopList::english(), opts);
  ck.meta.label_names = ds.label_names;
  ModelConfig c;
  c.vocab_size_semantic = ck.meta.features.semantic.size();
  c.tfidf_dim = ck.meta.features.tfidf.size();
  c.embed_dim = 4;
  c.hidden_per_dir = 3;
  c.num_classes = 3;
  c.fusion_mode = mode;
  Rng rng(2);
  ck.params = init_params(c, rng);
  jitter(ck.params, rng);
  return ck;
}

}  // namespace

TEST_CASE("checkpoint roundtrip is exact at single precision") {
  const Checkpoint ck = sample();
  const std::string bytes = encode_checkpoint(ck.params, ck.meta);
  CHECK(bytes.substr(0, 4) == "AGFF");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.params.config == ck.params.config);
  CHECK(back.meta.label_names == ck.meta.label_names);
  CHECK(back.meta.features.tfidf == ck.meta.features.tfidf);
  CHECK(back.meta.features.semantic == ck.meta.features.semantic);
  const auto a = ck.params.all();
  const auto b = back.params.all();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i]->name == a[i]->name);
    for (std::size_t j = 0; j < a[i]->value.size(); ++j) {
      CHECK(b[i]->value[j] == static_cast<double>(static_cast<float>(a[i]->value[j])));
    }
  }
  CHECK(encode_checkpoint(back.params, back.meta) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "agff_ck_test.agff";
  save_checkpoint(ck.params, ck.meta, path);
  CHECK(encode_checkpoint(load_checkpoint(path).params, ck.meta) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("checkpoint corruption") {
  const Checkpoint ck = sample();
  const std::string bytes = encode_checkpoint(ck.params, ck.meta);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), FormatError);

  std::string version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(decode_checkpoint(version), VersionError);

  const std::string shorter = bytes.substr(0, bytes.size() - 4);
  try {
    decode_checkpoint(shorter);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("expected") != std::string::npos);
    std::uint64_t meta_len = 0;
    for (int i = 0; i < 8; ++i) meta_len |= std::uint64_t(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    const std::size_t expected = bytes.size() - 16 - meta_len;
    CHECK(what.find(std::to_string(expected - 4) + " bytes") != std::string::npos);
    CHECK(what.find(std::to_string(expected)) != std::string::npos);
  }
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 10)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 40)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "xxxx"), FormatError);
}

TEST_CASE("gate summary") {
  Checkpoint ck = sample();
  const Dataset ds = keyword_corpus(3, 3, 1);
  auto docs = ck.meta.features.encode_all(ds);
  for (Parameter* q : {&ck.params.gate_w_h, &ck.params.gate_w_s, &ck.params.gate_b}) q->value.fill(0.0);
  const GateReport half = gate_summary(ck.params, docs);
  CHECK(half.global_mean == 0.5);
  for (const auto& m : half.class_mean) CHECK(*m == 0.5);
  for (const auto& h : half.class_histogram) CHECK(h[5] == 3);

  Checkpoint trained = sample();
  EncodedDocument empty;
  empty.tfidf.dim = trained.params.config.tfidf_dim;
  docs.push_back(empty);
  const GateReport r = gate_summary(trained.params, docs);
  CHECK(r.documents == docs.size() - 1);
  CHECK(r.skipped_empty == 1);
  std::size_t total = 0;
  for (const auto& h : r.class_histogram) {
    for (std::size_t n : h) total += n;
  }
  CHECK(total == r.documents);
  CHECK(r.global_mean > 0.0);
  CHECK(r.global_mean < 1.0);
  CHECK(gate_summary(trained.params, docs).to_json(ds.label_names) == r.to_json(ds.label_names));

  CHECK_THROWS_AS(gate_summary(sample(FusionMode::semantic_only).params, docs), ModeError);
}

TEST_CASE("attention top-k") {
  ForwardTrace t;
  t.alpha = {0.7, 0.2, 0.1};
  const TokenSequence tokens = {"x", "y", "z"};
  const auto top1 = attention_topk(t, tokens, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0] == std::pair<std::string, double>{"x", 0.7});
  CHECK(attention_topk(t, tokens, 10).size() == 3);
  t.alpha = {0.25, 0.25, 0.25, 0.25};
  const auto tied = attention_topk(t, {"a", "b", "c", "d"}, 2);
  CHECK(tied[0].first == "a");
  CHECK(tied[1].first == "b");
}
