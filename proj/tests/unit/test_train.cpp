#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "agff/errors.hpp"
#include "agff/train.hpp"

using namespace agff;
using namespace agff::testing;

namespace {

TrainConfig small_config(FusionMode mode = FusionMode::gated) {
  TrainConfig t;
  t.model.embed_dim = 8;
  t.model.hidden_per_dir = 8;
  t.model.fusion_mode = mode;
  t.batch_size = 8;
  t.max_epochs = 3;
  t.lr = 0.01;
  t.seed = 5;
  return t;
}

std::string history_bytes(const TrainResult& r) {
  std::string out;
  for (const auto& m : r.history) out += metrics_to_json(m).dump() + "\n";
  return out;
}

}  // namespace

TEST_CASE("early stopping") {
  const std::vector<double> falling = {0.80, 0.79, 0.78};
  auto d = early_stop_check(falling, 2);
  CHECK(d.stop);
  CHECK(d.best_epoch == 0);
  CHECK_FALSE(early_stop_check(std::span(falling).first(2), 2).stop);

  const std::vector<double> rising = {0.1, 0.2, 0.3, 0.4, 0.5};
  for (std::size_t n = 1; n <= rising.size(); ++n) {
    CHECK_FALSE(early_stop_check(std::span(rising).first(n), 1).stop);
  }
  const std::vector<double> flat = {0.8, 0.8};
  CHECK(early_stop_check(flat, 1).stop);
  CHECK(early_stop_check(flat, 1).best_epoch == 0);
  CHECK_FALSE(early_stop_check(falling, 0).stop);
}

TEST_CASE("feature space fits on training text only") {
  const Dataset ds = keyword_corpus(4, 2, 1);
  FeatureOptions opts;
  opts.min_token_count = 1;
  const FeatureSpace fs = FeatureSpace::fit(ds, StopList::english(), opts);
  CHECK(fs.tfidf.index_of("kw0x0").has_value());
  CHECK_FALSE(fs.tfidf.index_of("the").has_value());
  const EncodedDocument doc = fs.encode("Today kw1x0 unseenword", 1);
  CHECK(doc.token_ids.size() == 3);
  CHECK(doc.token_ids[0] != fs.semantic.unk_id());  // known word
  CHECK(doc.token_ids[2] == fs.semantic.unk_id());
  CHECK(std::abs(doc.tfidf.norm() - 1.0) <= 1e-12);
  CHECK(doc.label == 1);

  const FeatureSpace back = FeatureSpace::from_json(fs.to_json());
  CHECK(back.semantic == fs.semantic);
  CHECK(back.tfidf == fs.tfidf);
  CHECK(back.stoplist.words() == fs.stoplist.words());
  auto tampered = fs.to_json();
  tampered["stopword_fingerprint"] = 1;
  CHECK_THROWS_AS(FeatureSpace::from_json(tampered), FormatError);
}

TEST_CASE("training rejects bad inputs") {
  const Dataset ds = keyword_corpus(4, 2, 2);
  FeatureOptions opts;
  opts.min_token_count = 1;
  const FeatureSpace fs = FeatureSpace::fit(ds, StopList::english(), opts);
  auto docs = fs.encode_all(ds);
  TrainConfig t = small_config();
  t.model.vocab_size_semantic = fs.semantic.size();
  t.model.tfidf_dim = fs.tfidf.size();

  auto one_class = docs;
  for (auto& d : one_class) d.label = 0;
  CHECK_THROWS_AS(train(one_class, {}, t), TrainError);
  auto with_empty = docs;
  with_empty[0].token_ids.clear();
  CHECK_THROWS_AS(train(with_empty, {}, t), TrainError);
  t.lr = 0.0;
  CHECK_THROWS_AS(train(docs, {}, t), ContractError);
}

TEST_CASE("one optimizer step per epoch when the batch covers the data") {
  const Dataset ds = keyword_corpus(3, 2, 3);
  TrainConfig t = small_config();
  t.batch_size = 1000;
  t.patience = 0;
  FitOptions fo;
  fo.features.min_token_count = 1;
  const FitResult r = fit(ds, t, fo);
  REQUIRE(r.result.history.size() == 3);
  for (const auto& m : r.result.history) CHECK(m.optimizer_steps == 1);
}

TEST_CASE("training is deterministic") {
  const Dataset ds = keyword_corpus(6, 3, 4);
  FitOptions fo;
  fo.features.min_token_count = 1;
  for (FusionMode mode : {FusionMode::gated, FusionMode::concat}) {
    const FitResult a = fit(ds, small_config(mode), fo);
    const FitResult b = fit(ds, small_config(mode), fo);
    CHECK(history_bytes(a.result) == history_bytes(b.result));
    CHECK(a.result.params.out_w.value == b.result.params.out_w.value);
  }
  const auto j = metrics_to_json(EpochMetrics{1, 0.5, 0.25, std::nullopt, 3.0, 2});
  CHECK(j["val_accuracy"].is_null());
  CHECK_FALSE(j.contains("seconds"));
  CHECK(metrics_to_json(EpochMetrics{}, true).contains("seconds"));
}

TEST_CASE("first-epoch loss starts near ln C and falls") {
  const Dataset ds = keyword_corpus(8, 4, 6);
  TrainConfig t = small_config();
  t.max_epochs = 10;
  t.patience = 0;
  FitOptions fo;
  fo.features.min_token_count = 1;
  const FitResult r = fit(ds, t, fo);
  CHECK(r.result.history.front().train_loss < std::log(4.0) + 0.05);
  CHECK(r.result.history.back().train_loss < r.result.history.front().train_loss);
}

TEST_CASE("evaluation report") {
  const Dataset ds = keyword_corpus(5, 3, 7);
  FitOptions fo;
  fo.features.min_token_count = 1;
  TrainConfig t = small_config();
  const FitResult r = fit(ds, t, fo);
  const auto docs = r.features.encode_all(ds);
  const EvalReport rep = evaluate(r.result.params, docs);
  CHECK(rep.total == docs.size());
  const auto counts = ds.class_counts();
  std::size_t diag = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < 3; ++j) row += rep.confusion[k][j];
    CHECK(row == counts[k]);
    diag += rep.confusion[k][k];
  }
  CHECK(rep.accuracy == doctest::Approx(static_cast<double>(diag) / docs.size()));
  const auto json = rep.to_json(ds.label_names);
  CHECK(json["classes"].size() == 3);
  CHECK(json["classes"][0]["label"] == "class0");
}

TEST_CASE("perfect predictions give a diagonal confusion matrix") {
  Rng rng(8);
  ModelConfig c;
  c.vocab_size_semantic = 5;
  c.embed_dim = 2;
  c.hidden_per_dir = 2;
  c.tfidf_dim = 3;
  c.num_classes = 2;
  ModelParams p = init_params(c, rng);
  p.out_w.value.fill(0.0);
  p.out_b.value = Tensor::vector({1.0, 0.0});  // always predicts class 0
  std::vector<EncodedDocument> docs(4);
  for (auto& d : docs) {
    d.token_ids = {1, 2};
    d.tfidf.dim = 3;
  }
  const EvalReport rep = evaluate(p, docs);
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.confusion == std::vector<std::vector<std::size_t>>{{4, 0}, {0, 0}});
  CHECK(rep.precision[0] == 1.0);
  CHECK(rep.recall[1] == 0.0);
}
