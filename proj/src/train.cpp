// SPDX-License-Identifier: Apache-2.0
#include "agff/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "agff/errors.hpp"
#include "agff/optim.hpp"

namespace agff {

// ---------------------------------------------------------------------------
// FeatureSpace

TokenSequence FeatureSpace::tokenize(std::string_view raw) const {
  if (strip_newsgroup_noise) return normalize_and_tokenize(agff::strip_newsgroup_noise(raw));
  return normalize_and_tokenize(raw);
}

FeatureSpace FeatureSpace::fit(const Dataset& train, StopList stoplist,
                               const FeatureOptions& options) {
  FeatureSpace fs;
  fs.strip_newsgroup_noise = options.strip_newsgroup_noise;
  fs.max_seq_len = options.max_seq_len;
  fs.stoplist = std::move(stoplist);

  std::vector<TokenSequence> tokens;
  std::vector<TokenSequence> stat_tokens;
  tokens.reserve(train.size());
  stat_tokens.reserve(train.size());
  for (const Document& d : train.documents) {
    tokens.push_back(fs.tokenize(d.text));
    stat_tokens.push_back(remove_stopwords(tokens.back(), fs.stoplist));
  }
  fs.semantic = SemanticVocab::build(tokens, options.min_token_count, options.max_semantic_vocab);
  fs.tfidf = build_tfidf_vocab(stat_tokens, options.max_terms);
  return fs;
}

EncodedDocument FeatureSpace::encode(std::string_view raw, std::size_t label) const {
  const TokenSequence tokens = tokenize(raw);
  EncodedDocument doc;
  doc.token_ids = semantic.encode(tokens, max_seq_len);
  doc.tfidf = compute_tfidf(remove_stopwords(tokens, stoplist), tfidf);
  doc.label = label;
  return doc;
}

std::vector<EncodedDocument> FeatureSpace::encode_all(const Dataset& dataset) const {
  std::vector<EncodedDocument> out;
  out.reserve(dataset.size());
  for (const Document& d : dataset.documents) out.push_back(encode(d.text, d.label));
  return out;
}

nlohmann::json FeatureSpace::to_json() const {
  return {{"strip_newsgroup_noise", strip_newsgroup_noise},
          {"max_seq_len", max_seq_len},
          {"stopwords", stoplist.words()},
          {"stopword_fingerprint", stoplist.fingerprint()},
          {"semantic_vocab", semantic.terms()},
          {"tfidf_vocab", tfidf.to_json()}};
}

FeatureSpace FeatureSpace::from_json(const nlohmann::json& j) {
  try {
    FeatureSpace fs;
    fs.strip_newsgroup_noise = j.at("strip_newsgroup_noise").get<bool>();
    fs.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    fs.stoplist = StopList(j.at("stopwords").get<std::vector<std::string>>());
    if (fs.stoplist.fingerprint() != j.at("stopword_fingerprint").get<std::uint64_t>()) {
      throw FormatError("stopword list does not match its fingerprint");
    }
    fs.semantic = SemanticVocab(j.at("semantic_vocab").get<std::vector<std::string>>());
    fs.tfidf = TfidfVocabulary::from_json(j.at("tfidf_vocab"));
    return fs;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("feature space: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Config and metrics

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("train config: learning rate must be positive");
  if (batch_size == 0) throw ContractError("train config: batch size must be at least 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ContractError("train config: validation fraction must lie in (0, 1)");
  }
  model.validate();
}

nlohmann::json metrics_to_json(const EpochMetrics& m, bool include_timing) {
  nlohmann::json j = {{"epoch", m.epoch},
                      {"train_loss", m.train_loss},
                      {"train_accuracy", m.train_accuracy},
                      {"val_accuracy", m.val_accuracy ? nlohmann::json(*m.val_accuracy)
                                                      : nlohmann::json(nullptr)},
                      {"optimizer_steps", m.optimizer_steps}};
  if (include_timing) j["seconds"] = m.seconds;
  return j;
}

EarlyStopDecision early_stop_check(std::span<const double> val_history, std::size_t patience) {
  EarlyStopDecision d;
  if (val_history.empty()) return d;
  double best = val_history[0];
  std::size_t stale = 0;
  for (std::size_t i = 1; i < val_history.size(); ++i) {
    if (val_history[i] > best + 1e-6) {
      best = val_history[i];
      d.best_epoch = i;
      stale = 0;
    } else {
      ++stale;
    }
  }
  d.stop = patience > 0 && stale >= patience;
  return d;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void check_trainable(std::span<const EncodedDocument> docs, std::size_t num_classes) {
  std::set<std::size_t> labels;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].token_ids.empty()) {
      throw TrainError("training document " + std::to_string(i) +
                       " is empty after preprocessing");
    }
    if (docs[i].label >= num_classes) {
      throw TrainError("training document " + std::to_string(i) + " has label " +
                       std::to_string(docs[i].label) + " outside " +
                       std::to_string(num_classes) + " classes");
    }
    labels.insert(docs[i].label);
  }
  if (labels.size() < 2) {
    throw TrainError("training needs documents from at least 2 classes, found " +
                     std::to_string(labels.size()));
  }
}

}  // namespace

TrainResult train(std::span<const EncodedDocument> train_docs,
                  std::span<const EncodedDocument> val_docs, const TrainConfig& config,
                  const EmbeddingTable* pretrained, const EpochCallback& on_epoch) {
  config.validate();
  check_trainable(train_docs, config.model.num_classes);

  const Rng root(config.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);
  Rng dropout_rng = root.fork(3);

  TrainResult result;
  ModelParams params = init_params(config.model, init_rng, pretrained);
  const std::vector<Parameter*> trainable = params.all();
  Adam adam;

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> val_history;
  std::optional<ModelParams> best;
  double best_val = -1.0;
  ForwardOptions fwd{.training = true, .rng = &dropout_rng, .gate_override = config.gate_override};

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      params.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const EncodedDocument& doc = train_docs[order[k]];
        Tape tape;
        const ParamVars pv = bind_params(tape, params);
        const ModelGraph graph = build_forward(tape, pv, params.config, doc, fwd);
        const CrossEntropy ce = softmax_cross_entropy(graph.logits, doc.label);
        const double loss = ce.loss.value()[0];
        if (!std::isfinite(loss)) {
          throw NumericalError("non-finite loss in epoch " + std::to_string(epoch));
        }
        tape.backward(ce.loss);
        loss_sum += loss;
        if (argmax(ce.probs.values()) == doc.label) ++correct;
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (Parameter* p : trainable) {
        for (double& g : p->grad.values()) g *= inv;
      }
      adam.step(trainable, config.lr);
      ++steps;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_docs.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_docs.size());
    m.optimizer_steps = steps;

    bool stop = false;
    if (!val_docs.empty()) {
      const double acc = evaluate(params, val_docs).accuracy;
      m.val_accuracy = acc;
      val_history.push_back(acc);
      if (!best || acc > best_val + 1e-6) {
        best_val = acc;
        best = params;
        result.best_epoch = epoch;
      }
      stop = early_stop_check(val_history, config.patience).stop;
    } else {
      result.best_epoch = epoch;
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (stop) break;
  }

  result.params = best ? std::move(*best) : std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate(const ModelParams& params, std::span<const EncodedDocument> docs) {
  const std::size_t c = params.config.num_classes;
  EvalReport r;
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (const EncodedDocument& doc : docs) {
    if (doc.label >= c) {
      throw IndexError("evaluate: label " + std::to_string(doc.label) + " outside " +
                       std::to_string(c) + " classes");
    }
    const ForwardTrace trace = forward(params, doc);
    ++r.confusion[doc.label][argmax(trace.probs)];
  }
  r.total = docs.size();
  std::size_t hits = 0;
  r.precision.assign(c, 0.0);
  r.recall.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    hits += r.confusion[k][k];
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += r.confusion[k][j];
      col += r.confusion[j][k];
    }
    if (col) r.precision[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(col);
    if (row) r.recall[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(row);
  }
  r.accuracy = r.total ? static_cast<double>(hits) / static_cast<double>(r.total) : 0.0;
  return r;
}

nlohmann::json EvalReport::to_json(const std::vector<std::string>& label_names) const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < confusion.size(); ++k) {
    classes.push_back({{"label", k < label_names.size() ? label_names[k] : std::to_string(k)},
                       {"precision", precision[k]},
                       {"recall", recall[k]}});
  }
  return {{"accuracy", accuracy}, {"total", total}, {"classes", classes},
          {"confusion", confusion}};
}

// ---------------------------------------------------------------------------

FitResult fit(const Dataset& dataset, TrainConfig config, const FitOptions& options,
              const EpochCallback& on_epoch) {
  dataset.validate();
  if (dataset.num_classes() < 2) throw TrainError("training needs at least 2 classes");
  auto [train_part, val_part] = stratified_split(dataset, config.val_fraction, config.seed);

  FitResult out;
  out.label_names = dataset.label_names;
  out.features = FeatureSpace::fit(train_part, options.stoplist, options.features);

  config.model.vocab_size_semantic = out.features.semantic.size();
  config.model.tfidf_dim = out.features.tfidf.size();
  config.model.num_classes = dataset.num_classes();
  config.model.max_seq_len = options.features.max_seq_len;

  std::optional<EmbeddingTable> pretrained;
  if (options.embeddings) {
    pretrained = load_embedding_text(*options.embeddings, out.features.semantic.index(),
                                     config.model.embed_dim);
  }
  const auto train_docs = out.features.encode_all(train_part);
  const auto val_docs = out.features.encode_all(val_part);
  out.result = train(train_docs, val_docs, config, pretrained ? &*pretrained : nullptr, on_epoch);
  return out;
}

}  // namespace agff
