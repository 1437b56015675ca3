// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agff/corpus.hpp"
#include "agff/model.hpp"
#include "agff/text.hpp"
#include "agff/tfidf.hpp"

namespace agff {

struct FeatureOptions {
  /// Drop newsgroup headers and quoted replies before tokenizing.
  bool strip_newsgroup_noise = false;
  std::size_t max_terms = 5000;
  /// Semantic vocabulary: minimum training-set frequency and size cap.
  std::size_t min_token_count = 2;
  std::size_t max_semantic_vocab = 50000;
  std::size_t max_seq_len = 400;
};

/// Everything needed to turn raw text into an EncodedDocument. Fitted on
/// the training portion only; validation and test text reuse it frozen.
struct FeatureSpace {
  bool strip_newsgroup_noise = false;
  std::size_t max_seq_len = 400;
  StopList stoplist;
  SemanticVocab semantic;
  TfidfVocabulary tfidf;

  static FeatureSpace fit(const Dataset& train, StopList stoplist, const FeatureOptions& options);

  /// Full token list (before truncation and stop-word removal).
  TokenSequence tokenize(std::string_view raw) const;
  EncodedDocument encode(std::string_view raw, std::size_t label = 0) const;
  std::vector<EncodedDocument> encode_all(const Dataset& dataset) const;

  nlohmann::json to_json() const;
  static FeatureSpace from_json(const nlohmann::json& j);
};

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 10;
  double val_fraction = 0.1;
  /// Epochs without improvement before stopping; 0 disables early stopping.
  std::size_t patience = 2;
  std::uint64_t seed = 0;
  ModelConfig model;
  /// Forces the gate to a constant during training (test hook).
  std::optional<double> gate_override;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  /// Accuracy of the training-mode predictions made during the epoch.
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
  double seconds = 0.0;
  std::size_t optimizer_steps = 0;
};

/// One JSON object per epoch. Wall-clock time is left out unless
/// `include_timing`, so metrics files from identical runs are byte-identical.
nlohmann::json metrics_to_json(const EpochMetrics& m, bool include_timing = false);

struct EarlyStopDecision {
  bool stop = false;
  std::size_t best_epoch = 0;  ///< 0-based index into the history
};

/// Stops once `patience` consecutive epochs fail to beat the best accuracy
/// so far by more than 1e-6. Best epoch is the first reaching the maximum.
/// `patience == 0` never stops.
EarlyStopDecision early_stop_check(std::span<const double> val_history, std::size_t patience);

struct TrainResult {
  ModelParams params;  ///< from the best validation epoch (last if no val set)
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;  ///< 1-based
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch Adam on the mean cross-entropy of each batch. `config.model`
/// must already carry the vocabulary and class dimensions. Throws TrainError
/// for fewer than two classes or an empty document, NumericalError on a
/// non-finite loss.
TrainResult train(std::span<const EncodedDocument> train_docs,
                  std::span<const EncodedDocument> val_docs, const TrainConfig& config,
                  const EmbeddingTable* pretrained = nullptr,
                  const EpochCallback& on_epoch = {});

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
  std::size_t total = 0;

  nlohmann::json to_json(const std::vector<std::string>& label_names) const;
};

/// Argmax prediction per document (lowest class on ties).
EvalReport evaluate(const ModelParams& params, std::span<const EncodedDocument> docs);

/// Split, fit features on the training part, train.
struct FitResult {
  FeatureSpace features;
  TrainResult result;
  std::vector<std::string> label_names;
};

struct FitOptions {
  FeatureOptions features;
  StopList stoplist = StopList::english();
  std::optional<std::filesystem::path> embeddings;
};

FitResult fit(const Dataset& dataset, TrainConfig config, const FitOptions& options,
              const EpochCallback& on_epoch = {});

}  // namespace agff
