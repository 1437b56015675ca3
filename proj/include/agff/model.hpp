// SPDX-License-Identifier: Apache-2.0
//
// The fusion classifier: word embeddings -> BiLSTM -> attention pooling on
// the semantic side, a learned projection of the TF-IDF vector on the
// statistical side, a sigmoid gate blending the two, and a softmax output
// layer. The concat, semantic_only and tfidf_only modes are the ablations.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agff/autodiff.hpp"
#include "agff/corpus.hpp"
#include "agff/rng.hpp"
#include "agff/sparse.hpp"
#include "agff/text.hpp"

namespace agff {

enum class FusionMode { gated, concat, semantic_only, tfidf_only };

std::string_view to_string(FusionMode mode);
/// Throws FormatError for an unknown name.
FusionMode parse_fusion_mode(std::string_view name);

struct ModelConfig {
  std::size_t vocab_size_semantic = 0;
  std::size_t embed_dim = 64;
  std::size_t hidden_per_dir = 64;
  std::size_t tfidf_dim = 5000;
  std::size_t num_classes = 2;
  FusionMode fusion_mode = FusionMode::gated;
  std::size_t max_seq_len = 400;
  double dropout_p = 0.5;

  /// D: size of h, s', g and z (z is 2D in concat mode).
  std::size_t fused_dim() const noexcept { return 2 * hidden_per_dir; }
  std::size_t output_in_dim() const noexcept {
    return fusion_mode == FusionMode::concat ? 2 * fused_dim() : fused_dim();
  }
  bool uses_semantic() const noexcept { return fusion_mode != FusionMode::tfidf_only; }
  bool uses_statistical() const noexcept { return fusion_mode != FusionMode::semantic_only; }

  /// Throws ContractError when a dimension is zero, C < 2 or dropout is
  /// outside [0, 1).
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Word-to-row map for the embedding table. Row `size()` is the UNK row.
class SemanticVocab {
 public:
  SemanticVocab() = default;
  explicit SemanticVocab(std::vector<std::string> terms);

  /// Terms seen at least `min_count` times, most frequent first (ties by
  /// term), at most `max_size` of them.
  static SemanticVocab build(std::span<const TokenSequence> corpus, std::size_t min_count,
                             std::size_t max_size);

  std::size_t size() const noexcept { return terms_.size(); }
  std::uint32_t unk_id() const noexcept { return static_cast<std::uint32_t>(terms_.size()); }
  std::uint32_t id_of(const std::string& token) const;
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::unordered_map<std::string, std::size_t>& index() const noexcept { return index_; }

  /// Ids of the first `max_len` tokens; unknown tokens map to unk_id().
  std::vector<std::uint32_t> encode(const TokenSequence& tokens, std::size_t max_len) const;

  friend bool operator==(const SemanticVocab& a, const SemanticVocab& b) {
    return a.terms_ == b.terms_;
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Every learnable tensor. Field order is the pinned serialization order.
struct ModelParams {
  ModelConfig config;
  Parameter embedding;  ///< (vocab + 1) x k, last row is UNK
  Parameter fwd_w_ih;   ///< 4H x k, gates input|forget|cell|output
  Parameter fwd_w_hh;   ///< 4H x H
  Parameter fwd_bias;   ///< 4H
  Parameter bwd_w_ih;
  Parameter bwd_w_hh;
  Parameter bwd_bias;
  Parameter attn_w;     ///< D x D
  Parameter attn_b;     ///< D
  Parameter attn_v;     ///< D
  Parameter stat_w;     ///< D x V
  Parameter gate_w_h;   ///< D x D
  Parameter gate_w_s;   ///< D x D
  Parameter gate_b;     ///< D
  Parameter out_w;      ///< C x D (C x 2D in concat mode)
  Parameter out_b;      ///< C

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();
  /// Expected shape of every field, in field order.
  static std::vector<Shape> shapes_for(const ModelConfig& config);
};

/// Xavier-uniform weight matrices, zero biases except the LSTM forget
/// blocks (1), embeddings uniform in [-0.05, 0.05]. When `pretrained` is
/// given its rows overwrite the matching embedding rows and a non-empty
/// table's unk_row replaces the UNK row.
ModelParams init_params(const ModelConfig& config, Rng& rng,
                        const EmbeddingTable* pretrained = nullptr);

/// A document ready for the network.
struct EncodedDocument {
  std::vector<std::uint32_t> token_ids;  ///< semantic branch, truncated
  SparseVector tfidf;                    ///< statistical branch
  std::size_t label = 0;
};

/// Parameters bound to one tape.
struct ParamVars {
  Var embedding;
  LstmWeights fwd;
  LstmWeights bwd;
  Var attn_w, attn_b, attn_v;
  Var stat_w;
  Var gate_w_h, gate_w_s, gate_b;
  Var out_w, out_b;
};

/// Tracked binding: gradients accumulate into `params`.
ParamVars bind_params(Tape& tape, ModelParams& params);
/// Untracked binding for inference.
ParamVars bind_params(Tape& tape, const ModelParams& params);

/// Embedding rows for `ids` (n x k). Throws EmptyDocumentError when empty.
Var embed_sequence(Var table, std::span<const std::uint32_t> ids);

/// Row i is [forward h_i ; backward h_i], giving n x 2H.
Var bilstm_encode(Var embedded, const LstmWeights& fwd, const LstmWeights& bwd);

struct AttentionPool {
  Var pooled;  ///< h, length D
  Var alpha;   ///< length n, sums to 1
};
/// u_i = v . tanh(W h_i + b), alpha = softmax(u), h = sum alpha_i h_i.
AttentionPool attention_pool(Var annotations, Var w, Var b, Var v);

/// W_s s using only the nonzero entries of s.
Var project_stat(Var stat_w, const SparseVector& s);

struct Fusion {
  Var fused;                ///< z
  std::optional<Var> gate;  ///< g, gated mode only
};
/// gated: g = sigmoid(W_h h + W_s' s' + b_g), z = g*h + (1-g)*s'.
/// concat: z = [h ; s']. semantic_only: z = h. tfidf_only: z = s'.
/// `gate_override` replaces g by a constant (test and inspection hook).
/// Vars not needed by the mode may be left default-constructed.
Fusion fuse(Var h, Var s_proj, const ParamVars& p, FusionMode mode,
            std::optional<double> gate_override = std::nullopt);

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  ///< required when training with dropout
  std::optional<double> gate_override;
};

/// Vars of one forward pass; alpha/gate are invalid when not computed.
struct ModelGraph {
  Var alpha;
  std::optional<Var> gate;
  Var fused;
  Var logits;
};

/// Builds the full forward graph: embed -> dropout -> BiLSTM -> attention,
/// project_stat, fuse, dropout(z), logits = W_o z + b_o. An empty document
/// is rejected while training and classified by b_o alone otherwise.
ModelGraph build_forward(Tape& tape, const ParamVars& p, const ModelConfig& config,
                         const EncodedDocument& doc, const ForwardOptions& options);

struct ForwardTrace {
  std::vector<double> alpha;
  std::optional<std::vector<double>> gate;
  std::vector<double> fused;
  std::vector<double> logits;
  std::vector<double> probs;
};

ForwardTrace forward(const ModelParams& params, const EncodedDocument& doc,
                     const ForwardOptions& options = {});

/// Index of the largest probability, lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace agff
