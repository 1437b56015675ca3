// SPDX-License-Identifier: Apache-2.0
#include "agff/model.hpp"

#include <algorithm>
#include <cmath>

#include "agff/errors.hpp"

namespace agff {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::gated: return "gated";
    case FusionMode::concat: return "concat";
    case FusionMode::semantic_only: return "semantic_only";
    case FusionMode::tfidf_only: return "tfidf_only";
  }
  return "gated";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "gated") return FusionMode::gated;
  if (name == "concat") return FusionMode::concat;
  if (name == "semantic_only") return FusionMode::semantic_only;
  if (name == "tfidf_only") return FusionMode::tfidf_only;
  throw FormatError("unknown fusion mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_per_dir == 0 || tfidf_dim == 0 || max_seq_len == 0) {
    throw ContractError("model config: every dimension must be at least 1");
  }
  if (num_classes < 2) throw ContractError("model config: at least 2 classes are required");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ContractError("model config: dropout must lie in [0, 1)");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size_semantic", vocab_size_semantic},
          {"embed_dim", embed_dim},
          {"hidden_per_dir", hidden_per_dir},
          {"fused_dim", fused_dim()},
          {"tfidf_dim", tfidf_dim},
          {"num_classes", num_classes},
          {"fusion_mode", std::string(to_string(fusion_mode))},
          {"max_seq_len", max_seq_len},
          {"dropout_p", dropout_p}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.vocab_size_semantic = j.at("vocab_size_semantic").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_per_dir = j.at("hidden_per_dir").get<std::size_t>();
    c.tfidf_dim = j.at("tfidf_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.fusion_mode = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    if (j.contains("fused_dim") && j["fused_dim"].get<std::size_t>() != c.fused_dim()) {
      throw FormatError("model config: fused_dim must equal 2 * hidden_per_dir");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// SemanticVocab

SemanticVocab::SemanticVocab(std::vector<std::string> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second) {
      throw BuildError("semantic vocabulary: duplicate term '" + terms_[i] + "'");
    }
  }
}

SemanticVocab SemanticVocab::build(std::span<const TokenSequence> corpus, std::size_t min_count,
                                   std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const TokenSequence& doc : corpus) {
    for (const std::string& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [term, count] : counts) {
    if (count >= min_count) ranked.emplace_back(term, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [term, count] : ranked) terms.push_back(std::move(term));
  return SemanticVocab(std::move(terms));
}

std::uint32_t SemanticVocab::id_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? unk_id() : static_cast<std::uint32_t>(it->second);
}

std::vector<std::uint32_t> SemanticVocab::encode(const TokenSequence& tokens,
                                                 std::size_t max_len) const {
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<std::uint32_t> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(id_of(tokens[i]));
  return ids;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<Parameter*> ModelParams::all() {
  return {&embedding, &fwd_w_ih, &fwd_w_hh, &fwd_bias, &bwd_w_ih, &bwd_w_hh,
          &bwd_bias,  &attn_w,   &attn_b,   &attn_v,   &stat_w,   &gate_w_h,
          &gate_w_s,  &gate_b,   &out_w,    &out_b};
}

std::vector<const Parameter*> ModelParams::all() const {
  auto* self = const_cast<ModelParams*>(this);
  const auto ptrs = self->all();
  return {ptrs.begin(), ptrs.end()};
}

void ModelParams::zero_grad() {
  for (Parameter* p : all()) p->zero_grad();
}

std::vector<Shape> ModelParams::shapes_for(const ModelConfig& c) {
  const std::size_t k = c.embed_dim, h = c.hidden_per_dir, d = c.fused_dim();
  return {{c.vocab_size_semantic + 1, k},
          {4 * h, k}, {4 * h, h}, {4 * h},
          {4 * h, k}, {4 * h, h}, {4 * h},
          {d, d}, {d}, {d},
          {d, c.tfidf_dim},
          {d, d}, {d, d}, {d},
          {c.num_classes, c.output_in_dim()}, {c.num_classes}};
}

namespace {

Tensor xavier(const Shape& shape, Rng& rng) {
  const double fan_out = static_cast<double>(shape[0]);
  const double fan_in = shape.size() == 2 ? static_cast<double>(shape[1]) : 1.0;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor lstm_bias(std::size_t hidden) {
  Tensor b({4 * hidden});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return b;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, Rng& rng, const EmbeddingTable* pretrained) {
  config.validate();
  const auto shapes = ModelParams::shapes_for(config);
  ModelParams p;
  p.config = config;

  Tensor emb(shapes[0]);
  for (double& v : emb.values()) v = rng.uniform(-0.05, 0.05);
  if (pretrained) {
    if (pretrained->dim != config.embed_dim) {
      throw ShapeError("pretrained embeddings have dimension " + std::to_string(pretrained->dim) +
                       ", model expects " + std::to_string(config.embed_dim));
    }
    for (const auto& [index, row] : pretrained->rows) {
      if (index >= config.vocab_size_semantic) {
        throw IndexError("pretrained row " + std::to_string(index) + " outside the vocabulary");
      }
      std::copy(row.begin(), row.end(), emb.row(index).begin());
    }
    if (!pretrained->rows.empty()) {
      std::copy(pretrained->unk_row.begin(), pretrained->unk_row.end(),
                emb.row(config.vocab_size_semantic).begin());
    }
  }
  p.embedding = Parameter("embedding", std::move(emb));

  p.fwd_w_ih = Parameter("lstm_fwd.w_ih", xavier(shapes[1], rng));
  p.fwd_w_hh = Parameter("lstm_fwd.w_hh", xavier(shapes[2], rng));
  p.fwd_bias = Parameter("lstm_fwd.bias", lstm_bias(config.hidden_per_dir));
  p.bwd_w_ih = Parameter("lstm_bwd.w_ih", xavier(shapes[4], rng));
  p.bwd_w_hh = Parameter("lstm_bwd.w_hh", xavier(shapes[5], rng));
  p.bwd_bias = Parameter("lstm_bwd.bias", lstm_bias(config.hidden_per_dir));
  p.attn_w = Parameter("attn.w", xavier(shapes[7], rng));
  p.attn_b = Parameter("attn.b", Tensor(shapes[8]));
  p.attn_v = Parameter("attn.v", xavier(shapes[9], rng));
  p.stat_w = Parameter("stat.w", xavier(shapes[10], rng));
  p.gate_w_h = Parameter("gate.w_h", xavier(shapes[11], rng));
  p.gate_w_s = Parameter("gate.w_s", xavier(shapes[12], rng));
  p.gate_b = Parameter("gate.b", Tensor(shapes[13]));
  p.out_w = Parameter("out.w", xavier(shapes[14], rng));
  p.out_b = Parameter("out.b", Tensor(shapes[15]));
  return p;
}

// ---------------------------------------------------------------------------
// Graph pieces

namespace {

template <typename Params, typename BindFn>
ParamVars bind_with(Params& p, BindFn bind) {
  ParamVars v;
  v.embedding = bind(p.embedding);
  v.fwd = {bind(p.fwd_w_ih), bind(p.fwd_w_hh), bind(p.fwd_bias)};
  v.bwd = {bind(p.bwd_w_ih), bind(p.bwd_w_hh), bind(p.bwd_bias)};
  v.attn_w = bind(p.attn_w);
  v.attn_b = bind(p.attn_b);
  v.attn_v = bind(p.attn_v);
  v.stat_w = bind(p.stat_w);
  v.gate_w_h = bind(p.gate_w_h);
  v.gate_w_s = bind(p.gate_w_s);
  v.gate_b = bind(p.gate_b);
  v.out_w = bind(p.out_w);
  v.out_b = bind(p.out_b);
  return v;
}

}  // namespace

ParamVars bind_params(Tape& tape, ModelParams& params) {
  return bind_with(params, [&tape](Parameter& p) { return tape.param(p); });
}

ParamVars bind_params(Tape& tape, const ModelParams& params) {
  return bind_with(params, [&tape](const Parameter& p) { return tape.reference(p.value); });
}

Var embed_sequence(Var table, std::span<const std::uint32_t> ids) {
  if (ids.empty()) throw EmptyDocumentError("cannot embed an empty token sequence");
  return embedding_lookup(table, ids);
}

Var bilstm_encode(Var embedded, const LstmWeights& fwd, const LstmWeights& bwd) {
  return concat(lstm(embedded, fwd, false), lstm(embedded, bwd, true));
}

AttentionPool attention_pool(Var annotations, Var w, Var b, Var v) {
  Var hidden = tanh(linear(annotations, w, b));
  Var scores = matmul(hidden, v);
  Var alpha = softmax(scores);
  return {matmul(alpha, annotations), alpha};
}

Var project_stat(Var stat_w, const SparseVector& s) { return sparse_matvec(stat_w, s); }

Fusion fuse(Var h, Var s_proj, const ParamVars& p, FusionMode mode,
            std::optional<double> gate_override) {
  const auto require = [](const Var& x, const char* what) {
    if (!x.valid()) throw ShapeError(std::string("fuse: mode needs ") + what);
    if (x.value().rank() != 1) {
      throw ShapeError(std::string("fuse: ") + what + " must be a vector, got " +
                       shape_string(x.shape()));
    }
  };
  switch (mode) {
    case FusionMode::semantic_only:
      require(h, "h");
      return {h, std::nullopt};
    case FusionMode::tfidf_only:
      require(s_proj, "s'");
      return {s_proj, std::nullopt};
    case FusionMode::concat:
      require(h, "h");
      require(s_proj, "s'");
      return {concat(h, s_proj), std::nullopt};
    case FusionMode::gated:
      break;
  }
  require(h, "h");
  require(s_proj, "s'");
  if (h.shape() != s_proj.shape()) {
    throw ShapeError("fuse: h " + shape_string(h.shape()) + " and s' " +
                     shape_string(s_proj.shape()) + " differ");
  }
  Tape& tape = h.tape();
  Var gate, keep_stat;
  if (gate_override) {
    gate = tape.constant(Tensor(h.shape(), *gate_override));
    keep_stat = tape.constant(Tensor(h.shape(), 1.0 - *gate_override));
  } else {
    gate = sigmoid(add(linear(h, p.gate_w_h, p.gate_b), linear(s_proj, p.gate_w_s)));
    keep_stat = add_scalar(scale(gate, -1.0), 1.0);
  }
  return {add(mul(gate, h), mul(keep_stat, s_proj)), gate};
}

ModelGraph build_forward(Tape& tape, const ParamVars& p, const ModelConfig& config,
                         const EncodedDocument& doc, const ForwardOptions& options) {
  const bool dropping = options.training && config.dropout_p > 0.0;
  if (dropping && options.rng == nullptr) {
    throw ContractError("forward: training with dropout needs an rng");
  }
  ModelGraph g;
  if (doc.token_ids.empty()) {
    if (options.training) throw EmptyDocumentError("cannot train on an empty document");
    g.fused = tape.constant(Tensor({config.output_in_dim()}));
    g.logits = p.out_b;
    return g;
  }

  Rng unused;
  Rng& rng = options.rng ? *options.rng : unused;

  Var h, s_proj;
  if (config.uses_semantic()) {
    Var embedded = embed_sequence(p.embedding, doc.token_ids);
    embedded = dropout(embedded, config.dropout_p, rng, options.training);
    Var annotations = bilstm_encode(embedded, p.fwd, p.bwd);
    AttentionPool pool = attention_pool(annotations, p.attn_w, p.attn_b, p.attn_v);
    h = pool.pooled;
    g.alpha = pool.alpha;
  }
  if (config.uses_statistical()) {
    if (doc.tfidf.dim != config.tfidf_dim) {
      throw ShapeError("forward: tfidf vector has dimension " + std::to_string(doc.tfidf.dim) +
                       ", model expects " + std::to_string(config.tfidf_dim));
    }
    s_proj = project_stat(p.stat_w, doc.tfidf);
  }
  Fusion fusion = fuse(h, s_proj, p, config.fusion_mode, options.gate_override);
  g.gate = fusion.gate;
  g.fused = fusion.fused;
  Var z = dropout(fusion.fused, config.dropout_p, rng, options.training);
  g.logits = linear(z, p.out_w, p.out_b);
  return g;
}

namespace {

std::vector<double> copy_values(const Var& v) {
  const auto vals = v.value().values();
  return {vals.begin(), vals.end()};
}

}  // namespace

ForwardTrace forward(const ModelParams& params, const EncodedDocument& doc,
                     const ForwardOptions& options) {
  Tape tape(false);
  const ParamVars p = bind_params(tape, params);
  const ModelGraph g = build_forward(tape, p, params.config, doc, options);
  ForwardTrace trace;
  if (g.alpha.valid()) trace.alpha = copy_values(g.alpha);
  if (g.gate) trace.gate = copy_values(*g.gate);
  trace.fused = copy_values(g.fused);
  trace.logits = copy_values(g.logits);
  trace.probs = copy_values(softmax(g.logits));
  return trace;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace agff
