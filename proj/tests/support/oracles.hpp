// SPDX-License-Identifier: Apache-2.0
//
// Slow reference implementations used as test oracles. Written with plain
// loops and no shared code with the library so they fail independently.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agff/autodiff.hpp"
#include "agff/corpus.hpp"
#include "agff/model.hpp"
#include "agff/rng.hpp"

namespace agff::testing {

struct DenseTfidf {
  std::vector<std::string> terms;
  std::vector<std::vector<double>> rows;  // one dense row per document
};

inline DenseTfidf dense_tfidf(const std::vector<std::vector<std::string>>& docs,
                              std::size_t max_terms) {
  std::map<std::string, std::set<std::size_t>> seen;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : docs[d]) seen[t].insert(d);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [t, ds] : seen) ranked.emplace_back(t, ds.size());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_terms) ranked.resize(max_terms);

  DenseTfidf out;
  const double n = static_cast<double>(docs.size());
  for (const auto& r : ranked) out.terms.push_back(r.first);
  for (const auto& doc : docs) {
    std::vector<double> row(ranked.size(), 0.0);
    for (std::size_t j = 0; j < ranked.size(); ++j) {
      const auto tf = std::count(doc.begin(), doc.end(), ranked[j].first);
      const double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(ranked[j].second))) + 1.0;
      row[j] = static_cast<double>(tf) * idf;
    }
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq > 0.0) {
      for (double& v : row) v /= std::sqrt(sq);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Central difference of `f` with respect to the scalar `x`, restoring it.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-4) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps gradients that are zero
/// up to rounding from dividing by nothing.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

inline double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One LSTM direction by explicit loops. `x` is n rows of k.
inline std::vector<std::vector<double>> lstm_ref(const std::vector<std::vector<double>>& x,
                                                 const Tensor& w_ih, const Tensor& w_hh,
                                                 const Tensor& bias, bool reverse) {
  const std::size_t n = x.size();
  const std::size_t hid = w_hh.cols();
  std::vector<std::vector<double>> out(n, std::vector<double>(hid, 0.0));
  std::vector<double> h(hid, 0.0), c(hid, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<double> pre(4 * hid, 0.0);
    for (std::size_t r = 0; r < 4 * hid; ++r) {
      double s = bias[r];
      for (std::size_t j = 0; j < x[t].size(); ++j) s += w_ih.at(r, j) * x[t][j];
      for (std::size_t j = 0; j < hid; ++j) s += w_hh.at(r, j) * h[j];
      pre[r] = s;
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double i = sigmoid_ref(pre[j]);
      const double f = sigmoid_ref(pre[hid + j]);
      const double g = std::tanh(pre[2 * hid + j]);
      const double o = sigmoid_ref(pre[3 * hid + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
    out[t] = h;
  }
  return out;
}

struct AttentionRef {
  std::vector<double> alpha;
  std::vector<double> pooled;
};

inline AttentionRef attention_ref(const std::vector<std::vector<double>>& ann, const Tensor& w,
                                  const Tensor& b, const Tensor& v) {
  const std::size_t d = v.size();
  std::vector<double> u;
  for (const auto& hi : ann) {
    double score = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double s = b[r];
      for (std::size_t j = 0; j < d; ++j) s += w.at(r, j) * hi[j];
      score += v[r] * std::tanh(s);
    }
    u.push_back(score);
  }
  const double m = *std::max_element(u.begin(), u.end());
  double z = 0.0;
  for (double x : u) z += std::exp(x - m);
  AttentionRef out;
  out.pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.alpha.push_back(std::exp(u[i] - m) / z);
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] += out.alpha[i] * ann[i][j];
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-scale, scale);
  return t;
}

/// Random document over a model's vocabularies: 1..max_len token ids
/// (UNK included) and a unit-norm sparse TF-IDF vector.
inline EncodedDocument random_document(const ModelConfig& config, Rng& rng,
                                       std::size_t max_len = 6) {
  EncodedDocument doc;
  const std::size_t n = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < n; ++i) {
    doc.token_ids.push_back(static_cast<std::uint32_t>(rng.below(config.vocab_size_semantic + 1)));
  }
  doc.tfidf.dim = config.tfidf_dim;
  std::set<std::uint32_t> cols;
  const std::size_t nnz = 1 + rng.below(std::min<std::size_t>(5, config.tfidf_dim));
  while (cols.size() < nnz) cols.insert(static_cast<std::uint32_t>(rng.below(config.tfidf_dim)));
  double sq = 0.0;
  for (std::uint32_t c : cols) {
    const double v = rng.uniform(0.1, 1.0);
    doc.tfidf.entries.emplace_back(c, v);
    sq += v * v;
  }
  for (auto& e : doc.tfidf.entries) e.second /= std::sqrt(sq);
  doc.label = rng.below(config.num_classes);
  return doc;
}

/// Perturbs every parameter so that no bias sits at a special value.
inline void jitter(ModelParams& params, Rng& rng, double scale = 0.3) {
  for (Parameter* p : params.all()) {
    for (double& x : p->value.values()) x += rng.uniform(-scale, scale);
  }
}

/// Labelled corpus where every class owns a few keywords that never occur
/// in other classes, mixed with shared filler words.
inline Dataset keyword_corpus(std::size_t docs_per_class, std::size_t num_classes,
                              std::uint64_t seed) {
  static const std::vector<std::string> filler = {"report", "today", "people", "week",
                                                  "new", "said", "time", "year"};
  Rng rng(seed);
  Dataset ds;
  for (std::size_t c = 0; c < num_classes; ++c) ds.label_names.push_back("class" + std::to_string(c));
  for (std::size_t i = 0; i < docs_per_class; ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::string text;
      const std::size_t n = 4 + rng.below(5);
      for (std::size_t t = 0; t < n; ++t) {
        if (rng.uniform() < 0.5) {
          text += "kw" + std::to_string(c) + "x" + std::to_string(rng.below(3));
        } else {
          text += filler[rng.below(filler.size())];
        }
        text += ' ';
      }
      text += "kw" + std::to_string(c) + "x0";
      ds.documents.push_back({"d" + std::to_string(ds.documents.size()), c, text});
    }
  }
  return ds;
}

}  // namespace agff::testing
