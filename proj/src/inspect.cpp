// SPDX-License-Identifier: Apache-2.0
#include "agff/inspect.hpp"

#include <algorithm>
#include <numeric>

#include "agff/errors.hpp"

namespace agff {

GateReport gate_summary(const ModelParams& params, std::span<const EncodedDocument> docs,
                        std::optional<double> gate_override) {
  if (params.config.fusion_mode != FusionMode::gated) {
    throw ModeError("gate statistics need a gated model, this one is " +
                    std::string(to_string(params.config.fusion_mode)));
  }
  const std::size_t c = params.config.num_classes;
  GateReport r;
  r.class_histogram.assign(c, {});
  r.class_documents.assign(c, 0);
  std::vector<double> sums(c, 0.0);
  double total = 0.0;

  ForwardOptions options;
  options.gate_override = gate_override;
  for (const EncodedDocument& doc : docs) {
    if (doc.label >= c) throw IndexError("gate_summary: label outside the model's classes");
    const ForwardTrace trace = forward(params, doc, options);
    if (!trace.gate) {
      ++r.skipped_empty;
      continue;
    }
    const std::vector<double>& g = *trace.gate;
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    const auto bin = std::min<std::size_t>(kGateBins - 1,
                                           static_cast<std::size_t>(mean * kGateBins));
    ++r.class_histogram[doc.label][bin];
    ++r.class_documents[doc.label];
    sums[doc.label] += mean;
    total += mean;
    ++r.documents;
  }
  r.class_mean.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    if (r.class_documents[k]) sums[k] /= static_cast<double>(r.class_documents[k]);
    if (r.class_documents[k]) r.class_mean[k] = sums[k];
  }
  r.global_mean = r.documents ? total / static_cast<double>(r.documents) : 0.0;
  return r;
}

nlohmann::json GateReport::to_json(const std::vector<std::string>& label_names) const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < class_mean.size(); ++k) {
    classes.push_back(
        {{"label", k < label_names.size() ? label_names[k] : std::to_string(k)},
         {"documents", class_documents[k]},
         {"mean_gate", class_mean[k] ? nlohmann::json(*class_mean[k]) : nlohmann::json(nullptr)},
         {"histogram", class_histogram[k]}});
  }
  return {{"global_mean_gate", global_mean},
          {"documents", documents},
          {"skipped_empty", skipped_empty},
          {"classes", classes}};
}

std::vector<std::pair<std::string, double>> attention_topk(const ForwardTrace& trace,
                                                           const TokenSequence& tokens,
                                                           std::size_t k) {
  const std::size_t n = std::min(trace.alpha.size(), tokens.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.alpha[a] > trace.alpha[b];
  });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(k, n); ++i) {
    out.emplace_back(tokens[order[i]], trace.alpha[order[i]]);
  }
  return out;
}

}  // namespace agff
