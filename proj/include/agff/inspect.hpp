// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agff/model.hpp"
#include "agff/text.hpp"

namespace agff {

inline constexpr std::size_t kGateBins = 10;

/// Gate statistics. A document's gate value is the mean of its D gate
/// components; values near 1 lean on the semantic branch.
struct GateReport {
  std::vector<std::optional<double>> class_mean;  ///< empty class -> nullopt
  std::vector<std::array<std::size_t, kGateBins>> class_histogram;  ///< bins on [0, 1]
  std::vector<std::size_t> class_documents;
  double global_mean = 0.0;
  std::size_t documents = 0;       ///< documents with a gate
  std::size_t skipped_empty = 0;   ///< empty after preprocessing, no gate

  nlohmann::json to_json(const std::vector<std::string>& label_names) const;
};

/// Runs inference over `docs` and aggregates the gate by true class. Throws
/// ModeError unless the model is in gated mode.
GateReport gate_summary(const ModelParams& params, std::span<const EncodedDocument> docs,
                        std::optional<double> gate_override = std::nullopt);

/// Top `k` tokens by attention weight, earlier position first on ties.
/// `tokens` are the document's semantic tokens; only the first
/// `trace.alpha.size()` are considered.
std::vector<std::pair<std::string, double>> attention_topk(const ForwardTrace& trace,
                                                           const TokenSequence& tokens,
                                                           std::size_t k);

}  // namespace agff
