// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agff/sparse.hpp"
#include "agff/text.hpp"

namespace agff {

/// Bounded TF-IDF vocabulary. Index order is rank order: document frequency
/// descending, then term ascending.
class TfidfVocabulary {
 public:
  TfidfVocabulary() = default;
  /// `terms[i]` gets index i. idf is derived from `num_docs` and `doc_freq`.
  TfidfVocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                  std::size_t num_docs);

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t num_docs() const noexcept { return num_docs_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::size_t>& doc_freq() const noexcept { return doc_freq_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  std::optional<std::size_t> index_of(const std::string& term) const;

  /// {"num_docs": N, "terms": [{"t": term, "df": df}, ...]} in index order.
  nlohmann::json to_json() const;
  static TfidfVocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TfidfVocabulary load(const std::filesystem::path& path);

  friend bool operator==(const TfidfVocabulary& a, const TfidfVocabulary& b) {
    return a.num_docs_ == b.num_docs_ && a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t num_docs_ = 0;
};

/// ln((1 + N) / (1 + df)) + 1.
double smoothed_idf(std::size_t num_docs, std::size_t doc_freq);

/// Keeps the `max_terms` terms with the highest document frequency. Throws
/// BuildError for an empty corpus or `max_terms == 0`.
TfidfVocabulary build_tfidf_vocab(std::span<const TokenSequence> corpus, std::size_t max_terms);

/// Raw count times idf for in-vocabulary terms, then L2-normalised. A
/// document with no in-vocabulary term gives the zero vector.
SparseVector compute_tfidf(const TokenSequence& tokens, const TfidfVocabulary& vocab);

}  // namespace agff
