// SPDX-License-Identifier: Apache-2.0
#include "agff/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_set>

#include "agff/errors.hpp"

namespace agff {

double SparseVector::norm() const {
  double sq = 0.0;
  for (const auto& [i, v] : entries) sq += v * v;
  return std::sqrt(sq);
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> dense(dim, 0.0);
  for (const auto& [i, v] : entries) dense[i] = v;
  return dense;
}

double smoothed_idf(std::size_t num_docs, std::size_t doc_freq) {
  return std::log((1.0 + static_cast<double>(num_docs)) / (1.0 + static_cast<double>(doc_freq))) +
         1.0;
}

TfidfVocabulary::TfidfVocabulary(std::vector<std::string> terms,
                                 std::vector<std::size_t> doc_freq, std::size_t num_docs)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), num_docs_(num_docs) {
  if (terms_.size() != doc_freq_.size()) {
    throw BuildError("tfidf vocabulary: term and document-frequency counts differ");
  }
  idf_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second) {
      throw BuildError("tfidf vocabulary: duplicate term '" + terms_[i] + "'");
    }
    idf_.push_back(smoothed_idf(num_docs_, doc_freq_[i]));
  }
}

std::optional<std::size_t> TfidfVocabulary::index_of(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json TfidfVocabulary::to_json() const {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    terms.push_back({{"t", terms_[i]}, {"df", doc_freq_[i]}});
  }
  return {{"num_docs", num_docs_}, {"terms", std::move(terms)}};
}

TfidfVocabulary TfidfVocabulary::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> terms;
    std::vector<std::size_t> df;
    for (const auto& entry : j.at("terms")) {
      terms.push_back(entry.at("t").get<std::string>());
      df.push_back(entry.at("df").get<std::size_t>());
    }
    return TfidfVocabulary(std::move(terms), std::move(df), j.at("num_docs").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tfidf vocabulary: ") + e.what());
  }
}

void TfidfVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump() << '\n';
  if (!out) throw IoError("error while writing " + path.string());
}

TfidfVocabulary TfidfVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

TfidfVocabulary build_tfidf_vocab(std::span<const TokenSequence> corpus, std::size_t max_terms) {
  if (corpus.empty()) throw BuildError("cannot build a tfidf vocabulary from an empty corpus");
  if (max_terms == 0) throw BuildError("max_terms must be at least 1");

  std::unordered_map<std::string, std::size_t> df;
  std::unordered_set<std::string_view> seen;
  for (const TokenSequence& doc : corpus) {
    seen.clear();
    for (const std::string& tok : doc) {
      if (seen.insert(tok).second) ++df[tok];
    }
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_terms) ranked.resize(max_terms);

  std::vector<std::string> terms;
  std::vector<std::size_t> freqs;
  terms.reserve(ranked.size());
  freqs.reserve(ranked.size());
  for (auto& [t, f] : ranked) {
    terms.push_back(std::move(t));
    freqs.push_back(f);
  }
  return TfidfVocabulary(std::move(terms), std::move(freqs), corpus.size());
}

SparseVector compute_tfidf(const TokenSequence& tokens, const TfidfVocabulary& vocab) {
  std::map<std::size_t, std::size_t> counts;
  for (const std::string& tok : tokens) {
    if (const auto idx = vocab.index_of(tok)) ++counts[*idx];
  }
  SparseVector s;
  s.dim = vocab.size();
  s.entries.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [idx, count] : counts) {
    const double w = static_cast<double>(count) * vocab.idf()[idx];
    s.entries.emplace_back(static_cast<std::uint32_t>(idx), w);
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, v] : s.entries) v *= inv;
  }
  return s;
}

}  // namespace agff
