// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace agff {

struct Document {
  std::string id;
  std::size_t label = 0;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Labeled documents plus the class names their labels index into.
struct Dataset {
  std::vector<Document> documents;
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return documents.size(); }
  std::size_t num_classes() const noexcept { return label_names.size(); }
  /// Documents per class, indexed by label.
  std::vector<std::size_t> class_counts() const;
  /// Throws FormatError if label names repeat or a label is out of range.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct LoadOptions {
  /// Accept documents whose text is empty.
  bool keep_empty = false;
};

/// The AG News class names in label order.
std::vector<std::string> agnews_label_names();

/// Three-field CSV rows `"class","title","description"` with class in 1..4.
/// Text is `title + ". " + description`, ids are "row<N>".
Dataset load_agnews_csv(const std::filesystem::path& path,
                        std::vector<std::string> label_names = agnews_label_names(),
                        const LoadOptions& options = {});

/// One subdirectory per class (sorted by name), one document per file.
/// Bytes that are not valid UTF-8 are replaced with U+FFFD.
Dataset load_newsgroups_dir(const std::filesystem::path& path, const LoadOptions& options = {});

/// Per class, max(1, round(n_c * val_fraction)) documents go to validation
/// (at most n_c - 1), picked by a shuffle seeded with `seed`. Both halves
/// keep the original document order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double val_fraction,
                                             std::uint64_t seed);

/// Pretrained vectors keyed by vocabulary index.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::size_t, std::vector<double>> rows;
  std::vector<double> unk_row;
};

/// Text vectors, one `word v1 ... v_dim` entry per line. Words missing from
/// `vocab` are skipped. `unk_row` is the mean of the loaded rows.
EmbeddingTable load_embedding_text(const std::filesystem::path& path,
                                   const std::unordered_map<std::string, std::size_t>& vocab,
                                   std::size_t dim);

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string decode_lenient(std::string_view bytes);

}  // namespace agff
