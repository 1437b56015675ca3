// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace agff {

/// Lowercase tokens with no whitespace or punctuation.
using TokenSequence = std::vector<std::string>;

/// Lowercases `text` and splits it on every character that is not a letter
/// or digit. Input is UTF-8; invalid bytes act as separators.
TokenSequence normalize_and_tokenize(std::string_view text);

/// Removes a leading `Key: value` header block (up to and including the
/// first blank line), every line starting with '>', and every
/// "... writes:" / "... wrote:" attribution line directly above a quote.
std::string strip_newsgroup_noise(std::string_view raw);

class StopList {
 public:
  StopList() = default;
  explicit StopList(std::vector<std::string> words);

  /// The built-in 179-word English list (same content as data/stopwords.txt).
  static StopList english();
  /// One lowercase word per line; blank lines and surrounding whitespace are
  /// ignored. Throws IoError if the file cannot be read.
  static StopList from_file(const std::filesystem::path& path);

  bool contains(const std::string& word) const { return set_.contains(word); }
  std::size_t size() const noexcept { return words_.size(); }
  /// Words in sorted order.
  const std::vector<std::string>& words() const noexcept { return words_; }
  /// FNV-1a over the sorted, newline-joined words. Identifies the list in
  /// checkpoint metadata.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> words_;
  std::unordered_set<std::string> set_;
};

TokenSequence remove_stopwords(const TokenSequence& tokens, const StopList& stoplist);

}  // namespace agff
