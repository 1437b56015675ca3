// SPDX-License-Identifier: Apache-2.0
#include "agff/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "agff/errors.hpp"
#include "agff/rng.hpp"

namespace agff {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading " + path.string());
  return bytes;
}

// Splits CSV text into records. Fields may be quoted; inside quotes `""` is
// a literal quote and newlines are kept. Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;  // current record has content

  auto end_record = [&] {
    if (any) {
      fields.push_back(std::move(field));
      records.push_back(std::move(fields));
    }
    fields.clear();
    field.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) {
    throw RowFormatError(records.size() + 1, "unterminated quoted field");
  }
  end_record();
  return records;
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(label_names.size(), 0);
  for (const Document& d : documents) {
    if (d.label < counts.size()) ++counts[d.label];
  }
  return counts;
}

void Dataset::validate() const {
  std::set<std::string> seen;
  for (const std::string& name : label_names) {
    if (!seen.insert(name).second) throw FormatError("duplicate label name '" + name + "'");
  }
  for (const Document& d : documents) {
    if (d.label >= label_names.size()) {
      throw FormatError("document " + d.id + " has label " + std::to_string(d.label) +
                        " but only " + std::to_string(label_names.size()) + " classes exist");
    }
  }
}

std::vector<std::string> agnews_label_names() {
  return {"World", "Sports", "Business", "Sci/Tech"};
}

Dataset load_agnews_csv(const fs::path& path, std::vector<std::string> label_names,
                        const LoadOptions& options) {
  if (!fs::is_regular_file(path)) throw IoError("no such file " + path.string());
  const std::string bytes = read_file(path);
  const auto records = parse_csv(bytes);

  Dataset ds;
  ds.label_names = std::move(label_names);
  ds.documents.reserve(records.size());
  const std::size_t num_classes = ds.label_names.size();
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row = r + 1;
    if (rec.size() != 3) {
      throw RowFormatError(row, "expected 3 fields, found " + std::to_string(rec.size()));
    }
    const std::string& cls = rec[0];
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), index);
    if (ec != std::errc() || ptr != cls.data() + cls.size() || index < 1 ||
        index > num_classes) {
      throw RowFormatError(row, "class index '" + cls + "' outside 1.." +
                                    std::to_string(num_classes));
    }
    if (!options.keep_empty && rec[1].empty() && rec[2].empty()) {
      throw RowFormatError(row, "empty document");
    }
    ds.documents.push_back(Document{"row" + std::to_string(row), index - 1,
                                    rec[1] + ". " + rec[2]});
  }
  ds.validate();
  return ds;
}

std::string decode_lenient(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3
                                  : (b0 & 0xF8) == 0xF0 ? 4 : 0;
    bool ok = len > 0 && i + len <= bytes.size();
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(bytes[i + k]);
      ok = (b & 0xC0) == 0x80;
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (ok && (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (ok) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      out.append("\xEF\xBF\xBD");
      ++i;
    }
  }
  return out;
}

Dataset load_newsgroups_dir(const fs::path& path, const LoadOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw IoError("no such directory " + path.string());

  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw IoError("directory " + path.string() + " has no class folders");

  Dataset ds;
  ds.label_names = classes;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path / classes[label])) {
      if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& name : files) {
      const fs::path file = path / classes[label] / name;
      std::string text = decode_lenient(read_file(file));
      if (!options.keep_empty && text.empty()) {
        throw EmptyDocumentError("empty document " + file.string());
      }
      ds.documents.push_back(Document{classes[label] + "/" + name, label, std::move(text)});
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double val_fraction,
                                             std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw StratifyError("validation fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t label = dataset.documents[i].label;
    if (label >= by_class.size()) throw StratifyError("document label out of range");
    by_class[label].push_back(i);
  }

  Rng rng(seed);
  std::vector<bool> to_val(dataset.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw StratifyError("class '" + dataset.label_names[c] + "' has " +
                          std::to_string(idx.size()) + " documents; at least 2 are required");
    }
    const auto wanted = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * val_fraction));
    const std::size_t take = std::clamp<std::size_t>(wanted, 1, idx.size() - 1);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < take; ++k) to_val[idx[k]] = true;
  }

  Dataset train, val;
  train.label_names = val.label_names = dataset.label_names;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (to_val[i] ? val : train).documents.push_back(dataset.documents[i]);
  }
  return {std::move(train), std::move(val)};
}

EmbeddingTable load_embedding_text(const fs::path& path,
                                   const std::unordered_map<std::string, std::size_t>& vocab,
                                   std::size_t dim) {
  if (dim == 0) throw FormatError("embedding dimension must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read embedding file " + path.string());

  EmbeddingTable table;
  table.dim = dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> row;
    row.reserve(dim);
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw LineFormatError(line_no, "'" + tok + "' is not a number");
      }
      row.push_back(v);
    }
    if (row.size() != dim) {
      throw LineFormatError(line_no, "expected " + std::to_string(dim) + " values, found " +
                                         std::to_string(row.size()));
    }
    const auto it = vocab.find(word);
    if (it == vocab.end()) continue;
    table.rows[it->second] = std::move(row);
  }

  table.unk_row.assign(dim, 0.0);
  if (!table.rows.empty()) {
    for (const auto& [index, row] : table.rows) {
      for (std::size_t j = 0; j < dim; ++j) table.unk_row[j] += row[j];
    }
    for (double& v : table.unk_row) v /= static_cast<double>(table.rows.size());
  }
  return table;
}

}  // namespace agff
