// SPDX-License-Identifier: Apache-2.0
#include "agff/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "agff/checkpoint.hpp"
#include "agff/corpus.hpp"
#include "agff/errors.hpp"
#include "agff/inspect.hpp"
#include "agff/train.hpp"

namespace agff {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string data_dir;
  std::string format = "agnews";
  std::string out;
  std::string model;
  std::string mode = "gated";
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 0.001;
  std::size_t max_terms = 5000;
  double val_fraction = 0.1;
  std::size_t patience = 2;
  std::string stopwords;
  std::string embeddings;
  std::string metrics_out;
  std::string report_out;
  std::size_t embed_dim = 64;
  std::size_t hidden = 64;
  std::string text;
  std::size_t top_k = 5;
  std::optional<double> force_gate;
};

enum class Split { train, test };

// AG News accepts a CSV file or a directory holding train.csv / test.csv.
Dataset load_dataset(const Options& o, Split split) {
  const fs::path path(o.data_dir);
  if (o.format == "newsgroups") {
    if (fs::is_directory(path / (split == Split::train ? "train" : "test"))) {
      return load_newsgroups_dir(path / (split == Split::train ? "train" : "test"));
    }
    return load_newsgroups_dir(path);
  }
  if (fs::is_directory(path)) {
    return load_agnews_csv(path / (split == Split::train ? "train.csv" : "test.csv"));
  }
  return load_agnews_csv(path);
}

StopList stoplist_for(const Options& o) {
  return o.stopwords.empty() ? StopList::english() : StopList::from_file(o.stopwords);
}

FeatureOptions feature_options(const Options& o) {
  FeatureOptions f;
  f.strip_newsgroup_noise = o.format == "newsgroups";
  f.max_terms = o.max_terms;
  return f;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("error while writing " + path);
}

void emit_report(const Options& o, const json& report, std::ostream& out) {
  if (o.report_out.empty()) {
    out << report.dump(2) << '\n';
  } else {
    write_file(o.report_out, report.dump(2) + "\n");
  }
}

int run_build_vocab(const Options& o, std::ostream& out) {
  const Dataset all = load_dataset(o, Split::train);
  all.validate();
  const Dataset train_part = stratified_split(all, o.val_fraction, o.seed).first;
  const FeatureSpace features = FeatureSpace::fit(train_part, stoplist_for(o), feature_options(o));
  const std::string body = features.to_json().dump() + "\n";
  if (o.out.empty()) {
    out << body;
  } else {
    write_file(o.out, body);
  }
  return kExitOk;
}

int run_train(const Options& o, std::ostream& out) {
  const Dataset all = load_dataset(o, Split::train);

  TrainConfig config;
  config.lr = o.lr;
  config.batch_size = o.batch_size;
  config.max_epochs = o.epochs;
  config.val_fraction = o.val_fraction;
  config.patience = o.patience;
  config.seed = o.seed;
  config.model.fusion_mode = parse_fusion_mode(o.mode);
  config.model.embed_dim = o.embed_dim;
  config.model.hidden_per_dir = o.hidden;

  FitOptions fit_options;
  fit_options.features = feature_options(o);
  fit_options.stoplist = stoplist_for(o);
  if (!o.embeddings.empty()) fit_options.embeddings = fs::path(o.embeddings);

  std::optional<std::ofstream> metrics;
  if (!o.metrics_out.empty()) {
    metrics.emplace(o.metrics_out, std::ios::binary);
    if (!*metrics) throw IoError("cannot write " + o.metrics_out);
  }
  const FitResult fitted = fit(all, config, fit_options, [&](const EpochMetrics& m) {
    if (metrics) *metrics << metrics_to_json(m).dump() << '\n' << std::flush;
  });

  if (!o.out.empty()) {
    save_checkpoint(fitted.result.params, {fitted.label_names, fitted.features}, o.out);
  }
  json history = json::array();
  for (const EpochMetrics& m : fitted.result.history) history.push_back(metrics_to_json(m));
  emit_report(o,
              {{"mode", to_string(fitted.result.params.config.fusion_mode)},
               {"best_epoch", fitted.result.best_epoch},
               {"semantic_vocab", fitted.features.semantic.size()},
               {"tfidf_vocab", fitted.features.tfidf.size()},
               {"history", history}},
              out);
  return kExitOk;
}

int run_eval(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.model);
  const Dataset test = load_dataset(o, Split::test);
  if (test.num_classes() != ck.params.config.num_classes) {
    throw FormatError("dataset has " + std::to_string(test.num_classes()) +
                      " classes but the model was trained on " +
                      std::to_string(ck.params.config.num_classes));
  }
  const auto docs = ck.meta.features.encode_all(test);
  emit_report(o, evaluate(ck.params, docs).to_json(ck.meta.label_names), out);
  return kExitOk;
}

int run_predict(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.model);
  const FeatureSpace& features = ck.meta.features;
  const EncodedDocument doc = features.encode(o.text);
  ForwardOptions fwd;
  fwd.gate_override = o.force_gate;
  const ForwardTrace trace = forward(ck.params, doc, fwd);

  json top = json::array();
  if (ck.params.config.uses_semantic()) {
    TokenSequence tokens = features.tokenize(o.text);
    if (tokens.size() > features.max_seq_len) tokens.resize(features.max_seq_len);
    for (const auto& [token, weight] : attention_topk(trace, tokens, o.top_k)) {
      top.push_back({{"token", token}, {"alpha", weight}});
    }
  }
  json result = {{"label_name", ck.meta.label_names[argmax(trace.probs)]},
                 {"probs", trace.probs},
                 {"top_attention", top}};
  if (trace.gate) {
    double sum = 0.0;
    for (double g : *trace.gate) sum += g;
    result["mean_gate"] = sum / static_cast<double>(trace.gate->size());
  }
  out << result.dump() << '\n';
  return kExitOk;
}

int run_inspect(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.model);
  const Dataset test = load_dataset(o, Split::test);
  if (test.num_classes() != ck.params.config.num_classes) {
    throw FormatError("dataset has " + std::to_string(test.num_classes()) +
                      " classes but the model was trained on " +
                      std::to_string(ck.params.config.num_classes));
  }
  const auto docs = ck.meta.features.encode_all(test);
  const GateReport report = gate_summary(ck.params, docs, o.force_gate);
  emit_report(o, report.to_json(ck.meta.label_names), out);
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"AGFF text classifier", "agff"};
  app.require_subcommand(1);

  const std::vector<std::string> modes = {"gated", "concat", "semantic_only", "tfidf_only"};
  auto data_flags = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--data-dir", o.data_dir, "Corpus file or directory");
    if (required) opt->required();
    sub->add_option("--format", o.format, "Corpus format")
        ->check(CLI::IsMember({"agnews", "newsgroups"}));
  };
  auto feature_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--val-fraction", o.val_fraction, "Validation share per class");
    sub->add_option("--max-terms", o.max_terms, "TF-IDF vocabulary size");
    sub->add_option("--stopwords", o.stopwords, "Stop-word file, one word per line")
        ->check(CLI::ExistingFile);
  };

  CLI::App* vocab = app.add_subcommand("build-vocab", "Fit and write the feature vocabularies");
  data_flags(vocab, true);
  feature_flags(vocab);
  vocab->add_option("--out", o.out, "Output JSON path");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  data_flags(train_cmd, true);
  feature_flags(train_cmd);
  train_cmd->add_option("--out", o.out, "Checkpoint path");
  train_cmd->add_option("--mode", o.mode, "Fusion mode")->check(CLI::IsMember(modes));
  train_cmd->add_option("--epochs", o.epochs, "Maximum epochs");
  train_cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train_cmd->add_option("--lr", o.lr, "Adam learning rate");
  train_cmd->add_option("--patience", o.patience, "Early-stopping patience, 0 disables");
  train_cmd->add_option("--embeddings", o.embeddings, "Pretrained vectors (text format)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--embed-dim", o.embed_dim, "Embedding size");
  train_cmd->add_option("--hidden", o.hidden, "LSTM hidden size per direction");
  train_cmd->add_option("--metrics-out", o.metrics_out, "Per-epoch JSON-lines metrics");
  train_cmd->add_option("--report-out", o.report_out, "Training summary JSON");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on labelled data");
  eval_cmd->add_option("--model", o.model, "Checkpoint path")->required();
  data_flags(eval_cmd, true);
  eval_cmd->add_option("--report-out", o.report_out, "Evaluation report JSON");

  CLI::App* predict_cmd = app.add_subcommand("predict", "Classify one text");
  predict_cmd->add_option("--model", o.model, "Checkpoint path")->required();
  predict_cmd->add_option("--text", o.text, "Text to classify")->required();
  predict_cmd->add_option("--top-k", o.top_k, "Attention tokens to report")
      ->check(CLI::PositiveNumber);
  predict_cmd->add_option("--force-gate", o.force_gate, "Pin every gate component")
      ->check(CLI::Range(0.0, 1.0));

  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Gate statistics of a gated model");
  inspect_cmd->add_option("--model", o.model, "Checkpoint path")->required();
  data_flags(inspect_cmd, true);
  inspect_cmd->add_option("--report-out", o.report_out, "Gate report JSON");
  inspect_cmd->add_option("--force-gate", o.force_gate, "Pin every gate component")
      ->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> argv_store = {"agff"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (vocab->parsed()) return run_build_vocab(o, out);
    if (train_cmd->parsed()) return run_train(o, out);
    if (eval_cmd->parsed()) return run_eval(o, out);
    if (predict_cmd->parsed()) return run_predict(o, out);
    return run_inspect(o, out);
  } catch (const NumericalError& e) {
    err << "agff: numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ContractError& e) {
    err << "agff: invalid arguments: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "agff: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace agff
