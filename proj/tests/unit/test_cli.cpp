#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "agff/cli.hpp"
#include "agff/rng.hpp"

using namespace agff;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Small AG-style corpus with class-specific vocabulary.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "agff_cli_test";
  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir / "ng" / "alpha");
    fs::create_directories(dir / "ng" / "beta");
    fs::create_directories(dir / "ng" / "gamma");
    const std::vector<std::vector<std::string>> words = {
        {"election", "minister", "embassy"}, {"football", "goal", "coach"},
        {"stocks", "profit", "market"}, {"software", "chip", "internet"}};
    Rng rng(1);
    for (const char* name : {"train.csv", "test.csv"}) {
      std::ofstream f(dir / name);
      for (int i = 0; i < 12; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
          f << '"' << c + 1 << "\",\"" << words[c][rng.below(3)] << " news\",\"the "
            << words[c][rng.below(3)] << " and " << words[c][rng.below(3)] << " today\"\n";
        }
      }
    }
    for (const char* cls : {"alpha", "beta", "gamma"}) {
      std::ofstream(dir / "ng" / cls / "1.txt") << cls << " text";
    }
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

std::vector<std::string> train_args(const Workspace& w, const std::string& metrics,
                                    const std::string& model, const std::string& mode = "gated") {
  return {"train", "--data-dir", w.dir.string(), "--format", "agnews", "--mode", mode,
          "--seed", "7", "--epochs", "2", "--batch-size", "8", "--lr", "0.01",
          "--embed-dim", "8", "--hidden", "4", "--metrics-out", w.path(metrics), "--out",
          w.path(model), "--report-out", w.path(model + ".json")};
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"train", "--nope"}).code == 1);
  CHECK(run({"train", "--data-dir", "x", "--mode", "fancy"}).code == 1);
  CHECK(run({"predict", "--model", "m"}).code == 1);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
}

TEST_CASE("train, eval, predict and inspect") {
  Workspace w;
  const Run t1 = run(train_args(w, "m1.jsonl", "a.agff"));
  INFO(t1.err);
  REQUIRE(t1.code == 0);
  REQUIRE(run(train_args(w, "m2.jsonl", "b.agff")).code == 0);
  const std::string m1 = slurp(w.path("m1.jsonl"));
  CHECK(m1 == slurp(w.path("m2.jsonl")));
  CHECK(std::count(m1.begin(), m1.end(), '\n') == 2);
  CHECK(slurp(w.path("a.agff")) == slurp(w.path("b.agff")));

  const Run ev = run({"eval", "--model", w.path("a.agff"), "--data-dir", w.dir.string()});
  REQUIRE(ev.code == 0);
  const auto report = nlohmann::json::parse(ev.out);
  CHECK(report["total"] == 48);
  CHECK(report["confusion"].size() == 4);

  const Run pr = run({"predict", "--model", w.path("a.agff"), "--text", "Minister visits embassy",
                      "--top-k", "2"});
  REQUIRE(pr.code == 0);
  const auto pred = nlohmann::json::parse(pr.out);
  CHECK(pred.contains("label_name"));
  CHECK(pred["probs"].size() == 4);
  CHECK(pred["top_attention"].size() == 2);

  const Run ins = run({"inspect", "--model", w.path("a.agff"), "--data-dir", w.dir.string(),
                       "--report-out", w.path("gate.json")});
  REQUIRE(ins.code == 0);
  const auto gate = nlohmann::json::parse(slurp(w.path("gate.json")));
  CHECK(gate["documents"] == 48);
  const Run forced = run({"inspect", "--model", w.path("a.agff"), "--data-dir", w.dir.string(),
                          "--force-gate", "1"});
  CHECK(nlohmann::json::parse(forced.out)["global_mean_gate"] == 1.0);

  const Run vocab = run({"build-vocab", "--data-dir", w.path("train.csv"), "--max-terms", "5",
                         "--out", w.path("vocab.json")});
  REQUIRE(vocab.code == 0);
  CHECK(nlohmann::json::parse(slurp(w.path("vocab.json")))["tfidf_vocab"]["terms"].size() == 5);
}

TEST_CASE("data and format errors exit 2") {
  Workspace w;
  CHECK(run({"train", "--data-dir", w.path("missing")}).code == 2);
  REQUIRE(run(train_args(w, "m.jsonl", "s.agff", "semantic_only")).code == 0);

  const Run mismatch = run({"eval", "--model", w.path("s.agff"), "--data-dir", w.path("ng"),
                            "--format", "newsgroups"});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("classes") != std::string::npos);

  CHECK(run({"inspect", "--model", w.path("s.agff"), "--data-dir", w.dir.string()}).code == 2);

  std::string bytes = slurp(w.path("s.agff"));
  bytes[0] = 'X';
  std::ofstream(w.path("bad.agff"), std::ios::binary) << bytes;
  CHECK(run({"predict", "--model", w.path("bad.agff"), "--text", "x"}).code == 2);
  CHECK(run({"predict", "--model", w.path("none.agff"), "--text", "x"}).code == 2);
  CHECK(run({"train", "--data-dir", w.dir.string(), "--lr", "-1"}).code == 1);
}
