// Copyright 2026 The voxid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "support/testing.hpp"
#include "voxid/errors.hpp"
#include "voxid/features.hpp"
#include "voxid/pipeline.hpp"
#include "voxid/util.hpp"

namespace {

namespace fs = std::filesystem;
namespace pl = voxid::pipeline;
using nlohmann::json;

json read_json(const fs::path& p) { return json::parse(voxid::read_file(p)); }

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Every regular file under root, keyed by its relative path, with
// timestamps and wall times removed.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    std::string text = voxid::read_file(e.path());
    if (rel.size() > 14 && rel.substr(rel.size() - 14) == "-manifest.json") {
      auto j = json::parse(text);
      j.erase("started_at");
      j.erase("finished_at");
      text = j.dump();
    }
    if (rel.ends_with("train-log.jsonl")) {
      // Per-epoch wall time is the one measured field in the log.
      std::istringstream in(text);
      std::string line;
      text.clear();
      while (std::getline(in, line)) {
        auto j = json::parse(line);
        j.erase("wall_seconds");
        text += j.dump() + "\n";
      }
    }
    files[rel] = std::move(text);
  }
  return files;
}

struct Run {
  fs::path corpus, mel, train, eval, bias, tune;
};

Run run_all(const fs::path& root) {
  Run r{root / "synth" / "corpus", root / "mel",  root / "train",
        root / "eval",             root / "bias", root / "tune"};
  pl::SynthOptions so;
  so.out_dir = root / "synth";
  so.speakers = 3;
  so.utterances = 4;
  so.accents = 2;
  so.seed = 21;
  pl::run_synth(so);

  pl::ExtractOptions eo;
  eo.corpus_dir = r.corpus;
  eo.out_dir = r.mel;
  pl::run_extract(eo);

  pl::TrainOptions to;
  to.data_dir = r.mel;
  to.model = "model-5";
  to.out_dir = r.train;
  to.config.batch_size = 6;
  to.config.max_epochs = 2;
  to.split = {0.5, 0.25, 0.25};
  to.seed = 4;
  pl::run_train(to);

  pl::EvaluateOptions vo;
  vo.checkpoint = r.train / "checkpoint.json";
  vo.data_dir = r.mel;
  vo.out_dir = r.eval;
  vo.top_k = 2;
  pl::run_evaluate(vo);

  pl::BiasOptions bo;
  bo.predictions = r.eval / "predictions.csv";
  bo.metadata = r.mel / "metadata.csv";
  bo.out_dir = r.bias;
  pl::run_bias(bo);

  pl::TuneOptions uo;
  uo.data_dir = r.mel;
  uo.model = "model-5";
  uo.out_dir = r.tune;
  uo.trials = 2;
  uo.config.batch_size = 6;
  uo.config.max_epochs = 1;
  uo.split = {0.5, 0.25, 0.25};
  uo.seed = 4;
  pl::run_tune(uo);
  return r;
}

}  // namespace

TEST_CASE("stages produce their artifacts and manifests") {
  voxid::testing::TempDir dir("pipeline");
  const auto r = run_all(dir.path());

  const auto sm = read_json(dir / "synth" / "synth-manifest.json");
  for (const char* key : {"run_id", "stage", "config", "inputs", "outputs", "started_at",
                          "finished_at"}) {
    CHECK(sm.contains(key));
  }
  CHECK(sm["stage"] == "synth");

  // One feature file per 3 s chunk, each 64 x 298.
  const auto index = voxid::read_file(r.mel / "index.csv");
  CHECK(index.rfind("file,speaker_id\n", 0) == 0);
  CHECK(count_lines(index) == 13);
  std::size_t vxf = 0;
  for (const auto& e : fs::recursive_directory_iterator(r.mel)) {
    if (e.path().extension() != ".vxf") continue;
    ++vxf;
    const auto m = voxid::features::read_vxf(e.path());
    CHECK(m.bands() == 64);
    CHECK(m.frames() == 298);
  }
  CHECK(vxf == 12);
  CHECK(fs::exists(r.mel / "metadata.csv"));
  CHECK(read_json(r.mel / "extract-manifest.json")["outputs"].size() == 14);

  const auto side = read_json(r.train / "checkpoint.json");
  CHECK(side["class_labels"].size() == 3);
  CHECK(side["input"]["bands"] == 64);
  CHECK(side["input"]["frames"] == 298);
  CHECK(side["split"]["test"].size() == 3);
  CHECK(side["split"]["train"].size() == 6);
  CHECK(side["model_spec"]["name"] == "model-5");
  CHECK(count_lines(voxid::read_file(r.train / "train-log.jsonl")) ==
        side["training"]["epochs_run"].get<std::size_t>());

  const auto metrics = read_json(r.eval / "metrics.json");
  for (const char* key : {"label", "best_val_accuracy", "test_accuracy", "test_loss", "precision",
                          "recall", "f1", "epoch_converged"}) {
    CHECK(metrics.contains(key));
  }
  CHECK(metrics["label"] == "model-5-Mel");
  CHECK(metrics["num_items"] == 3);
  CHECK(metrics["averaging"] == "weighted");
  CHECK(fs::exists(r.eval / "confusion.csv"));
  CHECK(fs::exists(r.eval / "confusion-top2.csv"));
  CHECK(count_lines(voxid::read_file(r.eval / "predictions.csv")) == 4);

  const auto bias = read_json(r.bias / "bias-report.json");
  CHECK(bias.contains("gender"));
  CHECK(bias.contains("accent"));
  CHECK(fs::exists(r.bias / "bias-gender.csv"));
  CHECK(fs::exists(r.bias / "bias-accent.csv"));

  CHECK(count_lines(voxid::read_file(r.tune / "tuning-results.jsonl")) == 2);
  CHECK(read_json(r.tune / "best-trial.json").contains("model_spec"));

  pl::ReportOptions ro;
  ro.metrics = {r.eval / "metrics.json"};
  ro.train_logs = {r.train / "train-log.jsonl"};
  ro.out_file = dir / "report" / "results.csv";
  pl::run_report(ro);
  const auto csv = voxid::read_file(ro.out_file);
  CHECK(csv.rfind(std::string(pl::kReportHeader) + "\n", 0) == 0);
  CHECK(count_lines(csv) == 2);
  CHECK(csv.find("\nmodel-5-Mel,") != std::string::npos);

  ro.train_logs.clear();
  pl::run_report(ro);
  CHECK(voxid::read_file(ro.out_file).find(",N/A\n") != std::string::npos);

  // The weights file alone locates its sidecar.
  const auto ck = pl::load_checkpoint(r.train / "checkpoint.vxw");
  CHECK(ck.class_labels.size() == 3);
  CHECK(ck.test_files.size() == 3);
}

TEST_CASE("stage input errors") {
  voxid::testing::TempDir dir("pipeline-err");
  const auto r = run_all(dir.path());

  // MFCC features do not match a mel checkpoint.
  pl::ExtractOptions eo;
  eo.corpus_dir = r.corpus;
  eo.out_dir = dir / "mfcc";
  eo.kind = voxid::features::FeatureKind::kMfcc;
  pl::run_extract(eo);
  pl::EvaluateOptions vo;
  vo.checkpoint = r.train / "checkpoint.json";
  vo.data_dir = dir / "mfcc";
  vo.out_dir = dir / "eval-mfcc";
  CHECK_THROWS_AS(pl::run_evaluate(vo), voxid::ConfigError);

  pl::ExtractOptions missing;
  missing.corpus_dir = dir / "nowhere";
  missing.out_dir = dir / "x";
  CHECK_THROWS_AS(pl::run_extract(missing), voxid::IoError);
  CHECK_THROWS_AS(pl::load_checkpoint(dir / "nothing.json"), voxid::IoError);

  pl::ReportOptions ro;
  ro.out_file = dir / "r.csv";
  CHECK_THROWS_AS(pl::run_report(ro), voxid::InvalidArgumentError);

  // Extraction with two workers writes identical files.
  pl::ExtractOptions two;
  two.corpus_dir = r.corpus;
  two.out_dir = dir / "mel2";
  two.threads = 2;
  pl::run_extract(two);
  CHECK(snapshot(r.mel) == snapshot(dir / "mel2"));
  // Manifests list outputs relative to the stage directory.
  for (const auto& o : read_json(r.mel / "extract-manifest.json")["outputs"]) {
    CHECK(o.get<std::string>().find(dir.path().string()) == std::string::npos);
  }
}

TEST_CASE("two full runs are byte-identical") {
  voxid::testing::TempDir a("pipeline-a");
  voxid::testing::TempDir b("pipeline-b");
  run_all(a.path());
  run_all(b.path());
  const auto first = snapshot(a.path());
  const auto second = snapshot(b.path());
  REQUIRE(first.size() == second.size());
  for (const auto& [name, text] : first) {
    INFO(name);
    CHECK(second.at(name) == text);
  }
}
