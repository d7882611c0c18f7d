/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */


#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "gaplab/client/client.hpp"
#include "gaplab/corpus/vocab.hpp"
#include "gaplab/pipeline/pipeline.hpp"
#include "test_util.hpp"

namespace gaplab::pipeline {
namespace {

using nlohmann::json;

fs::path tiny_config() { return testing::source_dir() / "tests/configs/tiny.json"; }

ExperimentConfig tiny(const fs::path& out) {
  auto c = load_config(tiny_config());
  c.output_dir = out;
  return c;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc, testing::source_dir());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, MinimalConfigGetsDefaults) {
  const auto c = parse_config(json::object(), testing::source_dir());
  EXPECT_EQ(c.lm_preset, "desk");
  EXPECT_EQ(c.lm.embed_dim, 64u);
  EXPECT_EQ(c.lm.hidden_dim, 128u);
  EXPECT_EQ(c.lm.num_layers, 2u);
  EXPECT_EQ(c.constructions.size(), 5u);
  EXPECT_EQ(c.paradigms.items.at(Construction::clefting), 486u);
  EXPECT_EQ(c.paradigms.items.at(Construction::topicalization_no_intro), 161u);
  EXPECT_EQ(c.paradigms.items.at(Construction::tough_movement), 243u);
  EXPECT_FALSE(c.augmentation.has_value());
  EXPECT_EQ(c.thresholds.licensing_alpha, 0.001);
  EXPECT_EQ(c.output_dir, fs::path("runs/experiment"));
  EXPECT_TRUE(fs::exists(c.corpus.grammar));
  // Defaults are echoed in full.
  const auto echoed = config_to_json(c);
  EXPECT_EQ(echoed.at("lm").at("hidden_dim"), 128);
  EXPECT_EQ(echoed.at("paradigms").at("items").at("wh_movement"), 243);
}

TEST(Config, SeedsFollowTheTopLevelSeed) {
  auto c = parse_config({{"seed", 9}, {"augmentation", {{"construction", "clefting"}}}}, testing::source_dir());
  EXPECT_EQ(c.corpus.seed, 9u);
  EXPECT_EQ(c.lm.seed, 9u);
  EXPECT_EQ(c.augmentation->seed, 9u);
  c = parse_config({{"seed", 9}, {"lm", {{"seed", 3}}}}, testing::source_dir(), 11);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.corpus.seed, 11u);
  EXPECT_EQ(c.lm.seed, 3u);
}

TEST(Config, OddAugmentationCountIsRejected) {
  const auto msg = config_error({{"augmentation", {{"construction", "clefting"}, {"n", 863}}}});
  EXPECT_NE(msg.find("augmentation.n"), std::string::npos) << msg;
}

TEST(Config, UnknownConstructionListsValidNames) {
  const auto msg = config_error({{"constructions", {"clefting", "scrambling"}}});
  EXPECT_NE(msg.find("constructions[1]"), std::string::npos) << msg;
  EXPECT_NE(msg.find(valid_construction_names()), std::string::npos) << msg;
  EXPECT_NE(config_error({{"augmentation", {{"construction", "nope"}}}}).find("augmentation.construction"),
            std::string::npos);
}

TEST(Config, ErrorsCarryTheFieldPath) {
  EXPECT_NE(config_error({{"corpus", {{"tokns", 5}}}}).find("corpus.tokns: unknown field"), std::string::npos);
  EXPECT_NE(config_error({{"lm", {{"hidden_dim", "big"}}}}).find("lm.hidden_dim"), std::string::npos);
  EXPECT_NE(config_error({{"lm", {{"vocab_size", 10}}}}).find("lm.vocab_size"), std::string::npos);
  EXPECT_NE(config_error({{"thresholds", {{"island_alpha", 2}}}}).find("thresholds.island_alpha"), std::string::npos);
  EXPECT_NE(config_error({{"paradigms", {{"templates", "/nonexistent"}}}}).find("no template for"), std::string::npos);
  EXPECT_NE(config_error({{"corpus", {{"source", "text"}}}}).find("corpus.dir"), std::string::npos);
  EXPECT_NE(config_error({{"lm", {{"preset", "huge"}}}}).find("desk"), std::string::npos);
}

TEST(Config, RelativePathsResolveAgainstTheConfigFile) {
  testing::TempDir dir("cfg");
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "sub/c.json") << R"({"paradigms": {"lexicon": "../lex.json"}})";
  const auto c = load_config(dir / "sub/c.json");
  EXPECT_EQ(c.paradigms.lexicon, (dir.path() / "lex.json").lexically_normal());
}

TEST(Stages, NamesRoundTrip) {
  for (const char* n : {"gen", "synth-corpus", "augment", "train", "score", "analyze", "report"}) {
    EXPECT_EQ(to_string(parse_stage(n)), n);
  }
  EXPECT_THROW(parse_stage("deploy"), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Pipeline, ReportCoversEveryConstructionUnderBothModels) {
  testing::TempDir dir("run");
  const auto m = run_pipeline(tiny(dir.path()));
  ASSERT_TRUE(m.is_object());
  EXPECT_TRUE(verify_manifest(dir.path()).empty());
  const auto verdicts = report::read_tables(dir.path()).verdicts;
  EXPECT_EQ(verdicts.size(), 2u * 5u * report::criteria().size());
  const auto md = read_file(dir / "report/report.md");
  for (const std::string model : {"base", "aug"}) {
    for (Construction c : kAllConstructions) {
      EXPECT_NE(md.find("| " + model + " | " + std::string(to_string(c)) + " |"), std::string::npos);
    }
  }
  for (const char* f : {"config.json", "model_base.bin", "model_aug.bin", "scores/base.csv", "scores/aug.csv",
                        "fits.csv", "effects.csv", "report/effects.svg", "timings.json", "corpus/vocab.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(m.at("config").at("augmentation").at("n"), 40);
  EXPECT_FALSE(m.at("config").contains("output_dir"));
}

TEST(Pipeline, RerunsAreByteIdentical) {
  testing::TempDir a("run"), b("run");
  run_pipeline(tiny(a.path()));
  run_pipeline(tiny(b.path()));
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
  EXPECT_EQ(read_file(a / "report/report.md"), read_file(b / "report/report.md"));
}

TEST(Pipeline, ResumingRebuildsDeletedArtifactsIdentically) {
  testing::TempDir dir("run");
  run_pipeline(tiny(dir.path()));
  const auto before = read_file(dir / "manifest.json");
  const auto model_time = fs::last_write_time(dir / "model_base.bin");
  for (const char* f : {"scores", "report", "fits.csv", "effects.csv", "summaries.csv", "verdicts.csv",
                        "manifest.json", "model_aug.bin"}) {
    fs::remove_all(dir / f);
  }
  std::vector<std::string> log;
  RunOptions opts;
  opts.log = [&](const std::string& m) { log.push_back(m); };
  run_pipeline(tiny(dir.path()), opts);
  EXPECT_EQ(read_file(dir / "manifest.json"), before);
  EXPECT_EQ(fs::last_write_time(dir / "model_base.bin"), model_time);
  EXPECT_NE(std::find(log.begin(), log.end(), "synth-corpus: artifacts present, skipped"), log.end());
}

TEST(Pipeline, StoppingEarlyWritesNoManifest) {
  testing::TempDir dir("run");
  RunOptions opts;
  opts.until = Stage::augment;
  EXPECT_TRUE(run_pipeline(tiny(dir.path()), opts).is_null());
  EXPECT_TRUE(fs::exists(dir / "corpus/vocab.txt"));
  EXPECT_FALSE(fs::exists(dir / "model_base.bin"));
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
}

TEST(Pipeline, DifferentConfigInSameDirectoryIsRejected) {
  testing::TempDir dir("run");
  RunOptions opts;
  opts.until = Stage::gen;
  auto c = tiny(dir.path());
  run_pipeline(c, opts);
  c.seed += 1;
  EXPECT_THROW(run_pipeline(c, opts), ConfigError);
}

TEST(Pipeline, StageErrorNamesTheStageAndKeepsEarlierArtifacts) {
  testing::TempDir dir("run");
  auto c = tiny(dir.path());
  c.corpus.vocab_size = 10;  // too small to hold the paradigm words
  try {
    run_pipeline(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(std::string(e.what()).starts_with("stage augment: paradigm words missing")) << e.what();
  }
  EXPECT_TRUE(fs::exists(dir / "paradigms/clefting.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "corpus/base/train.txt"));

  testing::TempDir dir2("run");
  auto bad = tiny(dir2.path());
  bad.corpus.source = "text";
  bad.corpus.text_dir = dir2.path() / "missing";
  try {
    run_pipeline(bad);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::corpus);
    EXPECT_TRUE(std::string(e.what()).starts_with("stage synth-corpus:")) << e.what();
  }
}

TEST(Pipeline, RemoteModelFeedsTheSameAnalysis) {
  testing::TempDir dir("run");
  auto c = tiny(dir.path());
  RunOptions opts;
  opts.until = Stage::train;
  run_pipeline(c, opts);
  const auto vocab = corpus::Vocab::load(dir / "corpus/vocab.txt");
  const auto params = lm::load_checkpoint(dir / "model_base.bin");
  client::MockScoreServer server([&](const Tokens& words) {
    std::vector<double> lp;
    for (double b : lm::sequence_surprisal(params, vocab, words).bits) lp.push_back(-b * std::numbers::ln2);
    return lp;
  });
  c.remote = RemoteConfig{server.endpoint(), "mock"};
  // The remote section changes the config, so start a fresh directory.
  testing::TempDir fresh("run");
  c.output_dir = fresh.path();
  run_pipeline(c);
  const auto base = read_file(fresh / "scores/base.csv");
  const auto remote = read_file(fresh / "scores/mock.csv");
  EXPECT_EQ(base.substr(0, base.find('\n')), remote.substr(0, remote.find('\n')));
  const auto b = scoring::parse_scores_csv(base), r = scoring::parse_scores_csv(remote);
  ASSERT_EQ(b.size(), r.size());
  // float32 model evaluated in different batch layouts on the two sides
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i].bits, r[i].bits, 1e-6);
  const auto verdicts = report::read_tables(fresh.path()).verdicts;
  EXPECT_EQ(std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.model_id == "mock"; }),
            static_cast<long>(5 * report::criteria().size()));
}

// ---------------------------------------------------------------------------

int cli(const std::string& args) {
  const std::string cmd = std::string(GAPLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir("cli");
  EXPECT_EQ(cli("pipeline --quiet --config " + tiny_config().string() + " --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok/manifest.json"));
  EXPECT_EQ(cli("gen --quiet --config " + tiny_config().string() + " --out " + (dir / "gen").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "gen/paradigms/clefting.jsonl"));
  EXPECT_FALSE(fs::exists(dir / "gen/corpus"));

  std::ofstream(dir / "odd.json") << R"({"augmentation": {"construction": "clefting", "n": 3}})";
  EXPECT_EQ(cli("pipeline --config " + (dir / "odd.json").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli(""), 2);

  std::ofstream(dir / "text.json") << R"({"corpus": {"source": "text", "dir": "nowhere"}})";
  EXPECT_EQ(cli("synth-corpus --config " + (dir / "text.json").string() + " --out " + (dir / "t").string()), 1);
}

}  // namespace
}  // namespace gaplab::pipeline
