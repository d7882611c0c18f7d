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


// gaplab command-line entry point.

#include <iostream>

#include <CLI11.hpp>

#include "gaplab/pipeline/pipeline.hpp"

namespace {

using gaplab::pipeline::Stage;

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

int run(const Args& args, Stage until) {
  auto config = gaplab::pipeline::load_config(args.config, args.seed);
  if (!args.out.empty()) config.output_dir = args.out;
  gaplab::pipeline::RunOptions opts;
  opts.until = until;
  if (!args.quiet) opts.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  const auto manifest = gaplab::pipeline::run_pipeline(config, opts);
  if (!args.quiet) {
    std::cerr << "run directory: " << config.output_dir.string() << '\n';
    if (!manifest.is_null()) std::cerr << "manifest: " << (config.output_dir / "manifest.json").string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filler-gap generalization experiments with LSTM language models"};
  app.set_version_flag("--version", std::string(gaplab::pipeline::kToolVersion));
  app.require_subcommand(1);

  Args args;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "generate test paradigms"},
      {"synth-corpus", "build the base training corpus"},
      {"augment", "add augmentation sentences and build the vocabulary"},
      {"train", "train the baseline and augmented models"},
      {"score", "score every paradigm under every model"},
      {"analyze", "fit the regression models and derive verdicts"},
      {"report", "write the Markdown report and chart"},
      {"pipeline", "run every stage and write the manifest"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help + " (earlier stages run first when their artifacts are missing)");
    sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "replace the config's seed");
    sub->add_option("--out", args.out, "run directory (default: the config's output_dir)");
    sub->add_flag("--quiet", args.quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const Stage until =
        sub->get_name() == "pipeline" ? Stage::report : gaplab::pipeline::parse_stage(sub->get_name());
    return run(args, until);
  } catch (const gaplab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
