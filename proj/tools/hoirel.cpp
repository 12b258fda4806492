// Copyright 2026 The hoirel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// hoirel: command-line front end for the relationship benchmark pipeline.
//
// Exit codes: 0 success, 1 stage failure, 2 usage error or missing input.

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "hoirel/config.hpp"
#include "hoirel/pipeline.hpp"
#include "hoirel/synthetic.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out_dir;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration file (key = value lines)");
  cmd->add_option("-o,--out", o.out_dir, "Output directory (overrides out_dir)");
  cmd->add_option("--set", o.set, "Override a config key, e.g. --set epochs=5")->type_name("KEY=VALUE");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--threads", o.threads, "Worker threads for data-parallel stages");
}

hoirel::RunConfig resolve(const CommonOptions& o, std::vector<std::string> extra) {
  std::vector<std::string> overrides = o.set;
  if (!o.out_dir.empty()) overrides.push_back("out_dir=" + o.out_dir);
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (o.threads) overrides.push_back("threads=" + std::to_string(*o.threads));
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  return hoirel::load_config(o.config, overrides);
}

void report_error(const std::string& stage, const std::string& kind, const std::string& message) {
  const hoirel::json j = {{"stage", stage}, {"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-centric visual relationship benchmark pipeline"};
  app.require_subcommand(1);
  CommonOptions common;
  std::vector<std::string> extra;
  std::function<hoirel::json(const hoirel::RunConfig&)> stage;

  auto make = [&](const char* name, const char* help, auto fn) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    cmd->callback([&, fn] { stage = fn; });
    return cmd;
  };

  make("ingest", "Clean raw annotations and build the vocabulary", hoirel::run_ingest);
  auto* stats = make("stats", "Dataset statistics and rank-frequency table", hoirel::run_stats);
  stats->add_flag_callback("--global", [&] { extra.push_back("stats_global=true"); },
                           "Count long-tail types over all images instead of the training split");
  auto* split = make("split", "Build train / test_seen / test_zeroshot splits", hoirel::run_split);
  split->add_option_function<std::size_t>(
      "--train-size", [&](std::size_t n) { extra.push_back("train_size=" + std::to_string(n)); }, "Training images");
  split->add_option_function<std::size_t>(
      "--test-seen-size", [&](std::size_t n) { extra.push_back("test_seen_size=" + std::to_string(n)); },
      "Seen-test images");
  make("filter-web", "Score and filter the web corpus", hoirel::run_filter_web);
  auto* train = make("train", "Train the two-branch metric model", hoirel::run_train);
  train->add_option_function<std::size_t>(
      "--epochs", [&](std::size_t n) { extra.push_back("epochs=" + std::to_string(n)); }, "Training epochs");
  auto* infer = make("infer", "Predict relationships for the test images", hoirel::run_infer);
  infer->add_option_function<std::size_t>(
      "--top-k", [&](std::size_t n) { extra.push_back("top_k=" + std::to_string(n)); }, "Predicates kept per pair");
  infer->add_option_function<std::size_t>(
      "--neighbors", [&](std::size_t n) { extra.push_back("neighbors=" + std::to_string(n)); },
      "Nearest neighbours retrieved per pair");
  infer->add_option_function<std::string>(
      "--aggregation", [&](const std::string& s) { extra.push_back("aggregation=" + s); },
      "Neighbour aggregation: best or vote");

  std::vector<std::string> suites;
  auto* eval = app.add_subcommand("eval", "Score predictions (Recall@50/100, top-1/3)");
  add_common(eval, common);
  eval->add_option("--suite", suites, "Suites to run: full, longtail, zeroshot (default all)");
  eval->add_option_function<std::string>(
      "--predictions", [&](const std::string& p) { extra.push_back("predictions=" + p); },
      "Prediction JSONL (default <out>/predictions.jsonl)");
  eval->add_option_function<std::string>(
      "--predicate-predictions", [&](const std::string& p) { extra.push_back("predicate_predictions=" + p); },
      "Predictions made from ground-truth boxes, scored for predicate detection");
  eval->callback([&] {
    stage = [&](const hoirel::RunConfig& cfg) {
      std::vector<hoirel::Suite> chosen;
      for (const auto& s : suites) chosen.push_back(hoirel::parse_suite(s));
      if (chosen.empty()) chosen.assign(hoirel::kSuites.begin(), hoirel::kSuites.end());
      return hoirel::run_eval(cfg, chosen);
    };
  });
  make("report", "Aggregate eval reports into summary.json / summary.csv", hoirel::run_report);
  make("run", "Run every stage in order", hoirel::run_all);

  std::string synth_dir;
  hoirel::SyntheticOptions synth_opt;
  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark fixture");
  synth->add_option("dir", synth_dir, "Output directory")->required();
  synth->add_option("--images", synth_opt.images, "Number of images");
  synth->add_option("--seed", synth_opt.seed, "Random seed");
  synth->add_option("--dim", synth_opt.dim, "Feature dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") {
      const auto s = hoirel::write_synthetic_fixture(synth_dir, synth_opt);
      std::cout << hoirel::json{{"images", s.images},
                                {"relationships", s.relationships},
                                {"union_features", s.union_features},
                                {"web_samples", s.web_samples}}
                       .dump()
                << '\n';
      return 0;
    }
    const auto cfg = resolve(common, extra);
    std::cout << stage(cfg).dump() << '\n';
    return 0;
  } catch (const hoirel::InputError& e) {
    report_error(name, "input", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(name, "stage", e.what());
    return 1;
  }
}
