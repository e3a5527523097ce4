/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// curpo: dataset generation, curriculum sorting, GRPO training, evaluation
// and correlation statistics for the synthetic grounding lab.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "curpo/analysis.hpp"
#include "curpo/cli.hpp"
#include "curpo/config.hpp"
#include "curpo/io.hpp"
#include "curpo/log.hpp"

namespace {

int fail(int code, std::string_view kind, std::string_view msg) {
  std::cerr << "error: " << kind << ": " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace curpo;

  CLI::App app{"CuRPO grounding lab (version " + std::string(cli::version()) + ")"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::version()));
  app.footer("Environment: CURPO_LOG=error|info|debug controls stderr verbosity.\n"
             "Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.");

  // gen
  cli::GenOptions gen;
  std::string gen_difficulty = "uniform", gen_mode = "cot", gen_out;
  long long gen_n = 500;
  auto* g = app.add_subcommand("gen", "Generate a synthetic grounding dataset (JSONL)");
  g->add_option("--n", gen_n, "number of samples")->capture_default_str();
  g->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();
  g->add_option("--out", gen_out, "output JSONL path")->required();
  g->add_option("--difficulty", gen_difficulty, "uniform | hard (Beta(5,2))")
      ->check(CLI::IsMember({"uniform", "hard"}))
      ->capture_default_str();
  g->add_option("--cots", gen.task.cots_per_sample, "CoTs per sample")->capture_default_str();
  g->add_option("--feature-noise", gen.task.feature_noise, "geometry noise std at d=1")
      ->capture_default_str();
  g->add_flag("--score", gen.score, "fill rollout_rewards with the initial policy");
  g->add_option("--model-seed", gen.model_seed, "initial-policy seed for --score")
      ->capture_default_str();
  g->add_option("--group-size", gen.group_size, "rollouts per sample for --score")
      ->capture_default_str();
  g->add_option("--hidden", gen.hidden, "policy hidden width for --score")->capture_default_str();
  g->add_option("--mode", gen_mode, "output mode for --score: cot | direct")
      ->check(CLI::IsMember({"cot", "direct"}))
      ->capture_default_str();

  // sort
  cli::SortOptions sort;
  std::string sort_criterion = "length", sort_in, sort_out;
  auto* s = app.add_subcommand("sort", "Write a curriculum manifest for a JSONL dataset");
  s->add_option("--in", sort_in, "input JSONL (cots or cot_token_counts per line)")->required();
  s->add_option("--out", sort_out, "output manifest JSONL")->required();
  s->add_option("--criterion", sort_criterion, "length | reward | random | length_then_reward")
      ->check(CLI::IsMember({"length", "reward", "random", "length_then_reward"}))
      ->capture_default_str();
  s->add_option("--bin-width", sort.criterion.bin_width, "CoT-length bin width in tokens")
      ->capture_default_str();
  s->add_option("--phases,-M", sort.phases, "number of curriculum phases")->capture_default_str();
  s->add_option("--seed", sort.criterion.seed, "seed for the random criterion")
      ->capture_default_str();
  s->add_flag("--reward-ascending", sort.criterion.reward_ascending,
              "sort by literal ascending reward (hard first)");

  // train
  std::string train_config;
  auto* t = app.add_subcommand("train", "Run curriculum GRPO training from a config file");
  t->add_option("--config", train_config, "run config (JSON)")->required();
  t->footer(
      "Config keys (defaults): seed=1, dataset, output_dir, mode=cot,\n"
      "  curriculum.{criterion=length, bin_width=50, phases=3, cumulative_phases=false,\n"
      "              reward_ascending=false, random_seed=<seed>, manifest},\n"
      "  grpo.{group_size=8, clip_eps=0.2, kl_beta=0.04, sigma_min=1e-8, learning_rate=1.0,\n"
      "        total_steps=600, batch_size=16, updates_per_generation=1, optimizer=sgd},\n"
      "  model.{hidden=64, classes=16, canvas=16}.\n"
      "Relative paths resolve against the config file's directory.");

  // eval
  cli::EvalOptions ev;
  std::string eval_params, eval_dataset, eval_out, eval_mode = "cot";
  auto* e = app.add_subcommand("eval", "Greedy evaluation: mIoU, mAP and per-category AP");
  e->add_option("--params", eval_params, "params file from train");
  e->add_option("--dataset", eval_dataset, "dataset JSONL")->required();
  e->add_option("--out", eval_out, "structured report (JSON)");
  e->add_option("--mode", eval_mode, "cot | direct")
      ->check(CLI::IsMember({"cot", "direct"}))
      ->capture_default_str();
  e->add_option("--canvas", ev.canvas, "canvas size")->capture_default_str();
  e->add_flag("--oracle", ev.oracle, "emit the ground-truth box (upper-bound check)");

  // stats
  cli::StatsOptions st;
  std::string stats_dataset, stats_csv, stats_json;
  auto* x = app.add_subcommand("stats", "Correlate average CoT length with mean reward");
  x->add_option("--dataset", stats_dataset, "dataset JSONL with rollout_rewards")->required();
  x->add_option("--out", stats_csv, "binned length -> reward table (CSV)");
  x->add_option("--json", stats_json, "coefficients (JSON)");
  x->add_option("--bin-width", st.bin_width, "length bin width in tokens")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return fail(cli::kExitUsage, "usage", ex.what());
  }

  try {
    if (*g) {
      if (gen_n < 1) throw cli::UsageError("--n: must be >= 1");
      gen.n = static_cast<std::size_t>(gen_n);
      gen.out = gen_out;
      gen.task.difficulty = gen_difficulty == "hard" ? taskgen::DifficultyDistribution::HardSkewed
                                                     : taskgen::DifficultyDistribution::Uniform;
      gen.mode = parse_output_mode(gen_mode);
      cli::cmd_gen(gen);
    } else if (*s) {
      sort.in = sort_in;
      sort.out = sort_out;
      sort.criterion.kind = curriculum::parse_criterion(sort_criterion);
      cli::cmd_sort(sort);
    } else if (*t) {
      cli::cmd_train(std::filesystem::path(train_config));
    } else if (*e) {
      if (!eval_params.empty()) ev.params = eval_params;
      if (!eval_out.empty()) ev.out = eval_out;
      ev.dataset = eval_dataset;
      ev.mode = parse_output_mode(eval_mode);
      cli::cmd_eval(ev);
    } else if (*x) {
      st.dataset = stats_dataset;
      if (!stats_csv.empty()) st.out_csv = stats_csv;
      if (!stats_json.empty()) st.out_json = stats_json;
      cli::cmd_stats(st);
    }
  } catch (const cli::UsageError& ex) {
    return fail(cli::kExitUsage, "usage", ex.what());
  } catch (const ConfigError& ex) {
    return fail(cli::kExitUsage, "config", ex.what());
  } catch (const MissingStatistic& ex) {
    return fail(cli::kExitUsage, "missing_field", ex.what());
  } catch (const io::FormatError& ex) {
    return fail(cli::kExitRuntime, "format", ex.what());
  } catch (const analysis::UndefinedCorrelation& ex) {
    return fail(cli::kExitRuntime, "undefined_correlation", ex.what());
  } catch (const std::exception& ex) {
    return fail(cli::kExitRuntime, "runtime", ex.what());
  }
  return cli::kExitOk;
}
