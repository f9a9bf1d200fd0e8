// Copyright 2026 The procal-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "procal/procal.hpp"

namespace {

enum exit_code : int
{
  exit_ok = 0,
  exit_usage = 1,
  exit_validation = 2,
  exit_pipeline = 3,
};

std::optional<procal::Current> parse_current_ua(const std::string& p_text)
{
  if (p_text.empty()) {
    return std::nullopt;
  }
  return procal::Current(procal::parse_fixed(p_text, 6));
}

std::optional<procal::Voltage> parse_voltage_uv(const std::string& p_text)
{
  if (p_text.empty()) {
    return std::nullopt;
  }
  return procal::Voltage(procal::parse_fixed(p_text, 3));
}

procal::Nanos parse_period(const std::string& p_text)
{
  const auto period = procal::parse_us(p_text);
  if (period.count() <= 0) {
    throw procal::ValidationError("--period-us must be positive");
  }
  return period;
}

void print_range(const procal::PlanOutcome& p_outcome)
{
  const auto& r = p_outcome.range;
  std::cout << fmt::format("plan steps        {}{}\n",
                           p_outcome.plan.steps.size(),
                           p_outcome.plan.truncated ? " (truncated)" : "");
  if (p_outcome.plan.kind == procal::OutputKind::current) {
    std::cout << fmt::format("current span      {} .. {} uA\n",
                             procal::format_fixed(r.min.current.count(), 6),
                             procal::format_fixed(r.max.current.count(), 6));
    std::cout << fmt::format("finest step       {} uA\n",
                             procal::format_fixed(r.finest_current_step.count(), 6));
    std::cout << fmt::format("largest gap       {} uA\n",
                             procal::format_fixed(r.largest_current_gap.count(), 6));
  } else {
    std::cout << fmt::format("voltage span      {} .. {} uV\n",
                             procal::format_fixed(r.min.voltage.count(), 3),
                             procal::format_fixed(r.max.voltage.count(), 3));
    std::cout << fmt::format("finest step       {} uV\n",
                             procal::format_fixed(r.finest_voltage_step.count(), 3));
    std::cout << fmt::format("largest gap       {} uV\n",
                             procal::format_fixed(r.largest_voltage_gap.count(), 3));
  }
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "procal: programmable calibrator simulator" };
  app.require_subcommand(1);
  app.set_version_flag("--version", procal::tool_version);

  // plan
  auto* plan = app.add_subcommand("plan", "Build the sweep ladder and analyse its range");
  std::string plan_config;
  std::string plan_mode = "current";
  std::string plan_i_max;
  std::string plan_v_min;
  std::string plan_out = ".";
  plan->add_option("--config", plan_config, "Board configuration file");
  plan->add_option("--mode", plan_mode, "Output mode")
    ->check(CLI::IsMember({ "current", "voltage" }));
  plan->add_option("--i-max-ua", plan_i_max, "Stop before the first step reaching this current");
  plan->add_option("--v-min-uv", plan_v_min, "Stop before the first step at or below this voltage");
  plan->add_option("--out-dir", plan_out, "Output directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a plan against simulated instruments");
  std::string sweep_plan;
  std::string sweep_dut;
  std::string sweep_dmm;
  std::uint64_t sweep_seed = 0;
  std::string sweep_period = "5000";
  std::string sweep_out = ".";
  sweep->add_option("--plan", sweep_plan, "Plan file")->required();
  sweep->add_option("--dut-preset", sweep_dut, "Device preset name or file")->required();
  sweep->add_option("--dmm-preset", sweep_dmm, "Reference preset name or file")->required();
  sweep->add_option("--seed", sweep_seed, "Random seed");
  sweep->add_option("--period-us", sweep_period, "Time between configurations");
  sweep->add_option("--out-dir", sweep_out, "Output directory");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-issue a recorded event log to a fresh board");
  std::string replay_plan;
  std::string replay_events;
  std::string replay_settling;
  replay->add_option("--plan", replay_plan, "Plan file")->required();
  replay->add_option("--events", replay_events, "Event log")->required();
  replay->add_option("--settling", replay_settling, "Settling log")->required();

  // pair
  auto* pair = app.add_subcommand("pair", "Match traces to settle stamps");
  std::string pair_log;
  std::string pair_dut;
  std::string pair_ref;
  std::string pair_out = ".";
  pair->add_option("--settling", pair_log, "Settling log")->required();
  pair->add_option("--dut", pair_dut, "Device trace")->required();
  pair->add_option("--ref", pair_ref, "Reference trace")->required();
  pair->add_option("--out-dir", pair_out, "Output directory");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit a correction and report the error");
  std::string cal_pairs;
  std::string cal_method = "auto";
  bool cal_no_holdout = false;
  std::string cal_out = ".";
  calibrate->add_option("--pairs", cal_pairs, "Pairs file")->required();
  calibrate->add_option("--method", cal_method, "poly:N, lut:N or auto");
  calibrate->add_flag("--no-holdout", cal_no_holdout, "Score on the training pairs");
  calibrate->add_option("--out-dir", cal_out, "Output directory");

  // demo
  auto* demo = app.add_subcommand("demo", "Run one case study end to end");
  std::string demo_case;
  std::uint64_t demo_seed = 0;
  std::string demo_period = "5000";
  std::string demo_out = "demo-out";
  std::string demo_cases_help;
  for (const auto& c : procal::demo_cases()) {
    demo_cases_help += (demo_cases_help.empty() ? "" : ", ") + c.name;
  }
  demo->add_option("case", demo_case, "One of: " + demo_cases_help)->required();
  demo->add_option("--seed", demo_seed, "Random seed");
  demo->add_option("--period-us", demo_period, "Time between configurations");
  demo->add_option("--out-dir", demo_out, "Output directory");

  // rerun
  auto* rerun = app.add_subcommand("rerun", "Regenerate a run from its manifest");
  std::string rerun_manifest;
  std::string rerun_out;
  rerun->add_option("--manifest", rerun_manifest, "Manifest file")->required();
  rerun->add_option("--out-dir", rerun_out, "Output directory (default: the manifest's)");

  // preset
  auto* preset = app.add_subcommand("preset", "Print a built-in instrument preset");
  std::string preset_name;
  preset->add_option("name", preset_name, "Preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*plan) {
      procal::PlanOptions opts;
      if (!plan_config.empty()) {
        opts.config_path = plan_config;
      }
      opts.kind = procal::parse_output_kind(plan_mode);
      opts.i_max = parse_current_ua(plan_i_max);
      opts.v_min = parse_voltage_uv(plan_v_min);
      opts.out_dir = plan_out;
      print_range(procal::cmd_plan(opts));
    } else if (*sweep) {
      procal::SweepOptions opts;
      opts.plan_path = sweep_plan;
      opts.dut_preset = sweep_dut;
      opts.dmm_preset = sweep_dmm;
      opts.seed = sweep_seed;
      opts.period = parse_period(sweep_period);
      opts.out_dir = sweep_out;
      const auto outcome = procal::cmd_sweep(opts);
      std::cout << fmt::format("steps {}  events {}  dut samples {}  ref samples {}\n",
                               outcome.result.log.entries.size(),
                               outcome.result.events.size(),
                               outcome.dut.size(),
                               outcome.ref.size());
    } else if (*replay) {
      const auto steps = procal::cmd_replay(replay_plan, replay_events, replay_settling);
      std::cout << fmt::format("replay matches the settling log at all {} steps\n", steps);
    } else if (*pair) {
      const auto obs = procal::cmd_pair(pair_log, pair_dut, pair_ref, pair_out);
      std::cout << fmt::format("pairs {}  skipped dut {}  skipped ref {}\n",
                               obs.pairs.size(), obs.skipped_dut, obs.skipped_ref);
    } else if (*calibrate) {
      procal::CalibrateOptions opts;
      opts.pairs_path = cal_pairs;
      opts.method = cal_method;
      opts.holdout = !cal_no_holdout;
      opts.out_dir = cal_out;
      const auto outcome = procal::cmd_calibrate(opts);
      procal::print_report_table(std::cout, "calibrate", outcome.report, outcome.model);
      if (outcome.failed) {
        std::cerr << "error: calibrated error is not below the uncalibrated error\n";
        return exit_pipeline;
      }
    } else if (*demo) {
      const auto outcome =
        procal::cmd_demo(demo_case, demo_seed, demo_out, parse_period(demo_period));
      procal::print_report_table(std::cout, demo_case, outcome.report, outcome.model);
      if (outcome.failed) {
        std::cerr << "error: calibrated error is not below the uncalibrated error\n";
        return exit_pipeline;
      }
    } else if (*rerun) {
      const auto out_dir = rerun_out.empty()
                             ? std::filesystem::path(rerun_manifest).parent_path().string()
                             : rerun_out;
      const auto result = procal::cmd_rerun(rerun_manifest, out_dir.empty() ? "." : out_dir);
      procal::print_report_table(
        std::cout, result.outcome.manifest.case_name, result.outcome.report, result.outcome.model);
      if (!result.mismatched.empty()) {
        for (const auto& role : result.mismatched) {
          std::cerr << "error: regenerated " << role << " differs from the manifest\n";
        }
        return exit_pipeline;
      }
    } else if (*preset) {
      std::cout << procal::preset_text(preset_name);
    }
  } catch (const procal::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const procal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_pipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_pipeline;
  }
  return exit_ok;
}
