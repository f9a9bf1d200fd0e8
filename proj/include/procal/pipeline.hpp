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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "procal/calibration.hpp"
#include "procal/correlator.hpp"
#include "procal/hal.hpp"
#include "procal/instruments.hpp"
#include "procal/presets.hpp"
#include "procal/setup_file.hpp"
#include "procal/sweep.hpp"

/**
 * @file pipeline.hpp
 * @brief The file-chained stages behind the command line tool.
 *
 * Every stage reads its inputs from files and writes its outputs into an
 * output directory under fixed names, so a later stage can be rerun alone.
 */

namespace procal {

inline constexpr const char* tool_version = "0.1.0";

namespace files {
inline constexpr const char* config = "config.txt";
inline constexpr const char* plan = "plan.csv";
inline constexpr const char* range = "range.txt";
inline constexpr const char* events = "events.csv";
inline constexpr const char* settling = "settling.csv";
inline constexpr const char* dut_trace = "dut_trace.csv";
inline constexpr const char* ref_trace = "ref_trace.csv";
inline constexpr const char* pairs = "pairs.csv";
inline constexpr const char* model = "model.txt";
inline constexpr const char* report = "report.txt";
inline constexpr const char* residuals = "residuals.csv";
inline constexpr const char* manifest = "manifest.txt";
}  // namespace files

namespace detail {
inline std::string in_dir(const std::string& p_dir, const char* p_name)
{
  return (std::filesystem::path(p_dir) / p_name).string();
}

inline void ensure_dir(const std::string& p_dir)
{
  std::error_code ec;
  std::filesystem::create_directories(p_dir, ec);
  if (ec) {
    throw ValidationError("cannot create directory '" + p_dir + "': " + ec.message());
  }
}

inline std::string hex64(std::uint64_t p_value)
{
  return fmt::format("{:016x}", p_value);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// plan

struct PlanOptions
{
  std::optional<std::string> config_path;
  OutputKind kind = OutputKind::current;
  std::optional<Current> i_max;
  std::optional<Voltage> v_min;
  std::string out_dir = ".";
};

struct PlanOutcome
{
  SweepPlan plan;
  OutputRange range;
  Current finest_resolution{};
};

inline TextConfig range_to_text(const PlanOutcome& p_outcome)
{
  TextConfig doc;
  const auto& r = p_outcome.range;
  doc.set("range.mode", to_string(p_outcome.plan.kind));
  doc.set("range.levels", std::to_string(r.outputs.size()));
  doc.set("range.min_current_ua", format_fixed(r.min.current.count(), 6));
  doc.set("range.max_current_ua", format_fixed(r.max.current.count(), 6));
  doc.set("range.min_voltage_uv", format_fixed(r.min.voltage.count(), 3));
  doc.set("range.max_voltage_uv", format_fixed(r.max.voltage.count(), 3));
  doc.set("range.finest_current_step_ua", format_fixed(r.finest_current_step.count(), 6));
  doc.set("range.largest_current_gap_ua", format_fixed(r.largest_current_gap.count(), 6));
  doc.set("range.finest_voltage_step_uv", format_fixed(r.finest_voltage_step.count(), 3));
  doc.set("range.largest_voltage_gap_uv", format_fixed(r.largest_voltage_gap.count(), 3));
  doc.set("range.pot_resolution_ua", format_fixed(p_outcome.finest_resolution.count(), 6));
  doc.set("plan.steps", std::to_string(p_outcome.plan.steps.size()));
  doc.set("plan.truncated", p_outcome.plan.truncated ? "1" : "0");
  return doc;
}

inline PlanOutcome cmd_plan(const PlanOptions& p_options)
{
  const CircuitSetup setup =
    p_options.config_path ? load_setup(*p_options.config_path) : default_setup();
  SweepParams params;
  params.kind = p_options.kind;
  params.i_max = p_options.i_max;
  params.v_min = p_options.v_min;

  PlanOutcome outcome;
  outcome.plan = build_plan(setup, params);
  const auto masks = ladder_masks(layout_for(setup.bank));
  outcome.range = enumerate_outputs(setup, p_options.kind, masks);
  outcome.finest_resolution = Current(INT64_MAX);
  for (int code = 1; code <= setup.pot.top_code(); ++code) {
    outcome.finest_resolution = std::min(
      outcome.finest_resolution, resolution_at(setup.pot, setup.r_protect, code, setup.v_in));
  }

  detail::ensure_dir(p_options.out_dir);
  save_plan(detail::in_dir(p_options.out_dir, files::plan), outcome.plan);
  range_to_text(outcome).save(detail::in_dir(p_options.out_dir, files::range),
                              "output range of the sweep ladder");
  return outcome;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions
{
  std::string plan_path;
  std::string dut_preset;
  std::string dmm_preset;
  std::uint64_t seed = 0;
  Nanos period{ 5'000'000 };
  std::string out_dir = ".";
};

struct SweepOutcome
{
  SweepResult result;
  SampleTrace dut;
  SampleTrace ref;
  StimulusTimeline timeline;
};

/// Sampling phases and the noise stream all derive from the one seed.
struct SeedStreams
{
  Nanos dut_phase{};
  Nanos ref_phase{};
  std::mt19937_64 dut_noise;
  std::mt19937_64 ref_noise;

  SeedStreams(std::uint64_t p_seed, std::int64_t p_dut_rate, std::int64_t p_ref_rate)
  {
    std::seed_seq seq{ static_cast<std::uint32_t>(p_seed),
                       static_cast<std::uint32_t>(p_seed >> 32) };
    std::mt19937_64 root(seq);
    const auto phase = [&root](std::int64_t p_rate) {
      const auto interval = 1'000'000'000 / p_rate;
      std::uniform_int_distribution<std::int64_t> dist(0, std::max<std::int64_t>(interval - 1, 0));
      return Nanos(dist(root));
    };
    dut_phase = phase(p_dut_rate);
    ref_phase = phase(p_ref_rate);
    dut_noise.seed(root());
    ref_noise.seed(root());
  }
};

inline SweepOutcome cmd_sweep(const SweepOptions& p_options)
{
  const SweepPlan plan = load_plan(p_options.plan_path);
  InstrumentPreset dut = load_preset(p_options.dut_preset);
  InstrumentPreset ref = load_preset(p_options.dmm_preset);
  require_rate(p_options.period, dut.adc.sample_rate_hz, "device under test '" + dut.adc.name + "'");
  require_rate(p_options.period, ref.adc.sample_rate_hz, "reference meter '" + ref.adc.name + "'");
  for (const auto* adc : { &dut.adc, &ref.adc }) {
    if (adc->measures() != plan.kind) {
      throw ValidationError(fmt::format(
        "instrument '{}' measures {} but the plan is in {} mode",
        adc->name, to_string(adc->measures()), to_string(plan.kind)));
    }
  }

  SeedStreams streams(p_options.seed, dut.adc.sample_rate_hz, ref.adc.sample_rate_hz);
  dut.adc.phase = streams.dut_phase;
  ref.adc.phase = streams.ref_phase;

  SweepParams params;
  params.kind = plan.kind;
  params.period = p_options.period;
  hal::MockTransport board(plan.setup, plan.kind);
  VirtualClock clock;

  SweepOutcome outcome;
  outcome.result = execute(plan, params, board, clock);
  if (outcome.result.log.incomplete) {
    throw PipelineError("sweep aborted: " + outcome.result.log.failure);
  }
  outcome.timeline = timeline_from(board.history(), plan.kind, outcome.result.duration);
  outcome.dut = sample(outcome.timeline, dut.adc, outcome.result.duration, streams.dut_noise);
  outcome.ref = sample(outcome.timeline, ref.adc, outcome.result.duration, streams.ref_noise);

  detail::ensure_dir(p_options.out_dir);
  save_settling_log(detail::in_dir(p_options.out_dir, files::settling), outcome.result.log);
  hal::save_event_log(detail::in_dir(p_options.out_dir, files::events), outcome.result.events);
  save_trace(detail::in_dir(p_options.out_dir, files::dut_trace), outcome.dut);
  save_trace(detail::in_dir(p_options.out_dir, files::ref_trace), outcome.ref);
  return outcome;
}

// ---------------------------------------------------------------------------
// replay

/// Drive a fresh board from a recorded event log; every settle stamp must see
/// the output the settling log expects.
inline std::size_t cmd_replay(const std::string& p_plan_path,
                              const std::string& p_events_path,
                              const std::string& p_settling_path)
{
  const SweepPlan plan = load_plan(p_plan_path);
  const auto events = hal::load_event_log(p_events_path);
  const SettlingLog log = load_settling_log(p_settling_path);
  if (!hal::is_bracketed(events)) {
    throw ProtocolError("event log is not bracketed by start and stop triggers");
  }
  hal::MockTransport board(plan.setup, plan.kind);
  hal::replay(events, board);
  const auto& history = board.history();
  std::size_t h = 0;
  for (const auto& entry : log.entries) {
    while (h + 1 < history.size() && history[h + 1].t <= entry.t_settle) {
      ++h;
    }
    const auto& state = history[h];
    if (state.pot_code != entry.pot_code || state.switch_mask != entry.switch_mask ||
        state.output.current != entry.expected_current ||
        state.output.voltage != entry.expected_voltage) {
      throw PipelineError(fmt::format("replay diverges at step {}", entry.step));
    }
  }
  return log.entries.size();
}

// ---------------------------------------------------------------------------
// pair

inline PairedObservations cmd_pair(const std::string& p_settling_path,
                                   const std::string& p_dut_path,
                                   const std::string& p_ref_path,
                                   const std::string& p_out_dir)
{
  const SettlingLog log = load_settling_log(p_settling_path);
  if (log.incomplete) {
    throw PipelineError("settling log is marked incomplete: " + log.failure);
  }
  const auto obs = pair(log, load_trace(p_dut_path), load_trace(p_ref_path));
  detail::ensure_dir(p_out_dir);
  save_pairs(detail::in_dir(p_out_dir, files::pairs), obs);
  return obs;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions
{
  std::string pairs_path;
  std::string method = "auto";
  bool holdout = true;
  std::string out_dir = ".";
};

struct CalibrateOutcome
{
  CalibrationModel model;
  ErrorReport report;
  /// Corrected error is not below the uncorrected error.
  bool failed = false;
};

inline CalibrateOutcome cmd_calibrate(const CalibrateOptions& p_options)
{
  const Method method = parse_method(p_options.method);
  const PairedObservations obs = load_pairs(p_options.pairs_path);
  if (obs.pairs.empty()) {
    throw ValidationError("pairs file holds no pairs");
  }
  const auto train = training_pairs(obs.pairs, p_options.holdout);
  if (train.empty()) {
    throw DomainError("no training pairs left after the holdout split");
  }

  CalibrateOutcome outcome;
  outcome.model = fit(method, train);
  outcome.report = evaluate(outcome.model, obs.pairs, obs.full_scale, p_options.holdout);
  outcome.failed = !(outcome.report.post_pct_fs < outcome.report.pre_pct_fs);

  const auto pairs_hash = detail::hex64(fnv1a64_file(p_options.pairs_path));
  TextConfig model_doc = model_to_text(outcome.model);
  model_doc.set("fit.method", method.text());
  model_doc.set("fit.selected", describe(outcome.model));
  model_doc.set("fit.holdout", p_options.holdout ? "1" : "0");
  model_doc.set("fit.n_train", std::to_string(train.size()));
  model_doc.set("fit.unit", obs.unit);
  model_doc.set("provenance.pairs_fnv1a", pairs_hash);

  TextConfig report_doc = report_to_text(outcome.report, obs.unit);
  report_doc.set("report.model", describe(outcome.model));
  report_doc.set("report.holdout", p_options.holdout ? "1" : "0");
  report_doc.set("report.skipped_dut", std::to_string(obs.skipped_dut));
  report_doc.set("report.skipped_ref", std::to_string(obs.skipped_ref));
  report_doc.set("provenance.pairs_fnv1a", pairs_hash);

  detail::ensure_dir(p_options.out_dir);
  model_doc.save(detail::in_dir(p_options.out_dir, files::model), "calibration model");
  report_doc.save(detail::in_dir(p_options.out_dir, files::report),
                  "error before and after calibration, percent of full scale");
  std::ofstream residuals(detail::in_dir(p_options.out_dir, files::residuals), std::ios::binary);
  write_residuals(residuals, outcome.model, obs.pairs);
  return outcome;
}

// ---------------------------------------------------------------------------
// demo and manifest

struct DemoCase
{
  std::string name;
  std::string dut_preset;
  std::string dmm_preset;
  OutputKind kind;
  double target_before_pct;
};

inline const std::vector<DemoCase>& demo_cases()
{
  static const std::vector<DemoCase> cases{
    { "ina219-current", "ina219-current", "dmm7510-current", OutputKind::current, 0.42 },
    { "mcp3208-current", "mcp3208-current", "dmm7510-current", OutputKind::current, 2.58 },
    { "mcp3208-voltage", "mcp3208-voltage", "dmm7510-voltage", OutputKind::voltage, 5.29 },
    { "atmega2560-voltage", "atmega2560-voltage", "dmm7510-voltage", OutputKind::voltage, 0.2 },
  };
  return cases;
}

inline const DemoCase& find_demo_case(const std::string& p_name)
{
  std::string valid;
  for (const auto& c : demo_cases()) {
    if (c.name == p_name) {
      return c;
    }
    valid += (valid.empty() ? "" : ", ") + c.name;
  }
  throw ValidationError("unknown demo case '" + p_name + "' (valid: " + valid + ")");
}

/// Everything needed to reproduce one run; file names are relative to the
/// manifest's directory.
struct RunManifest
{
  std::string case_name;
  OutputKind kind = OutputKind::current;
  std::string dut_preset;
  std::string dmm_preset;
  std::string method;
  std::uint64_t seed = 0;
  Nanos period{ 5'000'000 };
  std::optional<Current> i_max;
  std::string version = tool_version;
  /// (role, file name, FNV-1a hash) for every output.
  std::vector<std::tuple<std::string, std::string, std::string>> outputs;

  [[nodiscard]] TextConfig to_text() const
  {
    TextConfig doc;
    doc.set("manifest.tool_version", version);
    doc.set("manifest.case", case_name);
    doc.set("manifest.mode", to_string(kind));
    doc.set("manifest.dut_preset", dut_preset);
    doc.set("manifest.dmm_preset", dmm_preset);
    doc.set("manifest.method", method);
    doc.set("manifest.seed", std::to_string(seed));
    doc.set("manifest.period_us", format_us(period));
    if (i_max) {
      doc.set("manifest.i_max_ua", format_fixed(i_max->count(), 6));
    }
    for (const auto& [role, name, hash] : outputs) {
      doc.set("files." + role, name);
      doc.set("files." + role + ".fnv1a", hash);
    }
    return doc;
  }

  static RunManifest from_text(const TextConfig& p_doc)
  {
    RunManifest m;
    m.version = p_doc.at("manifest.tool_version");
    m.case_name = p_doc.at("manifest.case");
    m.kind = parse_output_kind(p_doc.at("manifest.mode"));
    m.dut_preset = p_doc.at("manifest.dut_preset");
    m.dmm_preset = p_doc.at("manifest.dmm_preset");
    m.method = p_doc.at("manifest.method");
    m.seed = static_cast<std::uint64_t>(p_doc.integer("manifest.seed"));
    m.period = parse_us(p_doc.at("manifest.period_us"));
    if (p_doc.contains("manifest.i_max_ua")) {
      m.i_max = Current(p_doc.fixed("manifest.i_max_ua", 6));
    }
    for (const auto& [key, value] : p_doc.entries()) {
      if (key.rfind("files.", 0) == 0 && key.find(".fnv1a") == std::string::npos) {
        const auto role = key.substr(6);
        m.outputs.emplace_back(role, value, p_doc.at(key + ".fnv1a"));
      }
    }
    return m;
  }
};

struct DemoOutcome
{
  RunManifest manifest;
  ErrorReport report;
  CalibrationModel model;
  bool failed = false;
};

/**
 * @brief plan -> sweep -> pair -> calibrate for one manifest.
 *
 * `p_config` replaces the reference board when given; the setup actually used
 * is always written next to the other outputs.
 */
inline DemoOutcome run_manifest(RunManifest p_manifest,
                                const std::string& p_out_dir,
                                const std::optional<std::string>& p_config = std::nullopt)
{
  detail::ensure_dir(p_out_dir);
  const auto path = [&](const char* p_name) { return detail::in_dir(p_out_dir, p_name); };

  const CircuitSetup setup = p_config ? load_setup(*p_config) : default_setup();
  setup_to_text(setup).save(path(files::config), "board configuration");

  PlanOptions plan_opts;
  plan_opts.config_path = path(files::config);
  plan_opts.kind = p_manifest.kind;
  plan_opts.i_max = p_manifest.i_max;
  plan_opts.out_dir = p_out_dir;
  cmd_plan(plan_opts);

  SweepOptions sweep_opts;
  sweep_opts.plan_path = path(files::plan);
  sweep_opts.dut_preset = p_manifest.dut_preset;
  sweep_opts.dmm_preset = p_manifest.dmm_preset;
  sweep_opts.seed = p_manifest.seed;
  sweep_opts.period = p_manifest.period;
  sweep_opts.out_dir = p_out_dir;
  cmd_sweep(sweep_opts);

  cmd_pair(path(files::settling), path(files::dut_trace), path(files::ref_trace), p_out_dir);

  CalibrateOptions cal_opts;
  cal_opts.pairs_path = path(files::pairs);
  cal_opts.method = p_manifest.method;
  cal_opts.out_dir = p_out_dir;
  const auto cal = cmd_calibrate(cal_opts);

  p_manifest.outputs.clear();
  for (const auto& [role, name] : std::vector<std::pair<std::string, const char*>>{
         { "config", files::config },       { "plan", files::plan },
         { "range", files::range },         { "events", files::events },
         { "settling", files::settling },   { "dut_trace", files::dut_trace },
         { "ref_trace", files::ref_trace }, { "pairs", files::pairs },
         { "model", files::model },         { "report", files::report },
         { "residuals", files::residuals } }) {
    p_manifest.outputs.emplace_back(role, name, detail::hex64(fnv1a64_file(path(name))));
  }
  p_manifest.to_text().save(path(files::manifest), "run manifest");
  return { p_manifest, cal.report, cal.model, cal.failed };
}

/// Manifest for one of the built-in case studies.
inline RunManifest demo_manifest(const std::string& p_case,
                                 std::uint64_t p_seed,
                                 Nanos p_period = Nanos{ 5'000'000 })
{
  const DemoCase& c = find_demo_case(p_case);
  const InstrumentPreset dut = load_preset(c.dut_preset);
  RunManifest m;
  m.case_name = c.name;
  m.kind = c.kind;
  m.dut_preset = c.dut_preset;
  m.dmm_preset = c.dmm_preset;
  m.method = dut.method.empty() ? "auto" : dut.method;
  m.seed = p_seed;
  m.period = p_period;
  if (c.kind == OutputKind::current) {
    // Keep the ladder inside 90 % of the device's span.
    const auto fs_pa = static_cast<std::int64_t>(dut.adc.full_scale() * 1e6 * 0.9);
    m.i_max = Current(fs_pa);
  }
  return m;
}

inline DemoOutcome cmd_demo(const std::string& p_case,
                            std::uint64_t p_seed,
                            const std::string& p_out_dir,
                            Nanos p_period = Nanos{ 5'000'000 })
{
  return run_manifest(demo_manifest(p_case, p_seed, p_period), p_out_dir);
}

struct RerunOutcome
{
  DemoOutcome outcome;
  /// Roles whose regenerated file differs from the recorded hash.
  std::vector<std::string> mismatched;
};

/// Regenerate a run from its manifest and compare every output hash.
inline RerunOutcome cmd_rerun(const std::string& p_manifest_path, const std::string& p_out_dir)
{
  const RunManifest recorded = RunManifest::from_text(TextConfig::load(p_manifest_path));
  const auto source_dir = std::filesystem::path(p_manifest_path).parent_path();
  std::optional<std::string> config;
  for (const auto& [role, name, hash] : recorded.outputs) {
    if (role == "config") {
      config = (source_dir / name).string();
    }
  }
  RerunOutcome rerun;
  rerun.outcome = run_manifest(recorded, p_out_dir, config);
  for (const auto& [role, name, hash] : recorded.outputs) {
    const auto& regenerated = rerun.outcome.manifest.outputs;
    const auto it = std::find_if(regenerated.begin(), regenerated.end(), [&](const auto& p_out) {
      return std::get<0>(p_out) == role;
    });
    if (it == regenerated.end() || std::get<2>(*it) != hash) {
      rerun.mismatched.push_back(role);
    }
  }
  return rerun;
}

inline void print_report_table(std::ostream& p_out,
                               const std::string& p_case,
                               const ErrorReport& p_report,
                               const CalibrationModel& p_model)
{
  p_out << fmt::format("{:<20} {:>12} {:>12} {:>10}  {}\n",
                       "case", "before %FS", "after %FS", "reduction", "model");
  const double reduction =
    p_report.post_pct_fs > 0.0 ? p_report.pre_pct_fs / p_report.post_pct_fs : 0.0;
  p_out << fmt::format("{:<20} {:>12.4f} {:>12.4f} {:>9.1f}x  {}\n",
                       p_case, p_report.pre_pct_fs, p_report.post_pct_fs, reduction,
                       describe(p_model));
}

}  // namespace procal
