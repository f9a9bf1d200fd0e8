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
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "procal/pipeline.hpp"
#include "scratch_dir.hpp"

namespace procal {
namespace {

using test::read_file;
using test::ScratchDir;
using test::write_file;

struct Run
{
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with `p_args` appended; output is captured in `p_dir`.
Run cli(const ScratchDir& p_dir, const std::string& p_args)
{
  const auto out = p_dir.file("stdout.txt");
  const auto err = p_dir.file("stderr.txt");
  const std::string command =
    std::string("\"") + PROCAL_CLI_PATH + "\" " + p_args + " >\"" + out + "\" 2>\"" + err + "\"";
  const int status = std::system(command.c_str());
  Run run;
  run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  run.out = read_file(out);
  run.err = read_file(err);
  return run;
}

bool contains(const std::string& p_text, const std::string& p_part)
{
  return p_text.find(p_part) != std::string::npos;
}

TEST(Cli, NoSubcommandIsUsageError)
{
  ScratchDir dir("cli_usage");
  EXPECT_EQ(cli(dir, "").code, 1);
  EXPECT_EQ(cli(dir, "frobnicate").code, 1);
  EXPECT_EQ(cli(dir, "sweep --plan x.csv").code, 1);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}

TEST(Cli, PlanPrintsRangeAndWritesFiles)
{
  ScratchDir dir("cli_plan");
  const auto run = cli(dir, "plan --out-dir \"" + dir.str() + "\"");
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_TRUE(contains(run.out, "16705")) << run.out;
  EXPECT_TRUE(contains(run.out, "486.286715 .. 1273882.359586 uA")) << run.out;
  EXPECT_EQ(load_plan(dir.file(files::plan)).steps.size(), 16'705U);
  EXPECT_TRUE(std::filesystem::exists(dir.file(files::range)));
}

TEST(Cli, PlanHonoursCurrentLimit)
{
  ScratchDir dir("cli_imax");
  ASSERT_EQ(cli(dir, "plan --i-max-ua 0 --out-dir \"" + dir.str() + "\"").code, 0);
  EXPECT_EQ(load_plan(dir.file(files::plan)).steps.size(), 1U);
}

TEST(Cli, SingleSlotConfig)
{
  ScratchDir dir("cli_single");
  auto setup = default_setup();
  setup.bank.slots.resize(1);
  setup.bank.slots[0].group = SlotGroup::automatic;
  setup_to_text(setup).save(dir.file("single.txt"));
  const auto run =
    cli(dir, "plan --config \"" + dir.file("single.txt") + "\" --out-dir \"" + dir.str() + "\"");
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_EQ(load_plan(dir.file(files::plan)).steps.size(), 514U);
}

TEST(Cli, BadConfigIsValidationError)
{
  ScratchDir dir("cli_badcfg");
  write_file(dir.file("bad.txt"), "circuit.v_in_v = 5\ncircuit.bogus = 1\n");
  const auto run =
    cli(dir, "plan --config \"" + dir.file("bad.txt") + "\" --out-dir \"" + dir.str() + "\"");
  EXPECT_EQ(run.code, 2);
  EXPECT_TRUE(contains(run.err, "error:")) << run.err;
  EXPECT_EQ(cli(dir, "plan --mode sideways").code, 1);
  EXPECT_EQ(cli(dir, "plan --config \"" + dir.file("missing.txt") + "\"").code, 2);
}

TEST(Cli, SweepIsByteIdenticalForSameSeed)
{
  ScratchDir dir("cli_sweep");
  auto plan = build_plan(default_setup(), {});
  plan.steps.resize(200);
  save_plan(dir.file("plan200.csv"), plan);
  const auto args = [&](const std::string& p_out, int p_seed) {
    return "sweep --plan \"" + dir.file("plan200.csv") +
           "\" --dut-preset ina219-current --dmm-preset dmm7510-current --seed " +
           std::to_string(p_seed) + " --out-dir \"" + dir.file(p_out) + "\"";
  };
  ASSERT_EQ(cli(dir, args("a", 3)).code, 0);
  ASSERT_EQ(cli(dir, args("b", 3)).code, 0);
  ASSERT_EQ(cli(dir, args("c", 4)).code, 0);
  for (const char* name : { files::dut_trace, files::ref_trace, files::settling, files::events }) {
    const std::string file = std::string("/") + name;
    EXPECT_EQ(read_file(dir.file("a") + file), read_file(dir.file("b") + file)) << name;
  }
  EXPECT_NE(read_file(dir.file("a") + "/" + files::dut_trace),
            read_file(dir.file("c") + "/" + files::dut_trace));

  const auto replay = cli(dir,
                          "replay --plan \"" + dir.file("plan200.csv") + "\" --events \"" +
                            dir.file("a") + "/" + files::events + "\" --settling \"" +
                            dir.file("a") + "/" + files::settling + "\"");
  EXPECT_EQ(replay.code, 0) << replay.err;

  const auto paired = cli(dir,
                          "pair --settling \"" + dir.file("a") + "/" + files::settling +
                            "\" --dut \"" + dir.file("a") + "/" + files::dut_trace +
                            "\" --ref \"" + dir.file("a") + "/" + files::ref_trace +
                            "\" --out-dir \"" + dir.file("a") + "\"");
  ASSERT_EQ(paired.code, 0) << paired.err;
  EXPECT_TRUE(contains(paired.out, "pairs 200")) << paired.out;

  const auto calibrated = cli(dir,
                              "calibrate --pairs \"" + dir.file("a") + "/" + files::pairs +
                                "\" --method poly:1 --out-dir \"" + dir.file("a") + "\"");
  EXPECT_EQ(calibrated.code, 0) << calibrated.err;
  EXPECT_TRUE(std::filesystem::exists(dir.file("a") + "/" + files::report));
}

TEST(Cli, ShortPeriodCitesRateRule)
{
  ScratchDir dir("cli_rate");
  auto plan = build_plan(default_setup(), {});
  plan.steps.resize(5);
  save_plan(dir.file("plan.csv"), plan);
  const auto run = cli(dir,
                       "sweep --plan \"" + dir.file("plan.csv") +
                         "\" --dut-preset ina219-current --dmm-preset dmm7510-current "
                         "--period-us 1000 --out-dir \"" +
                         dir.str() + "\"");
  EXPECT_EQ(run.code, 2);
  EXPECT_TRUE(contains(run.err, "T > 1/r_min")) << run.err;
}

TEST(Cli, CalibrationWithoutImprovementExitsThree)
{
  ScratchDir dir("cli_noimp");
  PairedObservations obs;
  obs.period = Nanos{ 5'000'000 };
  obs.full_scale = 100.0;
  for (int i = 0; i < 30; ++i) {
    obs.pairs.push_back({ i, static_cast<double>(i), static_cast<double>(i), {}, {} });
  }
  save_pairs(dir.file("pairs.csv"), obs);
  const auto run = cli(dir,
                       "calibrate --pairs \"" + dir.file("pairs.csv") +
                         "\" --method poly:0 --out-dir \"" + dir.str() + "\"");
  EXPECT_EQ(run.code, 3);
  EXPECT_EQ(cli(dir, "calibrate --pairs \"" + dir.file("pairs.csv") + "\" --method spline:2").code,
            2);
}

TEST(Cli, UnknownDemoCaseListsValidOnes)
{
  ScratchDir dir("cli_demo_bad");
  const auto run = cli(dir, "demo hp34401a");
  EXPECT_EQ(run.code, 2);
  for (const auto& c : demo_cases()) {
    EXPECT_TRUE(contains(run.err, c.name)) << run.err;
  }
}

TEST(Cli, DemoThenRerun)
{
  ScratchDir dir("cli_demo");
  const auto demo = cli(dir, "demo mcp3208-current --seed 0 --out-dir \"" + dir.file("run") + "\"");
  ASSERT_EQ(demo.code, 0) << demo.err;
  EXPECT_TRUE(contains(demo.out, "mcp3208-current")) << demo.out;
  const auto rerun = cli(dir,
                         "rerun --manifest \"" + dir.file("run") + "/" + files::manifest +
                           "\" --out-dir \"" + dir.file("again") + "\"");
  EXPECT_EQ(rerun.code, 0) << rerun.err;
  EXPECT_EQ(read_file(dir.file("run") + "/" + files::report),
            read_file(dir.file("again") + "/" + files::report));
}

TEST(Cli, PresetPrintsParsableText)
{
  ScratchDir dir("cli_preset");
  const auto run = cli(dir, "preset ina219-current");
  ASSERT_EQ(run.code, 0);
  write_file(dir.file("copy.txt"), run.out);
  EXPECT_EQ(load_preset(dir.file("copy.txt")).adc.n_bits, load_preset("ina219-current").adc.n_bits);
  EXPECT_EQ(cli(dir, "preset nothing").code, 2);
}

}  // namespace
}  // namespace procal
