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

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "procal/correlator.hpp"
#include "procal/presets.hpp"

namespace procal {
namespace {

using namespace literals;

struct ToySweep
{
  SweepResult result;
  StimulusTimeline timeline;
};

ToySweep toy_sweep(std::size_t p_steps, OutputKind p_kind)
{
  auto plan = build_plan(default_setup(), { p_kind, Nanos{ 5'000'000 }, {}, {} });
  plan.steps.resize(p_steps);
  hal::MockTransport board(plan.setup, p_kind);
  VirtualClock clock;
  ToySweep out;
  out.result = execute(plan, { p_kind, Nanos{ 5'000'000 }, {}, {} }, board, clock);
  out.timeline = timeline_from(board.history(), p_kind, out.result.duration);
  return out;
}

AdcSpec ideal_12bit_1khz(Nanos p_phase = {})
{
  AdcSpec spec;
  spec.name = "ideal";
  spec.n_bits = 12;
  spec.v_fs = 5_V;
  spec.sample_rate_hz = 1000;
  spec.phase = p_phase;
  return spec;
}

SettlingLog regular_log(int p_steps)
{
  SettlingLog log;
  log.period = Nanos{ 5'000'000 };
  for (int k = 0; k < p_steps; ++k) {
    SettlingEntry e;
    e.step = k;
    e.t_settle = Nanos{ 2'500'000 + 5'000'000LL * k };
    log.entries.push_back(e);
  }
  return log;
}

SampleTrace counting_trace(std::int64_t p_count, Nanos p_phase = {})
{
  SampleTrace trace(1000, p_phase);
  for (std::int64_t k = 0; k < p_count; ++k) {
    trace.append(k, static_cast<double>(k));
  }
  return trace;
}

TEST(CheckRate, PeriodMustExceedSampleInterval)
{
  EXPECT_TRUE(check_rate(Nanos{ 5'000'000 }, 1000));
  EXPECT_FALSE(check_rate(Nanos{ 1'000'000 }, 1000));
  EXPECT_FALSE(check_rate(Nanos{ 2'000'000 }, 400));
  EXPECT_TRUE(check_rate(Nanos{ 5'000'000 }, 1'000'000));
  EXPECT_THROW((void)check_rate(Nanos{ 0 }, 1000), DomainError);
}

TEST(CheckRate, ErrorNamesTheRule)
{
  try {
    require_rate(Nanos{ 1'000'000 }, 1000, "dut");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("T > 1/r_min"), std::string::npos);
  }
}

TEST(Match, TieGoesToEarlierSample)
{
  SettlingLog log;
  log.period = Nanos{ 5'000'000 };
  log.entries.push_back({ Nanos{ 102'500'000 }, 20, 0, 0, {}, {} });
  const auto matched = match(log, counting_trace(200));
  ASSERT_TRUE(matched[0].has_value());
  EXPECT_EQ(matched[0]->t, Nanos{ 102'000'000 });
}

TEST(Match, NearestSampleWins)
{
  SettlingLog log;
  log.period = Nanos{ 5'000'000 };
  log.entries.push_back({ Nanos{ 102'600'000 }, 0, 0, 0, {}, {} });
  log.entries.push_back({ Nanos{ 102'400'000 }, 1, 0, 0, {}, {} });
  const auto trace = counting_trace(200);
  EXPECT_EQ(match(log, trace)[0]->t, Nanos{ 103'000'000 });
  EXPECT_EQ(match(log, trace)[1]->t, Nanos{ 102'000'000 });
}

TEST(Match, DropoutSkipsCoveredSteps)
{
  auto trace = counting_trace(200);
  trace.add_dropout_time(Nanos{ 100'000'000 }, Nanos{ 110'000'000 });
  const auto matched = match(regular_log(30), trace);
  int skipped = 0;
  for (int k = 0; k < 30; ++k) {
    if (!matched[static_cast<std::size_t>(k)]) {
      ++skipped;
      EXPECT_TRUE(k == 20 || k == 21) << k;
    }
  }
  EXPECT_EQ(skipped, 2);
}

TEST(Match, PartialDropoutFallsBackToNeighbour)
{
  auto trace = counting_trace(200);
  trace.add_dropout_time(Nanos{ 102'000'000 }, Nanos{ 103'000'000 });
  const auto matched = match(regular_log(30), trace);
  ASSERT_TRUE(matched[20].has_value());
  EXPECT_EQ(matched[20]->t, Nanos{ 103'000'000 });
}

TEST(Match, EmptyTraceIsRejected)
{
  EXPECT_THROW((void)match(regular_log(3), SampleTrace(1000, Nanos{})), ValidationError);
}

TEST(Pair, NoOverlapIsAnError)
{
  const auto late = counting_trace(10, Nanos{ 1'000'000'000 });
  EXPECT_THROW((void)pair(regular_log(3), late, late), PipelineError);
}

TEST(Pair, UnitMismatchIsRejected)
{
  auto a = counting_trace(20);
  auto b = counting_trace(20);
  b.unit = "uA";
  EXPECT_THROW((void)pair(regular_log(3), a, b), ValidationError);
}

TEST(Pair, SlowInstrumentIsRejected)
{
  SampleTrace slow(150, Nanos{});
  slow.append(0, 0.0, 10);
  EXPECT_THROW((void)pair(regular_log(3), counting_trace(20), slow), ValidationError);
}

TEST(Pair, ThreeStepIdealSweep)
{
  const auto sweep = toy_sweep(3, OutputKind::voltage);
  const auto ref_preset = load_preset("dmm7510-voltage");
  std::mt19937_64 rng(0);
  const auto dut = sample(sweep.timeline, ideal_12bit_1khz(), sweep.result.duration, rng);
  const auto ref = sample(sweep.timeline, ref_preset.adc, sweep.result.duration, rng);
  EXPECT_EQ(dut.size(), 15);
  EXPECT_EQ(ref.size(), 15'000);
  const auto obs = pair(sweep.result.log, dut, ref);
  ASSERT_EQ(obs.pairs.size(), 3U);
  const double half_lsb = lsb(ref_preset.adc) / 2;
  for (std::size_t k = 0; k < 3; ++k) {
    const double expected_uv =
      static_cast<double>(sweep.result.log.entries[k].expected_voltage.count()) / 1000.0;
    EXPECT_EQ(obs.pairs[k].step, static_cast<int>(k));
    EXPECT_LE(std::abs(obs.pairs[k].ref_value - expected_uv), half_lsb + 1e-9);
  }
  EXPECT_EQ(obs.full_scale, 5e6);
  EXPECT_EQ(obs.unit, "uV");
}

/// Level of the timeline at `p_t`.
std::int64_t level_at(const StimulusTimeline& p_timeline, Nanos p_t)
{
  for (const auto& seg : p_timeline.segments) {
    if (p_t >= seg.t_start && p_t < seg.t_end) {
      return seg.level;
    }
  }
  ADD_FAILURE() << "time outside timeline";
  return -1;
}

TEST(Pair, PhaseShiftDoesNotChangeAttribution)
{
  const auto sweep = toy_sweep(200, OutputKind::voltage);
  const auto ref_preset = load_preset("dmm7510-voltage");
  std::mt19937_64 rng(0);
  const auto ref = sample(sweep.timeline, ref_preset.adc, sweep.result.duration, rng);
  const auto base = pair(sweep.result.log,
                         sample(sweep.timeline, ideal_12bit_1khz(), sweep.result.duration, rng),
                         ref);
  const auto shifted = pair(
    sweep.result.log,
    sample(sweep.timeline, ideal_12bit_1khz(Nanos{ 700'000 }), sweep.result.duration, rng),
    ref);
  ASSERT_EQ(base.pairs.size(), shifted.pairs.size());
  for (std::size_t k = 0; k < base.pairs.size(); ++k) {
    EXPECT_EQ(base.pairs[k].step, shifted.pairs[k].step);
    EXPECT_EQ(base.pairs[k].ref_value, shifted.pairs[k].ref_value);
    EXPECT_EQ(base.pairs[k].dut_value, shifted.pairs[k].dut_value) << k;
  }
}

TEST(Pair, MatchedSamplesSeeTheirOwnStep)
{
  const auto sweep = toy_sweep(300, OutputKind::current);
  AdcSpec dut = ideal_12bit_1khz();
  dut.v_fs = 3'200_mV;
  dut.shunt = Resistance(100'000'000);
  std::mt19937_64 phases(17);
  std::uniform_int_distribution<std::int64_t> phase_dist(0, 999'999);
  for (int trial = 0; trial < 20; ++trial) {
    dut.phase = Nanos{ phase_dist(phases) };
    std::mt19937_64 rng(0);
    const auto trace = sample(sweep.timeline, dut, sweep.result.duration, rng);
    const auto matched = match(sweep.result.log, trace);
    for (std::size_t k = 0; k < matched.size(); ++k) {
      ASSERT_TRUE(matched[k].has_value()) << k;
      ASSERT_EQ(level_at(sweep.timeline, matched[k]->t),
                sweep.result.log.entries[k].expected_current.count())
        << "phase " << dut.phase.count() << " step " << k;
    }
  }
}

TEST(PairsFile, RoundTrip)
{
  PairedObservations obs;
  obs.period = Nanos{ 5'000'000 };
  obs.full_scale = 3.2e6;
  obs.unit = "uA";
  obs.skipped_dut = 2;
  obs.skipped_ref = 1;
  obs.pairs.push_back({ 0, 12.5, 12.25, Nanos{ 2'000'000 }, Nanos{ 2'500'000 } });
  obs.pairs.push_back({ 3, 1024.0, 1000.125, Nanos{ 17'000'000 }, Nanos{ 17'500'000 } });
  std::ostringstream out;
  write_pairs(out, obs);
  std::istringstream in(out.str());
  const auto back = read_pairs(in);
  EXPECT_EQ(back.pairs, obs.pairs);
  EXPECT_EQ(back.period, obs.period);
  EXPECT_EQ(back.full_scale, obs.full_scale);
  EXPECT_EQ(back.unit, obs.unit);
  EXPECT_EQ(back.skipped_dut, 2);
  EXPECT_EQ(back.skipped_ref, 1);
}

TEST(PairsFile, MissingFooterIsRejected)
{
  std::istringstream in("step,dut_value,ref_value,dut_t_us,ref_t_us\n0,1,1,0.000,0.000\n");
  EXPECT_THROW((void)read_pairs(in), ValidationError);
}

}  // namespace
}  // namespace procal
