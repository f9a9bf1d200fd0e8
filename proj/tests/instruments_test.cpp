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

#include "procal/instruments.hpp"
#include "procal/presets.hpp"

namespace procal {
namespace {

using namespace literals;

AdcSpec make_spec(int p_bits, Voltage p_fs)
{
  AdcSpec spec;
  spec.n_bits = p_bits;
  spec.v_fs = p_fs;
  return spec;
}

/// Code by scanning thresholds k * V_FS / 2^n upward, in exact integers.
std::int64_t threshold_oracle(std::int64_t p_v_nv, const AdcSpec& p_spec)
{
  const std::int64_t top = (std::int64_t{ 1 } << p_spec.n_bits) - 1;
  std::int64_t code = 0;
  while (code < top &&
         static_cast<int128>(code + 1) * p_spec.v_fs.count() <=
           static_cast<int128>(p_v_nv) << p_spec.n_bits) {
    ++code;
  }
  return code;
}

StimulusTimeline staircase(OutputKind p_kind, std::vector<std::int64_t> p_levels, Nanos p_width)
{
  StimulusTimeline timeline;
  timeline.kind = p_kind;
  Nanos t{};
  for (const auto level : p_levels) {
    timeline.segments.push_back({ t, t + p_width, level });
    t += p_width;
  }
  return timeline;
}

TEST(Lsb, DirectValues)
{
  EXPECT_EQ(lsb(make_spec(10, 5_V)), 4882.8125);
  EXPECT_EQ(lsb(make_spec(12, 5_V)), 1220.703125);
  EXPECT_EQ(lsb(make_spec(1, 2_V)), 1'000'000.0);
}

TEST(QuantizeIdeal, MidpointAndFloor)
{
  const auto spec = make_spec(10, 5_V);
  EXPECT_EQ(quantize_ideal(Voltage(2'500'000'000), spec).code, 512);
  EXPECT_EQ(quantize_ideal(Voltage(4'882'812), spec).code, 0);
  EXPECT_EQ(quantize_ideal(Voltage(4'882'813), spec).code, 1);
}

TEST(QuantizeIdeal, SaturatesAndFlags)
{
  const auto spec = make_spec(10, 5_V);
  const auto q = quantize_ideal(5_V, spec);
  EXPECT_EQ(q.code, 1023);
  EXPECT_TRUE(q.saturated);
  EXPECT_FALSE(quantize_ideal(Voltage(4'999'999'999), spec).saturated);
  EXPECT_THROW((void)quantize_ideal(Voltage(-1), spec), DomainError);
}

TEST(QuantizeIdeal, SixBitsMatchThresholdOracleOnMicrovoltGrid)
{
  for (const auto fs : { 5_V, Voltage(3'300'000'000) }) {
    const auto spec = make_spec(6, fs);
    for (std::int64_t uv = 0; uv <= fs.count() / 1000 + 5; ++uv) {
      const Voltage v(uv * 1000);
      ASSERT_EQ(quantize_ideal(v, spec).code, threshold_oracle(v.count(), spec)) << uv;
    }
  }
}

TEST(QuantizeIdeal, UpToEightBitsMatchThresholdOracle)
{
  for (int bits = 1; bits <= 8; ++bits) {
    const auto spec = make_spec(bits, Voltage(4'096'123'000));
    for (std::int64_t nv = 0; nv <= 4'200'000'000; nv += 7'000) {
      ASSERT_EQ(quantize_ideal(Voltage(nv), spec).code, threshold_oracle(nv, spec))
        << bits << " bits at " << nv;
    }
  }
}

TEST(QuantizeIdeal, ReconstructionErrorBounds)
{
  const auto spec = make_spec(8, Voltage(3'300'000'000));
  const double delta_nv = lsb(spec) * 1000.0;
  const Adc adc(spec);
  for (std::int64_t nv = 0; nv < spec.v_fs.count(); nv += 997) {
    const auto code = quantize_ideal(Voltage(nv), spec).code;
    const double floor_error = static_cast<double>(code) * delta_nv - static_cast<double>(nv);
    ASSERT_GT(floor_error, -delta_nv - 1e-6);
    ASSERT_LE(floor_error, 1e-6);
    const double centred = adc.value_of(code) * 1000.0 - static_cast<double>(nv);
    ASSERT_LE(std::abs(centred), delta_nv / 2 + 1e-6);
  }
}

TEST(QuantizeNonideal, ZeroErrorsEqualIdeal)
{
  const auto spec = make_spec(12, 5_V);
  std::mt19937_64 inputs(3);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> dist(0, 5'200'000'000);
  for (int i = 0; i < 10'000; ++i) {
    const Voltage v(dist(inputs));
    ASSERT_EQ(quantize_nonideal(v, spec, rng), quantize_ideal(v, spec)) << v.count();
  }
}

TEST(QuantizeNonideal, OffsetIsAPureShift)
{
  auto spec = make_spec(10, 5_V);
  spec.offset_uv = 2 * lsb(spec);
  const auto ideal = make_spec(10, 5_V);
  const std::int64_t two_lsb_nv = 9'765'625;
  std::mt19937_64 rng(0);
  for (std::int64_t nv = 0; nv + two_lsb_nv < ideal.v_fs.count(); nv += 12'345) {
    ASSERT_EQ(quantize_nonideal(Voltage(nv), spec, rng).code,
              quantize_ideal(Voltage(nv + two_lsb_nv), ideal).code)
      << nv;
  }
}

TEST(QuantizeNonideal, GainScalesInput)
{
  auto spec = make_spec(12, 5_V);
  spec.gain_error_ppm = 10'000;
  const Adc adc(spec);
  EXPECT_DOUBLE_EQ(adc.transfer_nv(1e9), 1.01e9);
}

TEST(QuantizeNonideal, InlIsPolynomialInNormalisedInput)
{
  auto spec = make_spec(12, 5_V);
  spec.inl_coeffs = { 100.0, 0.0, -400.0 };
  const Adc adc(spec);
  // u = 0.5: 100 - 400 * 0.25 = 0 uV.
  EXPECT_NEAR(adc.transfer_nv(2.5e9), 2.5e9, 1e-3);
  // u = 1: 100 - 400 = -300 uV.
  EXPECT_NEAR(adc.transfer_nv(5e9), 5e9 - 300'000, 1e-3);
}

TEST(QuantizeNonideal, MonotoneWithPositiveDnlWidths)
{
  auto spec = make_spec(8, 5_V);
  spec.dnl_widths = detail::random_dnl(8, 0.4, 99);
  spec.offset_uv = -3000;
  spec.inl_coeffs = { 0.0, 20'000.0, -15'000.0 };
  const Adc adc(spec);
  std::int64_t prev = 0;
  for (double nv = 0.0; nv < 5.2e9; nv += 1.0e5) {
    const auto code = adc.convert_nv(nv).code;
    ASSERT_GE(code, prev) << nv;
    prev = code;
  }
}

TEST(QuantizeNonideal, DnlWidthsMoveThresholds)
{
  auto spec = make_spec(2, Voltage(4'000));
  spec.dnl_widths = { 1.0, 2.0, 0.5, 0.5 };
  const Adc adc(spec);
  // Thresholds at 0, 1000, 3000, 3500 nV.
  EXPECT_EQ(adc.convert_nv(999.0).code, 0);
  EXPECT_EQ(adc.convert_nv(1000.0).code, 1);
  EXPECT_EQ(adc.convert_nv(2999.0).code, 1);
  EXPECT_EQ(adc.convert_nv(3000.0).code, 2);
  EXPECT_EQ(adc.convert_nv(3600.0).code, 3);
}

TEST(QuantizeNonideal, SameSeedSameNoise)
{
  auto spec = make_spec(12, 5_V);
  spec.noise_sigma_uv = 500;
  std::mt19937_64 a(42);
  std::mt19937_64 b(42);
  std::mt19937_64 c(43);
  int differ = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto qa = quantize_nonideal(Voltage(2'000'000'000), spec, a);
    ASSERT_EQ(qa, quantize_nonideal(Voltage(2'000'000'000), spec, b));
    differ += qa != quantize_nonideal(Voltage(2'000'000'000), spec, c);
  }
  EXPECT_GT(differ, 0);
  EXPECT_THROW((void)Adc(spec).convert_nv(1.0), DomainError);
}

TEST(Shunt, DoublingCurrentDoublesVoltageExactly)
{
  const Resistance shunt(100'000'000);  // 0.1 Ohm
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> dist(1, 1'000'000'000'000);
  for (int i = 0; i < 1000; ++i) {
    const Current amps(dist(rng));
    ASSERT_EQ(shunt_voltage_nv(amps * 2, shunt), 2.0 * shunt_voltage_nv(amps, shunt));
  }
  EXPECT_EQ(shunt_voltage_nv(1_mA, shunt), 100'000.0);
}

TEST(AdcSpec, ValidationRejectsBadFields)
{
  auto spec = make_spec(12, 5_V);
  EXPECT_NO_THROW(validate(spec));
  spec.dnl_widths = { 1.0, 2.0 };
  EXPECT_THROW(validate(spec), ValidationError);
  spec = make_spec(12, Voltage(0));
  EXPECT_THROW(validate(spec), ValidationError);
  spec = make_spec(0, 5_V);
  EXPECT_THROW(validate(spec), ValidationError);
}

TEST(Sample, UniformGridFromPhase)
{
  const auto timeline = staircase(OutputKind::voltage, { 1'000'000'000 }, Nanos{ 10'000'000 });
  auto spec = make_spec(12, 5_V);
  spec.sample_rate_hz = 1000;
  std::mt19937_64 rng(0);
  const auto trace = sample(timeline, spec, Nanos{ 10'000'000 }, rng);
  ASSERT_EQ(trace.size(), 10);
  for (std::int64_t k = 0; k < 10; ++k) {
    EXPECT_EQ(trace.at(k)->t, Nanos{ k * 1'000'000 });
  }
}

TEST(Sample, ReferenceMeterWithinHalfLsb)
{
  const auto ref = load_preset("dmm7510-voltage");
  std::vector<std::int64_t> levels;
  for (std::int64_t v = 48'160'277; v < 5'000'000'000; v += 123'456'789) {
    levels.push_back(v);
  }
  const auto timeline = staircase(OutputKind::voltage, levels, Nanos{ 5'000'000 });
  std::mt19937_64 rng(0);
  const auto trace = sample(timeline, ref.adc, timeline.end(), rng);
  const double half_lsb_uv = lsb(ref.adc) / 2;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const auto k = trace.first_index_at_or_after(Nanos{ static_cast<std::int64_t>(s) * 5'000'000 });
    const double truth_uv = static_cast<double>(levels[s]) / 1000.0;
    ASSERT_LE(std::abs(trace.at(k)->value - truth_uv), half_lsb_uv + 1e-9);
  }
}

TEST(Sample, EveryFiveMillisecondSegmentSeesFourSamplesAtAnyPhase)
{
  auto spec = make_spec(12, 5_V);
  spec.sample_rate_hz = 1000;
  std::vector<std::int64_t> levels(40);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i] = static_cast<std::int64_t>(i + 1) * 100'000'000;
  }
  const auto timeline = staircase(OutputKind::voltage, levels, Nanos{ 5'000'000 });
  for (std::int64_t phase = 0; phase < 1'000'000; phase += 9'973) {
    spec.phase = Nanos{ phase };
    std::mt19937_64 rng(0);
    const auto trace = sample(timeline, spec, timeline.end(), rng);
    for (const auto& seg : timeline.segments) {
      const auto first = trace.first_index_at_or_after(seg.t_start);
      const auto last = trace.first_index_at_or_after(seg.t_end);
      ASSERT_GE(last - first, 4) << "phase " << phase;
    }
  }
}

TEST(Sample, ShuntInstrumentReadsMicroamps)
{
  const auto timeline = staircase(OutputKind::current, { (100_mA).count() }, Nanos{ 5'000'000 });
  const auto ref = load_preset("dmm7510-current");
  std::mt19937_64 rng(0);
  const auto trace = sample(timeline, ref.adc, timeline.end(), rng);
  EXPECT_EQ(trace.unit, "uA");
  EXPECT_NEAR(trace.at(0)->value, 100'000.0, lsb(ref.adc));
}

TEST(Sample, MismatchedQuantityIsRejected)
{
  const auto timeline = staircase(OutputKind::current, { 1 }, Nanos{ 5'000'000 });
  std::mt19937_64 rng(0);
  EXPECT_THROW((void)sample(timeline, make_spec(12, 5_V), timeline.end(), rng), ValidationError);
}

TEST(SampleTrace, RunLengthStorageAndDropouts)
{
  SampleTrace trace(1000, Nanos{ 250'000 });
  trace.append(7, 7.5, 5);
  trace.append(8, 8.5, 5);
  trace.add_dropout(3, 6);
  EXPECT_EQ(trace.size(), 10);
  EXPECT_EQ(trace.runs().size(), 2U);
  EXPECT_FALSE(trace.at(4).has_value());
  EXPECT_EQ(trace.at(6)->code, 8);
  EXPECT_EQ(trace.at(2)->t, Nanos{ 2'250'000 });
  EXPECT_EQ(trace.first_index_at_or_after(Nanos{ 2'250'001 }), 3);
}

TEST(TraceFile, RoundTripDenseAndChanges)
{
  auto spec = make_spec(12, 5_V);
  spec.noise_sigma_uv = 300;
  spec.phase = Nanos{ 123'456 };
  std::vector<std::int64_t> levels;
  for (int i = 1; i < 60; ++i) {
    levels.push_back(i * 80'000'000LL);
  }
  const auto timeline = staircase(OutputKind::voltage, levels, Nanos{ 5'000'000 });
  std::mt19937_64 rng(1);
  auto trace = sample(timeline, spec, timeline.end(), rng);
  trace.add_dropout_time(Nanos{ 20'000'000 }, Nanos{ 30'000'000 });
  std::ostringstream out;
  write_trace(out, trace);
  std::istringstream in(out.str());
  const auto back = read_trace(in);
  EXPECT_EQ(back.size(), trace.size());
  EXPECT_EQ(back.dropouts(), trace.dropouts());
  for (std::int64_t k = 0; k < trace.size(); ++k) {
    const auto a = trace.at(k);
    const auto b = back.at(k);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      ASSERT_EQ(a->t, b->t);
      ASSERT_EQ(a->code, b->code);
      ASSERT_NEAR(a->value, b->value, 1e-6);
    }
  }

  const auto ref = load_preset("dmm7510-voltage");
  const auto dense = sample(timeline, ref.adc, timeline.end(), rng);
  std::ostringstream big;
  write_trace(big, dense);
  std::istringstream big_in(big.str());
  const auto big_back = read_trace(big_in);
  EXPECT_EQ(big_back.size(), dense.size());
  EXPECT_EQ(big_back.runs().size(), dense.runs().size());
}

TEST(Presets, AllBuiltInsLoadAndValidate)
{
  for (const auto& name : preset_names()) {
    const auto preset = load_preset(name);
    EXPECT_EQ(preset.adc.name, name);
    EXPECT_NO_THROW(validate(preset.adc));
  }
  EXPECT_EQ(load_preset("ina219-current").adc.measures(), OutputKind::current);
  EXPECT_EQ(load_preset("mcp3208-voltage").adc.measures(), OutputKind::voltage);
  const auto dmm = load_preset("dmm7510-voltage").adc;
  EXPECT_EQ(dmm.n_bits, 24);
  EXPECT_EQ(dmm.sample_rate_hz, 1'000'000);
  EXPECT_TRUE(dmm.ideal());
}

TEST(Presets, UnknownNameListsValidOnes)
{
  try {
    (void)load_preset("hp3458a");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ina219-current"), std::string::npos);
  }
}

TEST(Presets, UnknownKeyIsNamed)
{
  const auto doc = TextConfig::parse_string(
    "preset.name = x\nadc.n_bits = 8\nadc.v_fs_v = 1\nadc.sample_rate_hz = 10\nadc.bogus = 1\n",
    "memory");
  try {
    (void)preset_from_text(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("adc.bogus"), std::string::npos);
  }
}

TEST(Presets, SeededDnlIsReproducible)
{
  const auto a = detail::random_dnl(10, 0.3, 5);
  EXPECT_EQ(a, detail::random_dnl(10, 0.3, 5));
  EXPECT_NE(a, detail::random_dnl(10, 0.3, 6));
  for (const double w : a) {
    ASSERT_GT(w, 0.0);
  }
}

}  // namespace
}  // namespace procal
