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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "procal/circuit.hpp"
#include "procal/hal.hpp"
#include "procal/text_config.hpp"
#include "procal/units.hpp"

namespace procal {

struct AdcSpec
{
  std::string name = "adc";
  int n_bits = 12;
  Voltage v_fs{};
  double offset_uv = 0.0;
  double gain_error_ppm = 0.0;
  /// INL term in uV as a polynomial in v / v_fs, constant first.
  std::vector<double> inl_coeffs;
  /// Code width multipliers, one per code; empty means ideal widths.
  std::vector<double> dnl_widths;
  double noise_sigma_uv = 0.0;
  std::int64_t sample_rate_hz = 1000;
  Nanos phase{};
  /// Present for current-sensing instruments.
  std::optional<Resistance> shunt;

  [[nodiscard]] std::int64_t code_count() const { return std::int64_t{ 1 } << n_bits; }
  [[nodiscard]] OutputKind measures() const
  {
    return shunt ? OutputKind::current : OutputKind::voltage;
  }
  /// Full scale in reading units: uV, or uA for a shunt input.
  [[nodiscard]] double full_scale() const
  {
    const double uv = v_fs.in_units();
    return shunt ? uv / shunt->in_units() : uv;
  }
  [[nodiscard]] bool ideal() const
  {
    return offset_uv == 0.0 && gain_error_ppm == 0.0 &&
           std::all_of(inl_coeffs.begin(), inl_coeffs.end(), [](double c) { return c == 0.0; }) &&
           dnl_widths.empty() && noise_sigma_uv == 0.0;
  }
};

inline void validate(const AdcSpec& p_spec)
{
  if (p_spec.n_bits < 1 || p_spec.n_bits > 24) {
    throw ValidationError("adc.n_bits must be in [1, 24]");
  }
  if (p_spec.v_fs.count() <= 0) {
    throw ValidationError("adc.v_fs_v must be positive");
  }
  if (p_spec.sample_rate_hz <= 0 || p_spec.sample_rate_hz > 1'000'000'000) {
    throw ValidationError("adc.sample_rate_hz must be in [1, 1e9]");
  }
  if (p_spec.noise_sigma_uv < 0.0) {
    throw ValidationError("adc.noise_uv must be non-negative");
  }
  if (p_spec.phase.count() < 0) {
    throw ValidationError("adc.phase_us must be non-negative");
  }
  if (!p_spec.dnl_widths.empty()) {
    if (static_cast<std::int64_t>(p_spec.dnl_widths.size()) != p_spec.code_count()) {
      throw ValidationError(fmt::format("adc DNL table needs {} widths, got {}",
                                        p_spec.code_count(),
                                        p_spec.dnl_widths.size()));
    }
    for (const double w : p_spec.dnl_widths) {
      if (!(w > 0.0)) {
        throw ValidationError("adc DNL widths must all be positive");
      }
    }
  }
  if (p_spec.shunt && p_spec.shunt->count() <= 0) {
    throw ValidationError("adc.shunt_ohm must be positive");
  }
}

/// Ideal code width V_FS / 2^n in microvolts. Exact: the divisor is a power of two.
inline double lsb(const AdcSpec& p_spec)
{
  return std::ldexp(static_cast<double>(p_spec.v_fs.count()) / 1000.0, -p_spec.n_bits);
}

struct Quantized
{
  std::int64_t code = 0;
  bool saturated = false;

  bool operator==(const Quantized&) const = default;
};

/// floor(2^n v / V_FS), saturating at the top code.
inline Quantized quantize_ideal(Voltage p_v, const AdcSpec& p_spec)
{
  if (p_v.count() < 0) {
    throw DomainError("quantizer input must be non-negative");
  }
  const auto code = static_cast<std::int64_t>(
    (static_cast<int128>(p_v.count()) << p_spec.n_bits) / p_spec.v_fs.count());
  const auto top = p_spec.code_count() - 1;
  if (code > top) {
    return { top, true };
  }
  return { code, false };
}

/// Voltage across a shunt in nanovolts. Scaling the current scales this exactly.
inline double shunt_voltage_nv(Current p_i, Resistance p_shunt)
{
  const auto product = static_cast<int128>(p_i.count()) * p_shunt.count();
  return static_cast<double>(static_cast<long double>(product) / 1.0e12L);
}

/**
 * @brief Nonideal converter.
 *
 * The input passes through offset, gain, the INL polynomial, the DNL code
 * boundaries and additive noise, in that order. Inputs are nanovolts.
 */
class Adc
{
public:
  explicit Adc(AdcSpec p_spec)
    : m_spec(std::move(p_spec))
    , m_fs_nv(static_cast<double>(m_spec.v_fs.count()))
  {
    validate(m_spec);
    if (!m_spec.dnl_widths.empty()) {
      const auto n = m_spec.dnl_widths.size();
      double total = 0.0;
      for (const double w : m_spec.dnl_widths) {
        total += w;
      }
      m_thresholds.resize(n + 1);
      double running = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        m_thresholds[k] = m_fs_nv * running / total;
        if (k < n) {
          running += m_spec.dnl_widths[k];
        }
      }
    }
  }

  [[nodiscard]] const AdcSpec& spec() const { return m_spec; }

  /// Input after offset, gain and INL, before DNL and noise.
  [[nodiscard]] double transfer_nv(double p_v_nv) const
  {
    double v = p_v_nv + m_spec.offset_uv * 1000.0;
    v *= 1.0 + m_spec.gain_error_ppm * 1e-6;
    if (!m_spec.inl_coeffs.empty()) {
      const double u = v / m_fs_nv;
      double inl = 0.0;
      for (auto it = m_spec.inl_coeffs.rbegin(); it != m_spec.inl_coeffs.rend(); ++it) {
        inl = inl * u + *it;
      }
      v += inl * 1000.0;
    }
    return v;
  }

  template<class Rng>
  Quantized convert_nv(double p_v_nv, Rng& p_rng) const
  {
    if (p_v_nv < 0.0) {
      throw DomainError("quantizer input must be non-negative");
    }
    double v = transfer_nv(p_v_nv);
    if (m_spec.noise_sigma_uv > 0.0) {
      std::normal_distribution<double> noise(0.0, m_spec.noise_sigma_uv * 1000.0);
      v += noise(p_rng);
    }
    return place(v);
  }

  [[nodiscard]] Quantized convert_nv(double p_v_nv) const
  {
    if (m_spec.noise_sigma_uv > 0.0) {
      throw DomainError("noisy converter needs a random source");
    }
    std::mt19937_64 unused;
    return convert_nv(p_v_nv, unused);
  }

  /// Mid-code reconstruction in reading units.
  [[nodiscard]] double value_of(std::int64_t p_code) const
  {
    const double uv = (static_cast<double>(p_code) + 0.5) * lsb(m_spec);
    return m_spec.shunt ? uv / m_spec.shunt->in_units() : uv;
  }

private:
  [[nodiscard]] Quantized place(double p_v) const
  {
    const auto top = m_spec.code_count() - 1;
    if (p_v < 0.0) {
      return { 0, true };
    }
    if (!m_thresholds.empty()) {
      const auto it = std::upper_bound(m_thresholds.begin(), m_thresholds.end(), p_v);
      const auto code = static_cast<std::int64_t>(it - m_thresholds.begin()) - 1;
      if (code > top) {
        return { top, true };
      }
      return { code, false };
    }
    // Exact floor of v * 2^n / fs: v * 2^n and k * fs are exact in long double.
    const long double scaled = std::ldexp(static_cast<long double>(p_v), m_spec.n_bits);
    const long double fs = m_fs_nv;
    auto code = static_cast<std::int64_t>(std::floor(scaled / fs));
    while (code > 0 && static_cast<long double>(code) * fs > scaled) {
      --code;
    }
    while (static_cast<long double>(code + 1) * fs <= scaled) {
      ++code;
    }
    if (code > top) {
      return { top, true };
    }
    return { code, false };
  }

  AdcSpec m_spec;
  double m_fs_nv;
  std::vector<double> m_thresholds;
};

template<class Rng>
Quantized quantize_nonideal(Voltage p_v, const AdcSpec& p_spec, Rng& p_rng)
{
  return Adc(p_spec).convert_nv(static_cast<double>(p_v.count()), p_rng);
}

// ---------------------------------------------------------------------------
// Stimulus and traces

/// Output held at `level` (nV or pA counts) over [t_start, t_end).
struct Segment
{
  Nanos t_start{};
  Nanos t_end{};
  std::int64_t level = 0;
};

struct StimulusTimeline
{
  OutputKind kind = OutputKind::current;
  std::vector<Segment> segments;

  [[nodiscard]] Nanos end() const
  {
    return segments.empty() ? Nanos{} : segments.back().t_end;
  }
};

/// The output as the board actually produced it, from its state history.
inline StimulusTimeline timeline_from(
  const std::vector<hal::MockTransport::StateChange>& p_history,
  OutputKind p_kind,
  Nanos p_end)
{
  StimulusTimeline timeline;
  timeline.kind = p_kind;
  for (std::size_t i = 0; i < p_history.size(); ++i) {
    const Nanos start = p_history[i].t;
    const Nanos stop = i + 1 < p_history.size() ? p_history[i + 1].t : p_end;
    if (stop <= start) {
      continue;
    }
    const auto& out = p_history[i].output;
    const std::int64_t level =
      p_kind == OutputKind::current ? out.current.count() : out.voltage.count();
    if (!timeline.segments.empty() && timeline.segments.back().level == level &&
        timeline.segments.back().t_end == start) {
      timeline.segments.back().t_end = stop;
    } else {
      timeline.segments.push_back({ start, stop, level });
    }
  }
  return timeline;
}

struct Sample
{
  std::int64_t index = 0;
  Nanos t{};
  std::int64_t code = 0;
  double value = 0.0;
};

/**
 * @brief Readings on a uniform grid t_k = phase + floor(k * 1e9 / rate) ns.
 *
 * Storage is run-length: a run starts at a sample index and holds until the
 * next run. Dropouts are index ranges [first, last) with no reading.
 */
class SampleTrace
{
public:
  struct Run
  {
    std::int64_t start = 0;
    std::int64_t code = 0;
    double value = 0.0;

    bool operator==(const Run&) const = default;
  };

  SampleTrace() = default;
  SampleTrace(std::int64_t p_rate_hz, Nanos p_phase)
    : m_rate(p_rate_hz)
    , m_phase(p_phase)
  {
    if (p_rate_hz <= 0) {
      throw ValidationError("trace sample rate must be positive");
    }
  }

  [[nodiscard]] std::int64_t rate_hz() const { return m_rate; }
  [[nodiscard]] Nanos phase() const { return m_phase; }
  [[nodiscard]] std::int64_t size() const { return m_count; }
  [[nodiscard]] const std::vector<Run>& runs() const { return m_runs; }
  [[nodiscard]] const std::vector<std::pair<std::int64_t, std::int64_t>>& dropouts() const
  {
    return m_dropouts;
  }

  std::string unit = "uV";
  double full_scale = 0.0;
  std::int64_t saturated = 0;

  [[nodiscard]] Nanos time_of(std::int64_t p_index) const
  {
    return m_phase + Nanos(static_cast<std::int64_t>(
                       static_cast<int128>(p_index) * 1'000'000'000 / m_rate));
  }

  /// Smallest index whose time is at or after `p_t` (may equal size()).
  [[nodiscard]] std::int64_t first_index_at_or_after(Nanos p_t) const
  {
    if (p_t <= m_phase) {
      return 0;
    }
    const int128 offset = (p_t - m_phase).count();
    auto k = static_cast<std::int64_t>((offset * m_rate) / 1'000'000'000);
    while (k > 0 && time_of(k - 1) >= p_t) {
      --k;
    }
    while (time_of(k) < p_t) {
      ++k;
    }
    return k;
  }

  /// Append `p_repeat` samples of one code.
  void append(std::int64_t p_code, double p_value, std::int64_t p_repeat = 1)
  {
    if (p_repeat <= 0) {
      return;
    }
    if (m_runs.empty() || m_runs.back().code != p_code ||
        m_runs.back().value != p_value) {
      m_runs.push_back({ m_count, p_code, p_value });
    }
    m_count += p_repeat;
  }

  /// Mark [first, last) as lost.
  void add_dropout(std::int64_t p_first, std::int64_t p_last)
  {
    p_first = std::max<std::int64_t>(p_first, 0);
    p_last = std::min(p_last, m_count);
    if (p_first >= p_last) {
      return;
    }
    m_dropouts.emplace_back(p_first, p_last);
    std::sort(m_dropouts.begin(), m_dropouts.end());
    std::vector<std::pair<std::int64_t, std::int64_t>> merged;
    for (const auto& range : m_dropouts) {
      if (!merged.empty() && range.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, range.second);
      } else {
        merged.push_back(range);
      }
    }
    m_dropouts = std::move(merged);
  }

  void add_dropout_time(Nanos p_from, Nanos p_to)
  {
    add_dropout(first_index_at_or_after(p_from), first_index_at_or_after(p_to));
  }

  /// The dropout containing `p_index`, if any.
  [[nodiscard]] std::optional<std::pair<std::int64_t, std::int64_t>> dropout_at(
    std::int64_t p_index) const
  {
    auto it = std::upper_bound(m_dropouts.begin(),
                               m_dropouts.end(),
                               std::pair{ p_index, INT64_MAX });
    if (it == m_dropouts.begin()) {
      return std::nullopt;
    }
    --it;
    if (p_index < it->second) {
      return *it;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::optional<Sample> at(std::int64_t p_index) const
  {
    if (p_index < 0 || p_index >= m_count || dropout_at(p_index)) {
      return std::nullopt;
    }
    const auto it = std::upper_bound(
      m_runs.begin(), m_runs.end(), p_index, [](std::int64_t p_k, const Run& p_run) {
        return p_k < p_run.start;
      });
    const Run& run = *std::prev(it);
    return Sample{ p_index, time_of(p_index), run.code, run.value };
  }

  bool operator==(const SampleTrace&) const = default;

private:
  std::int64_t m_rate = 1;
  Nanos m_phase{};
  std::int64_t m_count = 0;
  std::vector<Run> m_runs;
  std::vector<std::pair<std::int64_t, std::int64_t>> m_dropouts;
};

/**
 * @brief Record a timeline with one instrument over [0, duration).
 *
 * Noise draws come from `p_rng` in sample order. A noise-free instrument reads
 * the same code throughout a segment, so segments are converted once.
 */
template<class Rng>
SampleTrace sample(const StimulusTimeline& p_timeline,
                   const AdcSpec& p_spec,
                   Nanos p_duration,
                   Rng& p_rng)
{
  const Adc adc(p_spec);
  if (p_spec.measures() != p_timeline.kind) {
    throw ValidationError(fmt::format("instrument '{}' measures {} but the stimulus is {}",
                                      p_spec.name,
                                      to_string(p_spec.measures()),
                                      to_string(p_timeline.kind)));
  }
  if (p_timeline.segments.empty() || p_timeline.segments.front().t_start > p_spec.phase ||
      p_timeline.end() < p_duration) {
    throw ValidationError("stimulus timeline does not cover the recording");
  }
  SampleTrace trace(p_spec.sample_rate_hz, p_spec.phase);
  trace.unit = p_spec.shunt ? "uA" : "uV";
  trace.full_scale = p_spec.full_scale();

  const auto input_nv = [&](std::int64_t p_level) {
    if (p_spec.shunt) {
      return shunt_voltage_nv(Current(p_level), *p_spec.shunt);
    }
    return static_cast<double>(p_level);
  };
  const std::int64_t total = trace.first_index_at_or_after(p_duration);
  const bool noisy = p_spec.noise_sigma_uv > 0.0;
  std::int64_t k = 0;
  for (const auto& seg : p_timeline.segments) {
    if (k >= total) {
      break;
    }
    const std::int64_t end = std::min(total, trace.first_index_at_or_after(seg.t_end));
    if (end <= k) {
      continue;
    }
    const double v = input_nv(seg.level);
    if (noisy) {
      for (; k < end; ++k) {
        const auto q = adc.convert_nv(v, p_rng);
        trace.saturated += q.saturated ? 1 : 0;
        trace.append(q.code, adc.value_of(q.code));
      }
    } else {
      const auto q = adc.convert_nv(v);
      trace.saturated += q.saturated ? end - k : 0;
      trace.append(q.code, adc.value_of(q.code), end - k);
      k = end;
    }
  }
  return trace;
}

// Trace file: `# trace key=value ...` header, `# dropout=first-last` lines,
// then `t_us,code,value` rows, either every sample (dense) or the first sample
// of each run (changes).

inline void write_trace(std::ostream& p_out, const SampleTrace& p_trace)
{
  const bool dense = p_trace.size() <= 200'000;
  p_out << "# trace rate_hz=" << p_trace.rate_hz()
        << " phase_ns=" << p_trace.phase().count() << " count=" << p_trace.size()
        << " unit=" << p_trace.unit << " full_scale=" << format_real(p_trace.full_scale)
        << " saturated=" << p_trace.saturated
        << " encoding=" << (dense ? "dense" : "changes") << '\n';
  for (const auto& [first, last] : p_trace.dropouts()) {
    p_out << "# dropout=" << first << '-' << last << '\n';
  }
  p_out << "t_us,code,value\n";
  const auto row = [&](std::int64_t p_k, const SampleTrace::Run& p_run) {
    p_out << format_us(p_trace.time_of(p_k)) << ',' << p_run.code << ','
          << fmt::format("{:.6f}", p_run.value) << '\n';
  };
  const auto& runs = p_trace.runs();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const std::int64_t stop = r + 1 < runs.size() ? runs[r + 1].start : p_trace.size();
    if (dense) {
      for (std::int64_t k = runs[r].start; k < stop; ++k) {
        row(k, runs[r]);
      }
    } else {
      row(runs[r].start, runs[r]);
    }
  }
}

inline SampleTrace read_trace(std::istream& p_in)
{
  std::string line;
  if (!std::getline(p_in, line) || line.rfind("# trace ", 0) != 0) {
    throw ValidationError("trace file must start with a '# trace' header");
  }
  TextConfig header;
  {
    std::istringstream fields(line.substr(8));
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("bad trace header field '" + field + "'");
      }
      header.set(field.substr(0, eq), field.substr(eq + 1));
    }
  }
  SampleTrace trace(header.integer("rate_hz"), Nanos(header.integer("phase_ns")));
  trace.unit = header.at("unit");
  trace.full_scale = header.real("full_scale");
  trace.saturated = header.integer("saturated");
  const std::int64_t count = header.integer("count");
  const bool dense = header.at("encoding") == "dense";
  if (!dense && header.at("encoding") != "changes") {
    throw ValidationError("unknown trace encoding '" + header.at("encoding") + "'");
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> dropouts;
  struct Row
  {
    std::int64_t index;
    std::int64_t code;
    double value;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(p_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.rfind("# dropout=", 0) == 0) {
      const auto dash = line.find('-', 10);
      if (dash == std::string::npos) {
        throw ValidationError(fmt::format("trace line {}: bad dropout", line_no));
      }
      dropouts.emplace_back(parse_fixed(line.substr(10, dash - 10), 0),
                            parse_fixed(line.substr(dash + 1), 0));
      continue;
    }
    if (line.empty() || line[0] == '#' || line == "t_us,code,value") {
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ValidationError(fmt::format("trace line {}: expected 3 columns", line_no));
    }
    const Nanos t = parse_us(line.substr(0, c1));
    const std::int64_t index = trace.first_index_at_or_after(t);
    if (trace.time_of(index) != t) {
      throw ValidationError(fmt::format("trace line {}: time off the sample grid", line_no));
    }
    double value = 0.0;
    try {
      value = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("trace line {}: bad value", line_no));
    }
    if (!rows.empty() && index <= rows.back().index) {
      throw ValidationError(fmt::format("trace line {}: times must increase", line_no));
    }
    if (dense && index != static_cast<std::int64_t>(rows.size())) {
      throw ValidationError(fmt::format("trace line {}: dense trace has a gap", line_no));
    }
    rows.push_back({ index, parse_fixed(line.substr(c1 + 1, c2 - c1 - 1), 0), value });
  }
  if (count > 0 && (rows.empty() || rows.front().index != 0)) {
    throw ValidationError("trace rows must start at the first sample");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::int64_t stop = r + 1 < rows.size() ? rows[r + 1].index : count;
    if (stop > count || stop <= rows[r].index) {
      throw ValidationError("trace rows exceed the declared count");
    }
    trace.append(rows[r].code, rows[r].value, stop - rows[r].index);
  }
  for (const auto& [first, last] : dropouts) {
    trace.add_dropout(first, last);
  }
  return trace;
}

inline void save_trace(const std::string& p_path, const SampleTrace& p_trace)
{
  std::ofstream out(p_path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + p_path + "'");
  }
  write_trace(out, p_trace);
}

inline SampleTrace load_trace(const std::string& p_path)
{
  std::ifstream in(p_path);
  if (!in) {
    throw ValidationError("cannot open '" + p_path + "'");
  }
  return read_trace(in);
}

}  // namespace procal
