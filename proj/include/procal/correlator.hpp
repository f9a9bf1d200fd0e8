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
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "procal/instruments.hpp"
#include "procal/sweep.hpp"

namespace procal {

/// True when one period is strictly longer than one sample interval.
inline bool check_rate(Nanos p_period, std::int64_t p_rate_hz)
{
  if (p_period.count() <= 0 || p_rate_hz <= 0) {
    throw DomainError("period and sample rate must be positive");
  }
  return static_cast<int128>(p_period.count()) * p_rate_hz > 1'000'000'000;
}

inline void require_rate(Nanos p_period, std::int64_t p_rate_hz, const std::string& p_who)
{
  if (!check_rate(p_period, p_rate_hz)) {
    throw ValidationError(fmt::format(
      "{} samples at {} Hz; the period T = {} us must exceed one sample "
      "interval (T > 1/r_min)",
      p_who,
      p_rate_hz,
      format_us(p_period)));
  }
}

/**
 * @brief Sample nearest each settle stamp.
 *
 * Only samples in [t_settle - T/2, t_settle + T/2) qualify; at equal distance
 * the earlier sample wins. A step with no qualifying sample is empty.
 */
inline std::vector<std::optional<Sample>> match(const SettlingLog& p_log,
                                                const SampleTrace& p_trace)
{
  if (p_trace.size() == 0) {
    throw ValidationError("cannot match against an empty trace");
  }
  const Nanos half = p_log.period / 2;
  std::vector<std::optional<Sample>> out;
  out.reserve(p_log.entries.size());
  for (const auto& entry : p_log.entries) {
    const Nanos lo = entry.t_settle - half;
    const Nanos hi = entry.t_settle - half + p_log.period;

    std::int64_t after = p_trace.first_index_at_or_after(entry.t_settle);
    std::int64_t before = after - 1;
    if (auto gap = p_trace.dropout_at(after)) {
      after = gap->second;
    }
    if (auto gap = p_trace.dropout_at(before)) {
      before = gap->first - 1;
    }
    const auto in_window = [&](std::int64_t p_k) {
      if (p_k < 0 || p_k >= p_trace.size()) {
        return false;
      }
      const Nanos t = p_trace.time_of(p_k);
      return t >= lo && t < hi;
    };
    std::optional<std::int64_t> pick;
    if (in_window(before)) {
      pick = before;
    }
    if (in_window(after)) {
      const auto d_after = p_trace.time_of(after) - entry.t_settle;
      if (!pick || d_after < entry.t_settle - p_trace.time_of(*pick)) {
        pick = after;
      }
    }
    out.push_back(pick ? p_trace.at(*pick) : std::nullopt);
  }
  return out;
}

struct Pair
{
  int step = 0;
  double dut_value = 0.0;
  double ref_value = 0.0;
  Nanos dut_t{};
  Nanos ref_t{};

  bool operator==(const Pair&) const = default;
};

struct PairedObservations
{
  std::vector<Pair> pairs;
  Nanos period{};
  std::int64_t skipped_dut = 0;
  std::int64_t skipped_ref = 0;
  /// Device full scale in reading units (uV or uA).
  double full_scale = 0.0;
  std::string unit = "uV";
};

/// Steps matched in both traces, in log order.
inline PairedObservations pair(const SettlingLog& p_log,
                               const SampleTrace& p_dut,
                               const SampleTrace& p_ref)
{
  require_rate(p_log.period, p_dut.rate_hz(), "device under test");
  require_rate(p_log.period, p_ref.rate_hz(), "reference meter");
  if (p_dut.unit != p_ref.unit) {
    throw ValidationError("device reads " + p_dut.unit + " but the reference reads " +
                          p_ref.unit);
  }
  const auto dut = match(p_log, p_dut);
  const auto ref = match(p_log, p_ref);
  PairedObservations obs;
  obs.period = p_log.period;
  obs.full_scale = p_dut.full_scale;
  obs.unit = p_dut.unit;
  for (std::size_t i = 0; i < p_log.entries.size(); ++i) {
    obs.skipped_dut += dut[i] ? 0 : 1;
    obs.skipped_ref += ref[i] ? 0 : 1;
    if (dut[i] && ref[i]) {
      obs.pairs.push_back({ p_log.entries[i].step,
                            dut[i]->value,
                            ref[i]->value,
                            dut[i]->t,
                            ref[i]->t });
    }
  }
  if (obs.pairs.empty()) {
    throw PipelineError("no step was matched in both traces");
  }
  return obs;
}

inline constexpr const char* pairs_header = "step,dut_value,ref_value,dut_t_us,ref_t_us";

inline void write_pairs(std::ostream& p_out, const PairedObservations& p_obs)
{
  p_out << pairs_header << '\n';
  for (const auto& p : p_obs.pairs) {
    p_out << p.step << ',' << fmt::format("{:.6f}", p.dut_value) << ','
          << fmt::format("{:.6f}", p.ref_value) << ',' << format_us(p.dut_t) << ','
          << format_us(p.ref_t) << '\n';
  }
  p_out << "# period_us=" << format_us(p_obs.period) << '\n';
  p_out << "# skipped_dut=" << p_obs.skipped_dut << '\n';
  p_out << "# skipped_ref=" << p_obs.skipped_ref << '\n';
  p_out << "# full_scale=" << format_real(p_obs.full_scale) << '\n';
  p_out << "# unit=" << p_obs.unit << '\n';
}

inline PairedObservations read_pairs(std::istream& p_in)
{
  PairedObservations obs;
  TextConfig footer;
  std::string line;
  int line_no = 0;
  while (std::getline(p_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.rfind("# ", 0) == 0 && line.find('=') != std::string::npos) {
      const auto eq = line.find('=');
      footer.set(TextConfig::trim(line.substr(2, eq - 2)), TextConfig::trim(line.substr(eq + 1)));
      continue;
    }
    if (line.empty() || line[0] == '#' || line == pairs_header) {
      continue;
    }
    const auto cols = detail::split_csv(line);
    if (cols.size() != 5) {
      throw ValidationError(fmt::format("pairs line {}: expected 5 columns", line_no));
    }
    Pair p;
    try {
      p.step = static_cast<int>(parse_fixed(cols[0], 0));
      p.dut_value = std::stod(cols[1]);
      p.ref_value = std::stod(cols[2]);
    } catch (const std::invalid_argument&) {
      throw ValidationError(fmt::format("pairs line {}: bad number", line_no));
    }
    p.dut_t = parse_us(cols[3]);
    p.ref_t = parse_us(cols[4]);
    obs.pairs.push_back(p);
  }
  obs.period = parse_us(footer.at("period_us"));
  obs.skipped_dut = footer.integer("skipped_dut");
  obs.skipped_ref = footer.integer("skipped_ref");
  obs.full_scale = footer.real("full_scale");
  obs.unit = footer.contains("unit") ? footer.at("unit") : "uV";
  if (!(obs.full_scale > 0.0)) {
    throw ValidationError("pairs footer: full_scale must be positive");
  }
  return obs;
}

inline void save_pairs(const std::string& p_path, const PairedObservations& p_obs)
{
  std::ofstream out(p_path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + p_path + "'");
  }
  write_pairs(out, p_obs);
}

inline PairedObservations load_pairs(const std::string& p_path)
{
  std::ifstream in(p_path);
  if (!in) {
    throw ValidationError("cannot open '" + p_path + "'");
  }
  return read_pairs(in);
}

}  // namespace procal
