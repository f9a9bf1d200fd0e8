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

#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "procal/circuit.hpp"
#include "procal/hal.hpp"
#include "procal/setup_file.hpp"
#include "procal/units.hpp"

namespace procal {

struct SweepParams
{
  OutputKind kind = OutputKind::current;
  Nanos period{ 5'000'000 };
  /// Current mode stops before the first step reaching this current.
  std::optional<Current> i_max;
  /// Voltage mode stops before the first step at or below this voltage.
  std::optional<Voltage> v_min;
};

inline void validate(const SweepParams& p_params)
{
  if (p_params.period.count() <= 0) {
    throw ValidationError("sweep period must be positive");
  }
  if (p_params.period <= 2 * hal::bus_write_time) {
    throw ValidationError(fmt::format(
      "sweep period must exceed two bus writes ({} us)",
      format_us(2 * hal::bus_write_time)));
  }
  if (p_params.kind == OutputKind::current && p_params.v_min) {
    throw ValidationError("v_min applies to voltage mode only");
  }
  if (p_params.kind == OutputKind::voltage && p_params.i_max) {
    throw ValidationError("i_max applies to current mode only");
  }
}

/// Switch bits of the two slot groups the ladder walks, lowest bit first.
struct BankLayout
{
  std::vector<int> fine_bits;
  std::vector<int> coarse_bits;

  [[nodiscard]] std::uint16_t mask(int p_coarse, int p_fine) const
  {
    std::uint16_t out = 0;
    for (int k = 0; k < p_coarse; ++k) {
      out |= static_cast<std::uint16_t>(1U << coarse_bits[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < p_fine; ++k) {
      out |= static_cast<std::uint16_t>(1U << fine_bits[static_cast<std::size_t>(k)]);
    }
    return out;
  }
};

/**
 * @brief Split the bank into fine and coarse groups.
 *
 * Explicit group tags win. Untagged slots go by value: with two distinct
 * values the smaller resistance is coarse, otherwise everything is fine.
 */
inline BankLayout layout_for(const ResistorBank& p_bank)
{
  validate(p_bank);
  Resistance smallest{ INT64_MAX };
  Resistance largest{};
  for (const auto& slot : p_bank.slots) {
    if (slot.group == SlotGroup::automatic) {
      smallest = std::min(smallest, slot.r_nominal);
      largest = std::max(largest, slot.r_nominal);
    }
  }
  BankLayout layout;
  for (std::size_t bit = 0; bit < p_bank.slots.size(); ++bit) {
    const auto& slot = p_bank.slots[bit];
    bool coarse = slot.group == SlotGroup::coarse;
    if (slot.group == SlotGroup::automatic) {
      coarse = smallest != largest && slot.r_nominal == smallest;
    }
    (coarse ? layout.coarse_bits : layout.fine_bits).push_back(static_cast<int>(bit));
  }
  return layout;
}

/// Masks of the ladder blocks in sweep order: coarse count outer, fine inner.
inline std::vector<std::uint16_t> ladder_masks(const BankLayout& p_layout)
{
  std::vector<std::uint16_t> masks;
  const auto coarse = static_cast<int>(p_layout.coarse_bits.size());
  const auto fine = static_cast<int>(p_layout.fine_bits.size());
  for (int i = 0; i <= coarse; ++i) {
    for (int j = 0; j <= fine; ++j) {
      masks.push_back(p_layout.mask(i, j));
    }
  }
  return masks;
}

struct PlanStep
{
  int step = 0;
  int block_i = 0;
  int block_j = 0;
  int pot_code = 0;
  std::uint16_t switch_mask = 0;
  ElectricalOutput expected{};
  /// Closed-form estimate ignoring wiper, switch and protection terms.
  Current nominal{};

  bool operator==(const PlanStep&) const = default;
};

struct SweepPlan
{
  CircuitSetup setup;
  OutputKind kind = OutputKind::current;
  std::vector<PlanStep> steps;
  /// A stop threshold cut the ladder short.
  bool truncated = false;
};

inline Current nominal_current(const CircuitSetup& p_setup,
                               int p_code,
                               std::uint16_t p_mask)
{
  Current total = ohms_law_current(
    p_setup.v_in, pot_resistance(p_setup.pot, p_code) + p_setup.r_protect);
  for (std::size_t bit = 0; bit < p_setup.bank.slots.size(); ++bit) {
    if ((p_mask >> bit) & 1U) {
      total += ohms_law_current(p_setup.v_in, p_setup.bank.slots[bit].r_nominal);
    }
  }
  return total;
}

/**
 * @brief Lay out the configuration ladder.
 *
 * For every coarse count i and fine count j the pot walks from its top code
 * down to 0. The plan stops before the first step that meets the mode's
 * threshold; if the very first step already meets it, that step is kept.
 */
inline SweepPlan build_plan(const CircuitSetup& p_setup,
                            const SweepParams& p_params)
{
  validate(p_setup);
  validate(p_params);
  const BankLayout layout = layout_for(p_setup.bank);
  SweepPlan plan;
  plan.setup = p_setup;
  plan.kind = p_params.kind;

  const auto coarse = static_cast<int>(layout.coarse_bits.size());
  const auto fine = static_cast<int>(layout.fine_bits.size());
  for (int i = 0; i <= coarse; ++i) {
    for (int j = 0; j <= fine; ++j) {
      const std::uint16_t mask = layout.mask(i, j);
      for (int x = p_setup.pot.top_code(); x >= 0; --x) {
        PlanStep step;
        step.step = static_cast<int>(plan.steps.size());
        step.block_i = i;
        step.block_j = j;
        step.pot_code = x;
        step.switch_mask = mask;
        step.expected = evaluate(p_setup, x, mask, p_params.kind);
        step.nominal = nominal_current(p_setup, x, mask);
        const bool stop =
          (p_params.i_max && step.expected.current >= *p_params.i_max) ||
          (p_params.v_min && step.expected.voltage <= *p_params.v_min);
        if (stop) {
          plan.truncated = true;
          if (plan.steps.empty()) {
            plan.steps.push_back(step);
          }
          return plan;
        }
        plan.steps.push_back(step);
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Clocks

class Clock
{
public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual Nanos now() const = 0;
  virtual void sleep_until(Nanos p_t) = 0;
};

/// Simulated time: sleeping jumps straight to the deadline.
class VirtualClock : public Clock
{
public:
  [[nodiscard]] Nanos now() const override { return m_now; }
  void sleep_until(Nanos p_t) override
  {
    if (p_t < m_now) {
      throw ProtocolError("virtual clock cannot run backwards");
    }
    m_now = p_t;
  }

private:
  Nanos m_now{};
};

/// Wall-clock adapter for driving real hardware.
class SteadyClock : public Clock
{
public:
  SteadyClock()
    : m_origin(std::chrono::steady_clock::now())
  {
  }
  [[nodiscard]] Nanos now() const override
  {
    return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now() -
                                             m_origin);
  }
  void sleep_until(Nanos p_t) override
  {
    std::this_thread::sleep_until(m_origin + p_t);
  }

private:
  std::chrono::steady_clock::time_point m_origin;
};

// ---------------------------------------------------------------------------
// Execution

struct SettlingEntry
{
  Nanos t_settle{};
  int step = 0;
  int pot_code = 0;
  std::uint16_t switch_mask = 0;
  Current expected_current{};
  Voltage expected_voltage{};

  bool operator==(const SettlingEntry&) const = default;
};

struct SettlingLog
{
  Nanos period{};
  std::vector<SettlingEntry> entries;
  bool incomplete = false;
  std::string failure;
};

struct SweepResult
{
  SettlingLog log;
  std::vector<hal::TransportEvent> events;
  /// Time of the stop trigger; instruments record over [0, duration).
  Nanos duration{};
};

/// Pot write instant of step `p_index`; its window is [t, t + T).
inline Nanos configure_time(Nanos p_period, std::size_t p_index)
{
  return p_period * static_cast<std::int64_t>(p_index) + 2 * hal::bus_write_time;
}

/**
 * @brief Run a plan against a transport.
 *
 * Each step owns one period. The switch word (when it changes) goes out one
 * bus write into the period, the pot code one write later; the settle stamp
 * is half a period after the pot write. A transport failure ends the run with
 * the log so far marked incomplete.
 */
inline SweepResult execute(const SweepPlan& p_plan,
                           const SweepParams& p_params,
                           hal::Transport& p_transport,
                           Clock& p_clock)
{
  validate(p_params);
  SweepResult result;
  result.log.period = p_params.period;
  hal::Session session(p_transport);
  const Nanos period = p_params.period;
  const Nanos origin = p_clock.now();
  const auto at = [&](Nanos p_offset) {
    p_clock.sleep_until(origin + p_offset);
    return p_offset;
  };

  std::uint16_t mask = 0;
  std::size_t index = 0;
  try {
    session.start(at(Nanos{ 0 }));
    for (; index < p_plan.steps.size(); ++index) {
      const auto& step = p_plan.steps[index];
      const Nanos slot = period * static_cast<std::int64_t>(index);
      if (step.switch_mask != mask) {
        session.write_switches(at(slot + hal::bus_write_time),
                               hal::encode_switches(step.switch_mask));
        mask = step.switch_mask;
      }
      const Nanos t_config = at(configure_time(period, index));
      session.write_pot(t_config,
                        hal::encode_pot(step.pot_code, p_plan.setup.pot.n_bits));
      const Nanos t_settle = at(t_config + period / 2);
      result.log.entries.push_back({ t_settle,
                                     step.step,
                                     step.pot_code,
                                     step.switch_mask,
                                     step.expected.current,
                                     step.expected.voltage });
    }
    result.duration = std::max(period * static_cast<std::int64_t>(index),
                               hal::bus_write_time);
    session.stop(at(result.duration));
  } catch (const TransportError& e) {
    result.log.incomplete = true;
    result.log.failure = fmt::format("step {}: {}", index, e.what());
    result.duration = p_clock.now() - origin;
  }
  result.events = session.log();
  return result;
}

// ---------------------------------------------------------------------------
// Files

inline std::string mask_hex(std::uint16_t p_mask)
{
  return fmt::format("{:04x}", p_mask);
}

inline std::uint16_t parse_mask_hex(const std::string& p_text)
{
  if (p_text.empty() || p_text.size() > 4 ||
      p_text.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw ValidationError("bad switch mask '" + p_text + "'");
  }
  return static_cast<std::uint16_t>(std::stoul(p_text, nullptr, 16));
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& p_line)
{
  std::vector<std::string> cols;
  std::string cell;
  std::stringstream row(p_line);
  while (std::getline(row, cell, ',')) {
    cols.push_back(cell);
  }
  if (!p_line.empty() && p_line.back() == ',') {
    cols.emplace_back();
  }
  return cols;
}

inline std::int64_t parse_int_cell(const std::string& p_text)
{
  return parse_fixed(p_text, 0);
}
}  // namespace detail

inline constexpr const char* settling_log_header =
  "t_settle_us,step,pot_code,switch_mask_hex,exp_i_ua,exp_v_uv";

inline void write_settling_log(std::ostream& p_out, const SettlingLog& p_log)
{
  p_out << settling_log_header << '\n';
  for (const auto& e : p_log.entries) {
    p_out << format_us(e.t_settle) << ',' << e.step << ',' << e.pot_code << ','
          << mask_hex(e.switch_mask) << ','
          << format_fixed(e.expected_current.count(), 6) << ','
          << format_fixed(e.expected_voltage.count(), 3) << '\n';
  }
  p_out << "# period_us=" << format_us(p_log.period) << '\n';
  if (p_log.incomplete) {
    p_out << "# incomplete=" << p_log.failure << '\n';
  }
}

inline SettlingLog read_settling_log(std::istream& p_in)
{
  SettlingLog log;
  std::string line;
  int line_no = 0;
  bool has_period = false;
  while (std::getline(p_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line == settling_log_header) {
      continue;
    }
    if (line.rfind("# period_us=", 0) == 0) {
      log.period = parse_us(line.substr(12));
      has_period = true;
      continue;
    }
    if (line.rfind("# incomplete=", 0) == 0) {
      log.incomplete = true;
      log.failure = line.substr(13);
      continue;
    }
    if (line[0] == '#') {
      continue;
    }
    const auto cols = detail::split_csv(line);
    if (cols.size() != 6) {
      throw ValidationError(
        fmt::format("settling log line {}: expected 6 columns", line_no));
    }
    SettlingEntry e;
    e.t_settle = parse_us(cols[0]);
    e.step = static_cast<int>(detail::parse_int_cell(cols[1]));
    e.pot_code = static_cast<int>(detail::parse_int_cell(cols[2]));
    e.switch_mask = parse_mask_hex(cols[3]);
    e.expected_current = Current(parse_fixed(cols[4], 6));
    e.expected_voltage = Voltage(parse_fixed(cols[5], 3));
    if (!log.entries.empty() && e.t_settle <= log.entries.back().t_settle) {
      throw ValidationError(fmt::format(
        "settling log line {}: timestamps must increase", line_no));
    }
    log.entries.push_back(e);
  }
  if (!has_period || log.period.count() <= 0) {
    throw ValidationError("settling log lacks a positive '# period_us=' footer");
  }
  return log;
}

inline void save_settling_log(const std::string& p_path, const SettlingLog& p_log)
{
  std::ofstream out(p_path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + p_path + "'");
  }
  write_settling_log(out, p_log);
}

inline SettlingLog load_settling_log(const std::string& p_path)
{
  std::ifstream in(p_path);
  if (!in) {
    throw ValidationError("cannot open '" + p_path + "'");
  }
  return read_settling_log(in);
}

inline constexpr const char* plan_header =
  "step,block_i,block_j,pot_code,switch_mask_hex,exp_i_ua,exp_v_uv,nominal_i_ua";

/// Plan file: `#@ key = value` metadata (mode, setup), then one CSV row per step.
inline void write_plan(std::ostream& p_out, const SweepPlan& p_plan)
{
  p_out << "#@ mode = " << to_string(p_plan.kind) << '\n';
  p_out << "#@ truncated = " << (p_plan.truncated ? 1 : 0) << '\n';
  const TextConfig setup_doc = setup_to_text(p_plan.setup);
  for (const auto& [key, value] : setup_doc.entries()) {
    p_out << "#@ setup." << key << " = " << value << '\n';
  }
  p_out << plan_header << '\n';
  for (const auto& s : p_plan.steps) {
    p_out << s.step << ',' << s.block_i << ',' << s.block_j << ',' << s.pot_code
          << ',' << mask_hex(s.switch_mask) << ','
          << format_fixed(s.expected.current.count(), 6) << ','
          << format_fixed(s.expected.voltage.count(), 3) << ','
          << format_fixed(s.nominal.count(), 6) << '\n';
  }
}

/// Expected values are recomputed from the embedded setup and must agree.
inline SweepPlan read_plan(std::istream& p_in)
{
  SweepPlan plan;
  TextConfig meta;
  TextConfig setup_doc;
  std::string line;
  int line_no = 0;
  std::vector<std::pair<int, std::string>> rows;
  while (std::getline(p_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.rfind("#@", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError(fmt::format("plan line {}: bad metadata", line_no));
      }
      const auto key = TextConfig::trim(line.substr(2, eq - 2));
      const auto value = TextConfig::trim(line.substr(eq + 1));
      if (key.rfind("setup.", 0) == 0) {
        setup_doc.set(key.substr(6), value);
      } else {
        meta.set(key, value);
      }
      continue;
    }
    if (line.empty() || line[0] == '#' || line == plan_header) {
      continue;
    }
    rows.emplace_back(line_no, line);
  }
  plan.kind = parse_output_kind(meta.at("mode"));
  plan.truncated = meta.contains("truncated") && meta.boolean("truncated");
  plan.setup = setup_from_text(setup_doc);

  for (const auto& [row_no, text] : rows) {
    const auto cols = detail::split_csv(text);
    if (cols.size() != 8) {
      throw ValidationError(fmt::format("plan line {}: expected 8 columns", row_no));
    }
    PlanStep s;
    s.step = static_cast<int>(detail::parse_int_cell(cols[0]));
    s.block_i = static_cast<int>(detail::parse_int_cell(cols[1]));
    s.block_j = static_cast<int>(detail::parse_int_cell(cols[2]));
    s.pot_code = static_cast<int>(detail::parse_int_cell(cols[3]));
    s.switch_mask = parse_mask_hex(cols[4]);
    try {
      s.expected = evaluate(plan.setup, s.pot_code, s.switch_mask, plan.kind);
    } catch (const DomainError& e) {
      throw ValidationError(fmt::format("plan line {}: {}", row_no, e.what()));
    }
    s.nominal = nominal_current(plan.setup, s.pot_code, s.switch_mask);
    if (s.expected.current.count() != parse_fixed(cols[5], 6) ||
        s.expected.voltage.count() != parse_fixed(cols[6], 3)) {
      throw ValidationError(fmt::format(
        "plan line {}: expected values disagree with the embedded setup", row_no));
    }
    if (s.step != static_cast<int>(plan.steps.size())) {
      throw ValidationError(fmt::format("plan line {}: steps out of order", row_no));
    }
    plan.steps.push_back(s);
  }
  return plan;
}

inline void save_plan(const std::string& p_path, const SweepPlan& p_plan)
{
  std::ofstream out(p_path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + p_path + "'");
  }
  write_plan(out, p_plan);
}

inline SweepPlan load_plan(const std::string& p_path)
{
  std::ifstream in(p_path);
  if (!in) {
    throw ValidationError("cannot open '" + p_path + "'");
  }
  return read_plan(in);
}

}  // namespace procal
