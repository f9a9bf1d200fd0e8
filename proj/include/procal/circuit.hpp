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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "procal/error.hpp"
#include "procal/units.hpp"

/**
 * @file circuit.hpp
 * @brief Electrical model of the calibrator output stage.
 *
 * A digital potentiometer in series with a protection resistor forms the
 * "pot branch". Up to sixteen switched resistors sit in parallel with it. In
 * current mode the stage sinks current straight from the supply; in voltage
 * mode a series resistor r_c turns the network into a divider and the output
 * is the drop across r_c.
 */

namespace procal {

inline constexpr int max_bank_slots = 16;

struct PotentiometerSpec
{
  int n_bits = 8;
  Resistance r_max{};
  Resistance r_wiper{};
  Current i_rated{};
  /// When set, codes run 0..2^n (2^n + 1 codes) instead of 0..2^n - 1.
  bool inclusive_top_code = true;

  [[nodiscard]] int top_code() const
  {
    return inclusive_top_code ? (1 << n_bits) : (1 << n_bits) - 1;
  }
  [[nodiscard]] int code_count() const { return top_code() + 1; }
};

/// Which loop of the sweep ladder a slot belongs to.
enum class SlotGroup
{
  automatic,
  fine,
  coarse,
};

struct BankSlot
{
  Resistance r_nominal{};
  Resistance r_switch_on{};
  SlotGroup group = SlotGroup::automatic;

  [[nodiscard]] Resistance total() const { return r_nominal + r_switch_on; }
};

struct ResistorBank
{
  /// Slot b is driven by bit b of the switch mask.
  std::vector<BankSlot> slots;

  [[nodiscard]] std::uint32_t full_mask() const
  {
    return slots.empty() ? 0U : ((1U << slots.size()) - 1U);
  }
};

struct CurrentOutput
{
  auto operator<=>(const CurrentOutput&) const = default;
};
struct VoltageOutput
{
  Resistance r_c{};
  auto operator<=>(const VoltageOutput&) const = default;
};
using OutputMode = std::variant<CurrentOutput, VoltageOutput>;

enum class OutputKind
{
  current,
  voltage,
};

inline OutputKind kind_of(const OutputMode& p_mode)
{
  return std::holds_alternative<CurrentOutput>(p_mode) ? OutputKind::current
                                                       : OutputKind::voltage;
}

inline const char* to_string(OutputKind p_kind)
{
  return p_kind == OutputKind::current ? "current" : "voltage";
}

inline OutputKind parse_output_kind(const std::string& p_text)
{
  if (p_text == "current") {
    return OutputKind::current;
  }
  if (p_text == "voltage") {
    return OutputKind::voltage;
  }
  throw ValidationError("unknown output mode '" + p_text +
                        "' (expected current or voltage)");
}

/// One complete hardware state.
struct CircuitConfig
{
  int pot_code = 0;
  std::uint16_t switch_mask = 0;
  OutputMode mode = CurrentOutput{};
  Voltage v_in{};
  Resistance r_protect{};
};

struct ElectricalOutput
{
  Current current{};
  Voltage voltage{};
  Resistance r_equivalent{};
  /// Pot-branch current exceeds the potentiometer rating.
  bool over_rated = false;

  bool operator==(const ElectricalOutput&) const = default;
};

/// Component values of one board: everything a configuration file describes.
struct CircuitSetup
{
  PotentiometerSpec pot;
  ResistorBank bank;
  Resistance r_protect{};
  Resistance r_c{};
  Voltage v_in{};

  [[nodiscard]] OutputMode mode(OutputKind p_kind) const
  {
    if (p_kind == OutputKind::current) {
      return CurrentOutput{};
    }
    return VoltageOutput{ r_c };
  }

  [[nodiscard]] CircuitConfig config(int p_code,
                                     std::uint16_t p_mask,
                                     OutputKind p_kind) const
  {
    return CircuitConfig{ p_code, p_mask, mode(p_kind), v_in, r_protect };
  }
};

/// The reference board: 8-bit 10 kOhm pot, 220 Ohm protection, 100 Ohm divider
/// resistor, one quad switch of 250 Ohm and three quad switches of 50 Ohm.
inline CircuitSetup default_setup()
{
  using namespace literals;
  CircuitSetup setup;
  setup.pot.n_bits = 8;
  setup.pot.r_max = 10_kohm;
  setup.pot.r_wiper = 62_ohm;
  setup.pot.i_rated = 20_mA;
  setup.pot.inclusive_top_code = true;
  setup.r_protect = 220_ohm;
  setup.r_c = 100_ohm;
  setup.v_in = 5_V;
  for (int slot = 0; slot < 4; ++slot) {
    setup.bank.slots.push_back({ 250_ohm, 1_ohm, SlotGroup::fine });
  }
  for (int slot = 4; slot < 16; ++slot) {
    setup.bank.slots.push_back({ 50_ohm, 1_ohm, SlotGroup::coarse });
  }
  return setup;
}

inline void validate(const PotentiometerSpec& p_pot)
{
  if (p_pot.n_bits < 1 || p_pot.n_bits > 24) {
    throw ValidationError("pot.n_bits must be in [1, 24], got " +
                          std::to_string(p_pot.n_bits));
  }
  if (p_pot.r_max.count() <= 0) {
    throw ValidationError("pot.r_max_ohm must be positive");
  }
  if (p_pot.r_wiper.count() < 0) {
    throw ValidationError("pot.r_wiper_ohm must be non-negative");
  }
}

inline void validate(const ResistorBank& p_bank)
{
  if (p_bank.slots.size() > max_bank_slots) {
    throw ValidationError("bank holds " + std::to_string(p_bank.slots.size()) +
                          " slots; at most 16 switch bits exist");
  }
  for (std::size_t i = 0; i < p_bank.slots.size(); ++i) {
    const auto& slot = p_bank.slots[i];
    if (slot.r_nominal.count() <= 0) {
      throw ValidationError("bank[" + std::to_string(i) +
                            "].r_ohm must be positive");
    }
    if (slot.r_switch_on.count() < 0) {
      throw ValidationError("bank[" + std::to_string(i) +
                            "].r_switch_ohm must be non-negative");
    }
  }
}

inline void validate(const CircuitSetup& p_setup)
{
  validate(p_setup.pot);
  validate(p_setup.bank);
  if (p_setup.r_protect.count() < 0) {
    throw ValidationError("r_protect_ohm must be non-negative");
  }
  if (p_setup.r_c.count() <= 0) {
    throw ValidationError("r_c_ohm must be positive");
  }
  if (p_setup.v_in.count() <= 0) {
    throw ValidationError("v_in_v must be positive");
  }
}

inline void check_code(const PotentiometerSpec& p_pot, int p_code)
{
  if (p_code < 0 || p_code > p_pot.top_code()) {
    throw DomainError("pot code " + std::to_string(p_code) +
                      " outside valid interval [0, " +
                      std::to_string(p_pot.top_code()) + "]");
  }
}

/// Programmed resistance R(x) = x / 2^n * R_max + R_w.
inline Resistance pot_resistance(const PotentiometerSpec& p_pot, int p_code)
{
  check_code(p_pot, p_code);
  const int128 scaled = static_cast<int128>(p_code) * p_pot.r_max.count();
  const auto tap = static_cast<std::int64_t>(
    div_round(scaled, static_cast<int128>(1) << p_pot.n_bits));
  return Resistance(tap) + p_pot.r_wiper;
}

/// Total resistance of the pot branch, protection resistor included.
inline Resistance branch_resistance(const PotentiometerSpec& p_pot,
                                    Resistance p_protect,
                                    int p_code)
{
  return pot_resistance(p_pot, p_code) + p_protect;
}

/// I = V_in / (R(x) + R_b).
inline Current branch_current(const PotentiometerSpec& p_pot,
                              Resistance p_protect,
                              int p_code,
                              Voltage p_v_in)
{
  const Resistance total = branch_resistance(p_pot, p_protect, p_code);
  if (total.count() <= 0) {
    throw DomainError("pot branch resistance must be positive");
  }
  return ohms_law_current(p_v_in, total);
}

/// Largest current the pot branch can carry (code 0).
inline Current i_potmax(const PotentiometerSpec& p_pot,
                        Resistance p_protect,
                        Voltage p_v_in)
{
  return branch_current(p_pot, p_protect, 0, p_v_in);
}

inline Current slot_current(const BankSlot& p_slot, Voltage p_v_in)
{
  return ohms_law_current(p_v_in, p_slot.total());
}

/**
 * @brief Code-to-code current step at `p_code`:
 * (R(x) - R(x-1)) / (R(x) * R(x-1)) * V_in, with R the pot branch total.
 */
inline Current resolution_at(const PotentiometerSpec& p_pot,
                             Resistance p_protect,
                             int p_code,
                             Voltage p_v_in)
{
  if (p_code < 1 || p_code > p_pot.top_code()) {
    throw DomainError("resolution needs a predecessor code: " +
                      std::to_string(p_code) + " outside [1, " +
                      std::to_string(p_pot.top_code()) + "]");
  }
  const Resistance upper = branch_resistance(p_pot, p_protect, p_code);
  const Resistance lower = branch_resistance(p_pot, p_protect, p_code - 1);
  const int128 num = static_cast<int128>(p_v_in.count()) *
                     (upper - lower).count() * 1'000'000'000'000;
  const int128 den = static_cast<int128>(upper.count()) * lower.count();
  return Current(static_cast<std::int64_t>(div_round(num, den)));
}

inline void validate(const CircuitConfig& p_config,
                     const PotentiometerSpec& p_pot,
                     const ResistorBank& p_bank)
{
  check_code(p_pot, p_config.pot_code);
  if ((p_config.switch_mask & ~p_bank.full_mask()) != 0) {
    throw DomainError("switch mask drives slots that are not populated");
  }
  if (p_config.v_in.count() < 0) {
    throw DomainError("supply voltage must be non-negative");
  }
  if (p_config.r_protect.count() < 0) {
    throw DomainError("protection resistance must be non-negative");
  }
  if (const auto* divider = std::get_if<VoltageOutput>(&p_config.mode);
      divider != nullptr && divider->r_c.count() <= 0) {
    throw DomainError("voltage mode needs a positive r_c");
  }
}

/**
 * @brief Evaluate one configuration.
 *
 * Current mode sums the branch current and every enabled slot current, each
 * rounded on its own, so adding a slot adds exactly that slot's current.
 * Voltage mode puts r_c in series with the parallel network; the reported
 * voltage is I * r_c.
 */
inline ElectricalOutput evaluate(const CircuitConfig& p_config,
                                 const PotentiometerSpec& p_pot,
                                 const ResistorBank& p_bank)
{
  validate(p_config, p_pot, p_bank);

  const Resistance branch =
    branch_resistance(p_pot, p_config.r_protect, p_config.pot_code);
  const Current pot_current = ohms_law_current(p_config.v_in, branch);

  long double conductance = 1.0L / static_cast<long double>(branch.count());
  for (std::size_t bit = 0; bit < p_bank.slots.size(); ++bit) {
    if ((p_config.switch_mask >> bit) & 1U) {
      conductance +=
        1.0L / static_cast<long double>(p_bank.slots[bit].total().count());
    }
  }
  const long double r_eq = 1.0L / conductance;

  ElectricalOutput out;
  out.r_equivalent = Resistance(std::llround(r_eq));
  out.over_rated = pot_current > p_pot.i_rated && p_pot.i_rated.count() > 0;

  if (std::holds_alternative<CurrentOutput>(p_config.mode)) {
    Current total = pot_current;
    for (std::size_t bit = 0; bit < p_bank.slots.size(); ++bit) {
      if ((p_config.switch_mask >> bit) & 1U) {
        total += slot_current(p_bank.slots[bit], p_config.v_in);
      }
    }
    out.current = total;
    out.voltage = p_config.v_in;
    return out;
  }

  const Resistance r_c = std::get<VoltageOutput>(p_config.mode).r_c;
  const long double amps_pico =
    static_cast<long double>(p_config.v_in.count()) /
    (static_cast<long double>(r_c.count()) + r_eq) * 1.0e12L;
  out.current = Current(std::llround(amps_pico));
  out.voltage = ohms_law_voltage(out.current, r_c);
  // Rounding may land one count above the supply when r_eq is tiny.
  out.voltage = std::min(out.voltage, p_config.v_in);
  return out;
}

inline ElectricalOutput evaluate(const CircuitSetup& p_setup,
                                 int p_code,
                                 std::uint16_t p_mask,
                                 OutputKind p_kind)
{
  return evaluate(p_setup.config(p_code, p_mask, p_kind),
                  p_setup.pot,
                  p_setup.bank);
}

/// Sorted, deduplicated outputs over a set of masks and every pot code.
struct OutputRange
{
  std::vector<ElectricalOutput> outputs;
  ElectricalOutput min{};
  ElectricalOutput max{};
  Current finest_current_step{};
  Current largest_current_gap{};
  Voltage finest_voltage_step{};
  Voltage largest_voltage_gap{};
};

inline OutputRange enumerate_outputs(const CircuitSetup& p_setup,
                                     OutputKind p_kind,
                                     std::span<const std::uint16_t> p_masks)
{
  OutputRange range;
  const int top = p_setup.pot.top_code();
  range.outputs.reserve(p_masks.size() * static_cast<std::size_t>(top + 1));
  for (const auto mask : p_masks) {
    for (int code = 0; code <= top; ++code) {
      range.outputs.push_back(evaluate(p_setup, code, mask, p_kind));
    }
  }
  const auto key = [p_kind](const ElectricalOutput& p_out) {
    return p_kind == OutputKind::current ? p_out.current.count()
                                         : p_out.voltage.count();
  };
  std::sort(range.outputs.begin(),
            range.outputs.end(),
            [&](const auto& p_a, const auto& p_b) {
              if (key(p_a) != key(p_b)) {
                return key(p_a) < key(p_b);
              }
              return p_a.current < p_b.current;
            });
  range.outputs.erase(std::unique(range.outputs.begin(),
                                  range.outputs.end(),
                                  [&](const auto& p_a, const auto& p_b) {
                                    return key(p_a) == key(p_b);
                                  }),
                      range.outputs.end());
  if (range.outputs.empty()) {
    return range;
  }
  range.min = range.outputs.front();
  range.max = range.outputs.back();
  if (range.outputs.size() < 2) {
    return range;
  }
  range.finest_current_step = Current(INT64_MAX);
  range.finest_voltage_step = Voltage(INT64_MAX);
  for (std::size_t i = 1; i < range.outputs.size(); ++i) {
    const Current di = range.outputs[i].current - range.outputs[i - 1].current;
    const Voltage dv = range.outputs[i].voltage - range.outputs[i - 1].voltage;
    range.finest_current_step = std::min(range.finest_current_step, di);
    range.largest_current_gap = std::max(range.largest_current_gap, di);
    range.finest_voltage_step = std::min(range.finest_voltage_step, dv);
    range.largest_voltage_gap = std::max(range.largest_voltage_gap, dv);
  }
  return range;
}

}  // namespace procal
