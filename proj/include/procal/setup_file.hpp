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

#include <regex>
#include <string>

#include "procal/circuit.hpp"
#include "procal/text_config.hpp"

namespace procal {

namespace detail {
inline const char* to_string(SlotGroup p_group)
{
  switch (p_group) {
    case SlotGroup::fine:
      return "fine";
    case SlotGroup::coarse:
      return "coarse";
    case SlotGroup::automatic:
      break;
  }
  return "auto";
}

inline SlotGroup parse_group(const std::string& p_key, const std::string& p_text)
{
  if (p_text == "fine") {
    return SlotGroup::fine;
  }
  if (p_text == "coarse") {
    return SlotGroup::coarse;
  }
  if (p_text == "auto") {
    return SlotGroup::automatic;
  }
  throw ValidationError("key '" + p_key + "': group must be fine, coarse or auto");
}
}  // namespace detail

/**
 * @brief Read component values from a configuration document.
 *
 * Keys absent from the document keep the reference-board value. If any
 * `bank[i].*` key (or `bank.slots`) is present the bank is rebuilt from the
 * document alone; every slot below the bank size needs its `r_ohm`.
 */
inline CircuitSetup setup_from_text(const TextConfig& p_doc)
{
  CircuitSetup setup = default_setup();
  constexpr int ohm_digits = 9;  // nano-ohm counts
  constexpr int milliamp_digits = 9;  // picoamp counts
  constexpr int volt_digits = 9;  // nanovolt counts

  static const std::regex bank_key(R"(bank\[(\d{1,3})\]\.(r_ohm|r_switch_ohm|group))");
  int bank_size = 0;
  bool has_bank = false;
  for (const auto& [key, value] : p_doc.entries()) {
    std::smatch match;
    if (std::regex_match(key, match, bank_key)) {
      has_bank = true;
      bank_size = std::max(bank_size, std::stoi(match[1]) + 1);
      continue;
    }
    if (key != "pot.n_bits" && key != "pot.r_max_ohm" &&
        key != "pot.r_wiper_ohm" && key != "pot.i_rated_ma" &&
        key != "pot.inclusive_top_code" && key != "r_protect_ohm" &&
        key != "r_c_ohm" && key != "v_in_v" && key != "bank.slots") {
      throw ValidationError("unknown configuration key '" + key + "'");
    }
  }

  if (p_doc.contains("pot.n_bits")) {
    setup.pot.n_bits = static_cast<int>(p_doc.integer("pot.n_bits"));
  }
  if (p_doc.contains("pot.r_max_ohm")) {
    setup.pot.r_max = Resistance(p_doc.fixed("pot.r_max_ohm", ohm_digits));
  }
  if (p_doc.contains("pot.r_wiper_ohm")) {
    setup.pot.r_wiper = Resistance(p_doc.fixed("pot.r_wiper_ohm", ohm_digits));
  }
  if (p_doc.contains("pot.i_rated_ma")) {
    setup.pot.i_rated = Current(p_doc.fixed("pot.i_rated_ma", milliamp_digits));
  }
  if (p_doc.contains("pot.inclusive_top_code")) {
    setup.pot.inclusive_top_code = p_doc.boolean("pot.inclusive_top_code");
  }
  if (p_doc.contains("r_protect_ohm")) {
    setup.r_protect = Resistance(p_doc.fixed("r_protect_ohm", ohm_digits));
  }
  if (p_doc.contains("r_c_ohm")) {
    setup.r_c = Resistance(p_doc.fixed("r_c_ohm", ohm_digits));
  }
  if (p_doc.contains("v_in_v")) {
    setup.v_in = Voltage(p_doc.fixed("v_in_v", volt_digits));
  }

  if (p_doc.contains("bank.slots")) {
    const auto declared = p_doc.integer("bank.slots");
    if (declared < 0 || declared > max_bank_slots) {
      throw ValidationError("key 'bank.slots': must be in [0, 16]");
    }
    if (bank_size > declared) {
      throw ValidationError("bank[" + std::to_string(bank_size - 1) +
                            "] exceeds bank.slots = " + std::to_string(declared));
    }
    bank_size = static_cast<int>(declared);
    has_bank = true;
  }

  if (has_bank) {
    if (bank_size > max_bank_slots) {
      throw ValidationError("bank[" + std::to_string(bank_size - 1) +
                            "]: at most 16 slots exist");
    }
    setup.bank.slots.assign(static_cast<std::size_t>(bank_size), BankSlot{});
    for (int i = 0; i < bank_size; ++i) {
      const std::string prefix = "bank[" + std::to_string(i) + "].";
      auto& slot = setup.bank.slots[static_cast<std::size_t>(i)];
      slot.r_nominal = Resistance(p_doc.fixed(prefix + "r_ohm", ohm_digits));
      if (p_doc.contains(prefix + "r_switch_ohm")) {
        slot.r_switch_on =
          Resistance(p_doc.fixed(prefix + "r_switch_ohm", ohm_digits));
      }
      if (auto group = p_doc.find(prefix + "group")) {
        slot.group = detail::parse_group(prefix + "group", *group);
      }
    }
  }

  validate(setup);
  return setup;
}

inline CircuitSetup load_setup(const std::string& p_path)
{
  return setup_from_text(TextConfig::load(p_path));
}

inline TextConfig setup_to_text(const CircuitSetup& p_setup)
{
  TextConfig doc;
  doc.set("pot.n_bits", std::to_string(p_setup.pot.n_bits));
  doc.set("pot.r_max_ohm", format_fixed(p_setup.pot.r_max.count(), 9));
  doc.set("pot.r_wiper_ohm", format_fixed(p_setup.pot.r_wiper.count(), 9));
  doc.set("pot.i_rated_ma", format_fixed(p_setup.pot.i_rated.count(), 9));
  doc.set("pot.inclusive_top_code", p_setup.pot.inclusive_top_code ? "1" : "0");
  doc.set("r_protect_ohm", format_fixed(p_setup.r_protect.count(), 9));
  doc.set("r_c_ohm", format_fixed(p_setup.r_c.count(), 9));
  doc.set("v_in_v", format_fixed(p_setup.v_in.count(), 9));
  doc.set("bank.slots", std::to_string(p_setup.bank.slots.size()));
  for (std::size_t i = 0; i < p_setup.bank.slots.size(); ++i) {
    const auto& slot = p_setup.bank.slots[i];
    const std::string prefix = "bank[" + std::to_string(i) + "].";
    doc.set(prefix + "r_ohm", format_fixed(slot.r_nominal.count(), 9));
    doc.set(prefix + "r_switch_ohm", format_fixed(slot.r_switch_on.count(), 9));
    doc.set(prefix + "group", detail::to_string(slot.group));
  }
  return doc;
}

}  // namespace procal
