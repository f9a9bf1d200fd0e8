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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "procal/circuit.hpp"

namespace procal {

/// Parallel stage currents I_1..I_n and their integer multiples of I_1.
struct StagePlan
{
  std::vector<Current> stage_currents;
  std::vector<std::int64_t> multipliers;
};

/**
 * @brief Stage currents growing by the Fibonacci recurrence.
 *
 * I_1 = base, I_2 = k2 * base, I_j = I_(j-1) + I_(j-2). Every stage is an
 * integer multiple of the base by construction.
 */
inline StagePlan fibonacci_stages(Current p_base, int p_stages, int p_k2)
{
  if (p_stages < 2) {
    throw DomainError("need at least 2 stages, got " + std::to_string(p_stages));
  }
  if (p_k2 < 1) {
    throw DomainError("second-stage multiplier must be >= 1");
  }
  if (p_base.count() <= 0) {
    throw DomainError("base stage current must be positive");
  }
  StagePlan plan;
  plan.multipliers = { 1, p_k2 };
  for (int j = 2; j < p_stages; ++j) {
    const auto next = plan.multipliers[static_cast<std::size_t>(j - 1)] +
                      plan.multipliers[static_cast<std::size_t>(j - 2)];
    if (next > INT64_MAX / p_base.count()) {
      throw DomainError("stage current overflows at stage " +
                        std::to_string(j + 1));
    }
    plan.multipliers.push_back(next);
  }
  for (const auto multiple : plan.multipliers) {
    plan.stage_currents.push_back(p_base * multiple);
  }
  return plan;
}

/// F(n) by fast doubling, F(1) = F(2) = 1.
inline std::uint64_t fibonacci(unsigned p_n)
{
  // (F(k), F(k+1)) -> (F(2k), F(2k+1))
  std::uint64_t a = 0;
  std::uint64_t b = 1;
  for (int bit = 31; bit >= 0; --bit) {
    const std::uint64_t c = a * (2 * b - a);
    const std::uint64_t d = a * a + b * b;
    a = c;
    b = d;
    if ((p_n >> bit) & 1U) {
      const std::uint64_t next = a + b;
      a = b;
      b = next;
    }
  }
  return a;
}

/**
 * @brief Both sides of sum_{j=1..n} F_j = F_(n+2) - 1.
 *
 * The left side is a running sum; the right side comes from fast doubling, so
 * the two share no arithmetic.
 */
inline std::pair<std::uint64_t, std::uint64_t> fib_sum_check(int p_n)
{
  if (p_n < 2) {
    throw DomainError("identity is stated for n >= 2");
  }
  if (p_n > 90) {
    throw DomainError("F(n+2) overflows 64 bits beyond n = 90");
  }
  std::uint64_t sum = 0;
  std::uint64_t prev = 0;
  std::uint64_t cur = 1;
  for (int j = 1; j <= p_n; ++j) {
    sum += cur;
    const std::uint64_t next = prev + cur;
    prev = cur;
    cur = next;
  }
  return { sum, fibonacci(static_cast<unsigned>(p_n) + 2) - 1 };
}

struct BankDesignOptions
{
  PotentiometerSpec pot = default_setup().pot;
  Resistance r_protect = default_setup().r_protect;
  Resistance r_switch_on = default_setup().bank.slots.front().r_switch_on;
  /// Slots of one value come in multiples of this (4 for quad switches).
  int switch_group_size = 1;
};

namespace detail {

/// Largest distance between neighbouring output currents when every
/// combination of slot counts is combined with every pot code.
inline std::int64_t largest_gap(std::span<const std::int64_t> p_branch,
                                std::span<const std::int64_t> p_slot_current,
                                std::span<const int> p_counts)
{
  std::vector<std::int64_t> offsets{ 0 };
  for (std::size_t v = 0; v < p_counts.size(); ++v) {
    std::vector<std::int64_t> grown;
    grown.reserve(offsets.size() * static_cast<std::size_t>(p_counts[v] + 1));
    for (const auto base : offsets) {
      for (int c = 0; c <= p_counts[v]; ++c) {
        grown.push_back(base + c * p_slot_current[v]);
      }
    }
    offsets = std::move(grown);
  }
  std::vector<std::int64_t> levels;
  levels.reserve(offsets.size() * p_branch.size());
  for (const auto offset : offsets) {
    for (const auto branch : p_branch) {
      levels.push_back(offset + branch);
    }
  }
  std::sort(levels.begin(), levels.end());
  std::int64_t gap = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    gap = std::max(gap, levels[i] - levels[i - 1]);
  }
  return gap;
}

}  // namespace detail

/**
 * @brief Choose a switched-resistor bank reaching `p_target`.
 *
 * Every multiset of slot values with at most 16 slots is a candidate. Among
 * candidates whose maximum current reaches the target, the one with the
 * smallest largest gap between adjacent output levels wins; ties go to fewer
 * slots, then to the lexicographically smaller list of resistances. Slots are
 * emitted in descending resistance so the fine group occupies the low bits.
 */
inline ResistorBank design_bank(Current p_target,
                                Voltage p_v_in,
                                std::span<const Resistance> p_slot_values,
                                const BankDesignOptions& p_options = {})
{
  validate(p_options.pot);
  if (p_options.switch_group_size < 1 ||
      p_options.switch_group_size > max_bank_slots) {
    throw ValidationError("switch group size must be in [1, 16]");
  }
  std::vector<Resistance> values(p_slot_values.begin(), p_slot_values.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  for (const auto value : values) {
    if (value.count() <= 0) {
      throw ValidationError("slot resistances must be positive");
    }
  }

  const Current pot_max = i_potmax(p_options.pot, p_options.r_protect, p_v_in);
  if (p_target <= pot_max) {
    return {};
  }
  if (values.empty()) {
    throw DomainError(fmt::format(
      "target {} uA unreachable: no slot values given; max achievable {} uA",
      format_fixed(p_target.count(), 6),
      format_fixed(pot_max.count(), 6)));
  }

  std::vector<std::int64_t> branch;
  for (int code = 0; code <= p_options.pot.top_code(); ++code) {
    branch.push_back(
      branch_current(p_options.pot, p_options.r_protect, code, p_v_in).count());
  }
  std::vector<std::int64_t> per_slot;
  for (const auto value : values) {
    per_slot.push_back(
      ohms_law_current(p_v_in, value + p_options.r_switch_on).count());
  }

  struct Candidate
  {
    std::vector<int> counts;
    std::int64_t gap = 0;
    int slots = 0;
    std::vector<Resistance> resistances;
  };
  std::optional<Candidate> best;
  const int step = p_options.switch_group_size;
  std::vector<int> counts(values.size(), 0);

  const auto consider = [&]() {
    int slots = 0;
    std::int64_t max_current = pot_max.count();
    for (std::size_t v = 0; v < values.size(); ++v) {
      slots += counts[v];
      max_current += counts[v] * per_slot[v];
    }
    if (max_current < p_target.count()) {
      return;
    }
    Candidate cand;
    cand.counts = counts;
    cand.slots = slots;
    cand.gap = detail::largest_gap(branch, per_slot, counts);
    for (std::size_t v = 0; v < values.size(); ++v) {
      cand.resistances.insert(cand.resistances.end(),
                              static_cast<std::size_t>(counts[v]),
                              values[v]);
    }
    const auto better = [&](const Candidate& p_a, const Candidate& p_b) {
      if (p_a.gap != p_b.gap) {
        return p_a.gap < p_b.gap;
      }
      if (p_a.slots != p_b.slots) {
        return p_a.slots < p_b.slots;
      }
      return p_a.resistances < p_b.resistances;
    };
    if (!best || better(cand, *best)) {
      best = std::move(cand);
    }
  };

  std::function<void(std::size_t, int)> walk = [&](std::size_t p_index,
                                                    int p_remaining) {
    if (p_index == values.size()) {
      consider();
      return;
    }
    for (int c = 0; c <= p_remaining; c += step) {
      counts[p_index] = c;
      walk(p_index + 1, p_remaining - c);
    }
    counts[p_index] = 0;
  };
  walk(0, max_bank_slots);

  if (!best) {
    const auto usable = (max_bank_slots / step) * step;
    const Current achievable =
      pot_max + Current(per_slot.front() * static_cast<std::int64_t>(usable));
    throw DomainError(
      fmt::format("target {} uA unreachable with 16 slots; max achievable {} uA",
                  format_fixed(p_target.count(), 6),
                  format_fixed(achievable.count(), 6)));
  }

  ResistorBank bank;
  const bool two_level = std::count_if(best->counts.begin(),
                                       best->counts.end(),
                                       [](int c) { return c > 0; }) <= 2;
  const Resistance smallest_used = [&] {
    for (std::size_t v = 0; v < values.size(); ++v) {
      if (best->counts[v] > 0) {
        return values[v];
      }
    }
    return Resistance{};
  }();
  const bool single_value = std::count_if(best->counts.begin(),
                                          best->counts.end(),
                                          [](int c) { return c > 0; }) == 1;
  for (std::size_t v = values.size(); v-- > 0;) {
    for (int c = 0; c < best->counts[v]; ++c) {
      BankSlot slot{ values[v], p_options.r_switch_on, SlotGroup::automatic };
      if (two_level) {
        slot.group = (values[v] == smallest_used && !single_value)
                       ? SlotGroup::coarse
                       : SlotGroup::fine;
      }
      bank.slots.push_back(slot);
    }
  }
  return bank;
}

}  // namespace procal
