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

#include <gtest/gtest.h>

#include "procal/range_planner.hpp"
#include "procal/sweep.hpp"

namespace procal {
namespace {

using namespace literals;

std::vector<std::int64_t> counts_of(const StagePlan& p_plan)
{
  std::vector<std::int64_t> out;
  for (const auto c : p_plan.stage_currents) {
    out.push_back(c.count());
  }
  return out;
}

TEST(FibonacciStages, PrototypeThreeStages)
{
  const auto plan = fibonacci_stages(20_mA, 3, 4);
  EXPECT_EQ(counts_of(plan),
            (std::vector<std::int64_t>{ (20_mA).count(), (80_mA).count(), (100_mA).count() }));
  EXPECT_EQ(plan.multipliers, (std::vector<std::int64_t>{ 1, 4, 5 }));
}

TEST(FibonacciStages, CanonicalSequence)
{
  const auto plan = fibonacci_stages(Current(1), 7, 1);
  EXPECT_EQ(counts_of(plan), (std::vector<std::int64_t>{ 1, 1, 2, 3, 5, 8, 13 }));
}

TEST(FibonacciStages, RejectsFewerThanTwoStages)
{
  EXPECT_THROW((void)fibonacci_stages(1_mA, 1, 1), DomainError);
  EXPECT_THROW((void)fibonacci_stages(1_mA, 3, 0), DomainError);
}

TEST(FibonacciStages, RecurrenceAndIntegralityHoldForRandomInputs)
{
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> base_dist(1, 50'000'000'000);
  std::uniform_int_distribution<int> k2_dist(1, 9);
  std::uniform_int_distribution<int> n_dist(2, 25);
  for (int trial = 0; trial < 300; ++trial) {
    const Current base(base_dist(rng));
    const int k2 = k2_dist(rng);
    const int n = n_dist(rng);
    const auto plan = fibonacci_stages(base, n, k2);
    ASSERT_EQ(plan.stage_currents.size(), static_cast<std::size_t>(n));
    ASSERT_EQ(plan.stage_currents[0], base);
    ASSERT_EQ(plan.stage_currents[1], base * k2);
    for (int j = 2; j < n; ++j) {
      const auto u = static_cast<std::size_t>(j);
      ASSERT_EQ(plan.stage_currents[u], plan.stage_currents[u - 1] + plan.stage_currents[u - 2]);
    }
    for (std::size_t j = 0; j < plan.stage_currents.size(); ++j) {
      ASSERT_EQ(plan.stage_currents[j].count() % base.count(), 0);
      ASSERT_EQ(plan.stage_currents[j].count() / base.count(), plan.multipliers[j]);
    }
  }
}

TEST(FibSumCheck, SmallCases)
{
  EXPECT_EQ(fib_sum_check(5), (std::pair<std::uint64_t, std::uint64_t>{ 12, 12 }));
  EXPECT_EQ(fib_sum_check(2), (std::pair<std::uint64_t, std::uint64_t>{ 2, 2 }));
}

TEST(FibSumCheck, AgreesWithTableUpToNinety)
{
  std::vector<std::uint64_t> f{ 0, 1, 1 };
  while (f.size() < 93) {
    f.push_back(f[f.size() - 1] + f[f.size() - 2]);
  }
  std::uint64_t running = 0;
  for (int n = 1; n <= 90; ++n) {
    running += f[static_cast<std::size_t>(n)];
    if (n < 2) {
      continue;
    }
    const auto [lhs, rhs] = fib_sum_check(n);
    ASSERT_EQ(lhs, running) << "n=" << n;
    ASSERT_EQ(rhs, f[static_cast<std::size_t>(n) + 2] - 1) << "n=" << n;
    ASSERT_EQ(lhs, rhs) << "n=" << n;
  }
  EXPECT_THROW((void)fib_sum_check(1), DomainError);
  EXPECT_THROW((void)fib_sum_check(91), DomainError);
}

TEST(Fibonacci, KnownValues)
{
  EXPECT_EQ(fibonacci(1), 1U);
  EXPECT_EQ(fibonacci(2), 1U);
  EXPECT_EQ(fibonacci(10), 55U);
  EXPECT_EQ(fibonacci(92), 7540113804746346429ULL);
}

std::vector<Resistance> slot_values(std::initializer_list<int> p_ohms)
{
  std::vector<Resistance> out;
  for (const int ohm : p_ohms) {
    out.push_back(Resistance(static_cast<std::int64_t>(ohm) * 1'000'000'000));
  }
  return out;
}

std::int64_t bank_max_current(const ResistorBank& p_bank)
{
  auto setup = default_setup();
  setup.bank = p_bank;
  if (p_bank.slots.empty()) {
    return i_potmax(setup.pot, setup.r_protect, setup.v_in).count();
  }
  const auto masks = ladder_masks(layout_for(setup.bank));
  return enumerate_outputs(setup, OutputKind::current, masks).max.current.count();
}

TEST(DesignBank, ReferenceBoardFromQuadSwitches)
{
  BankDesignOptions opts;
  opts.switch_group_size = 4;
  const auto values = slot_values({ 50, 250 });
  const auto bank = design_bank(1'000_mA, 5_V, values, opts);
  ASSERT_EQ(bank.slots.size(), 16U);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(bank.slots[i].r_nominal, 250_ohm);
    EXPECT_EQ(bank.slots[i].group, SlotGroup::fine);
  }
  for (std::size_t i = 4; i < 16; ++i) {
    EXPECT_EQ(bank.slots[i].r_nominal, 50_ohm);
    EXPECT_EQ(bank.slots[i].group, SlotGroup::coarse);
  }
}

TEST(DesignBank, PotAloneNeedsNoSlots)
{
  const auto values = slot_values({ 50 });
  EXPECT_TRUE(design_bank(10_mA, 5_V, values).slots.empty());
}

TEST(DesignBank, TwoHundredMilliampsFromFiftyOhmSlots)
{
  const auto values = slot_values({ 50 });
  const auto bank = design_bank(200_mA, 5_V, values);
  EXPECT_EQ(bank.slots.size(), 2U);
}

TEST(DesignBank, InfeasibleTargetReportsMaximum)
{
  const auto values = slot_values({ 1000 });
  try {
    (void)design_bank(1'000_mA, 5_V, values);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("max achievable"), std::string::npos);
  }
}

TEST(DesignBank, ResultAlwaysReachesTarget)
{
  const auto values = slot_values({ 50, 100, 250 });
  for (const auto target_ma : { 30, 75, 150, 400, 800, 1200 }) {
    const Current target = 1_mA * target_ma;
    const auto bank = design_bank(target, 5_V, values);
    EXPECT_GE(bank_max_current(bank), target.count()) << target_ma << " mA";
  }
}

TEST(DesignBank, IsDeterministic)
{
  const auto values = slot_values({ 250, 50, 100 });
  const auto a = design_bank(600_mA, 5_V, values);
  const auto b = design_bank(600_mA, 5_V, slot_values({ 100, 50, 250 }));
  ASSERT_EQ(a.slots.size(), b.slots.size());
  for (std::size_t i = 0; i < a.slots.size(); ++i) {
    EXPECT_EQ(a.slots[i].r_nominal, b.slots[i].r_nominal);
  }
}

}  // namespace
}  // namespace procal
