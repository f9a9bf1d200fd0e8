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
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "procal/error.hpp"

namespace procal {

using Nanos = std::chrono::nanoseconds;
using int128 = __int128;

/**
 * @brief Fixed-point electrical quantity backed by a signed 64-bit count.
 *
 * The tag fixes the resolution of one count. All circuit arithmetic is done on
 * counts so that identities such as R(x) - R(x-1) = const hold exactly.
 */
template<class Tag>
class Quantity
{
public:
  using rep = std::int64_t;
  static constexpr rep counts_per_unit = Tag::counts_per_unit;

  constexpr Quantity() = default;
  constexpr explicit Quantity(rep p_count)
    : m_count(p_count)
  {
  }

  [[nodiscard]] constexpr rep count() const { return m_count; }

  /// Value in the display unit (ohm, uA, uV), for reporting only.
  [[nodiscard]] constexpr double in_units() const
  {
    return static_cast<double>(m_count) / static_cast<double>(counts_per_unit);
  }

  constexpr auto operator<=>(const Quantity&) const = default;

  constexpr Quantity operator+(Quantity p_other) const
  {
    return Quantity(m_count + p_other.m_count);
  }
  constexpr Quantity operator-(Quantity p_other) const
  {
    return Quantity(m_count - p_other.m_count);
  }
  constexpr Quantity operator*(rep p_factor) const
  {
    return Quantity(m_count * p_factor);
  }
  constexpr Quantity& operator+=(Quantity p_other)
  {
    m_count += p_other.m_count;
    return *this;
  }
  constexpr Quantity& operator-=(Quantity p_other)
  {
    m_count -= p_other.m_count;
    return *this;
  }

private:
  rep m_count = 0;
};

// One count of each tag. Display units are ohm, microamp and microvolt.
struct resistance_tag
{
  static constexpr std::int64_t counts_per_unit = 1'000'000'000;  // nano-ohm
};
struct current_tag
{
  static constexpr std::int64_t counts_per_unit = 1'000'000;  // picoamp per uA
};
struct voltage_tag
{
  static constexpr std::int64_t counts_per_unit = 1'000;  // nanovolt per uV
};

/// Resistance, counted in nano-ohms.
using Resistance = Quantity<resistance_tag>;
/// Current, counted in picoamps.
using Current = Quantity<current_tag>;
/// Voltage, counted in nanovolts.
using Voltage = Quantity<voltage_tag>;

namespace literals {
constexpr Resistance operator""_mohm(unsigned long long p_value)
{
  return Resistance(static_cast<std::int64_t>(p_value) * 1'000'000);
}
constexpr Resistance operator""_ohm(unsigned long long p_value)
{
  return Resistance(static_cast<std::int64_t>(p_value) * 1'000'000'000);
}
constexpr Resistance operator""_kohm(unsigned long long p_value)
{
  return Resistance(static_cast<std::int64_t>(p_value) * 1'000'000'000'000);
}
constexpr Current operator""_pA(unsigned long long p_value)
{
  return Current(static_cast<std::int64_t>(p_value));
}
constexpr Current operator""_nA(unsigned long long p_value)
{
  return Current(static_cast<std::int64_t>(p_value) * 1'000);
}
constexpr Current operator""_uA(unsigned long long p_value)
{
  return Current(static_cast<std::int64_t>(p_value) * 1'000'000);
}
constexpr Current operator""_mA(unsigned long long p_value)
{
  return Current(static_cast<std::int64_t>(p_value) * 1'000'000'000);
}
constexpr Voltage operator""_uV(unsigned long long p_value)
{
  return Voltage(static_cast<std::int64_t>(p_value) * 1'000);
}
constexpr Voltage operator""_mV(unsigned long long p_value)
{
  return Voltage(static_cast<std::int64_t>(p_value) * 1'000'000);
}
constexpr Voltage operator""_V(unsigned long long p_value)
{
  return Voltage(static_cast<std::int64_t>(p_value) * 1'000'000'000);
}
}  // namespace literals

/// Integer division rounded half away from zero.
constexpr int128 div_round(int128 p_num, int128 p_den)
{
  if (p_den < 0) {
    p_num = -p_num;
    p_den = -p_den;
  }
  if (p_num >= 0) {
    return (p_num + p_den / 2) / p_den;
  }
  return -((-p_num + p_den / 2) / p_den);
}

/// I = V / R, rounded to the nearest picoamp.
constexpr Current ohms_law_current(Voltage p_voltage, Resistance p_resistance)
{
  // V[nV] / R[nOhm] is amperes; scale by 1e12 for picoamps.
  return Current(static_cast<std::int64_t>(div_round(
    static_cast<int128>(p_voltage.count()) * 1'000'000'000'000,
    p_resistance.count())));
}

/// V = I * R, rounded to the nearest nanovolt.
constexpr Voltage ohms_law_voltage(Current p_current, Resistance p_resistance)
{
  return Voltage(static_cast<std::int64_t>(
    div_round(static_cast<int128>(p_current.count()) * p_resistance.count(),
              1'000'000'000'000)));
}

/**
 * @brief Render a fixed-point count as a decimal string.
 *
 * format_fixed(10242937500, 6) == "10242.937500". Exact, no floating point.
 */
inline std::string format_fixed(std::int64_t p_count, int p_decimals)
{
  std::int64_t scale = 1;
  for (int i = 0; i < p_decimals; ++i) {
    scale *= 10;
  }
  const bool negative = p_count < 0;
  const auto magnitude =
    negative ? -static_cast<int128>(p_count) : static_cast<int128>(p_count);
  const auto whole = static_cast<std::int64_t>(magnitude / scale);
  const auto frac = static_cast<std::int64_t>(magnitude % scale);
  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (p_decimals > 0) {
    std::string digits = std::to_string(frac);
    out += '.';
    out.append(static_cast<std::size_t>(p_decimals) - digits.size(), '0');
    out += digits;
  }
  return out;
}

/**
 * @brief Parse a decimal string into a fixed-point count with the given number
 * of fractional digits. Throws ValidationError on malformed input or when the
 * value carries more precision than the count can hold.
 */
inline std::int64_t parse_fixed(std::string_view p_text, int p_decimals)
{
  const auto fail = [&](const char* p_why) {
    return ValidationError(std::string("cannot parse '") + std::string(p_text) +
                           "' as a decimal: " + p_why);
  };
  std::size_t pos = 0;
  while (pos < p_text.size() && (p_text[pos] == ' ' || p_text[pos] == '\t')) {
    ++pos;
  }
  std::size_t end = p_text.size();
  while (end > pos && (p_text[end - 1] == ' ' || p_text[end - 1] == '\t' ||
                       p_text[end - 1] == '\r')) {
    --end;
  }
  bool negative = false;
  if (pos < end && (p_text[pos] == '-' || p_text[pos] == '+')) {
    negative = p_text[pos] == '-';
    ++pos;
  }
  if (pos == end) {
    throw fail("empty");
  }
  int128 value = 0;
  int frac_digits = -1;
  bool any_digit = false;
  for (; pos < end; ++pos) {
    const char c = p_text[pos];
    if (c == '.') {
      if (frac_digits >= 0) {
        throw fail("two decimal points");
      }
      frac_digits = 0;
      continue;
    }
    if (c < '0' || c > '9') {
      throw fail("unexpected character");
    }
    any_digit = true;
    if (frac_digits >= 0) {
      if (frac_digits == p_decimals) {
        if (c != '0') {
          throw fail("too many fractional digits");
        }
        continue;
      }
      ++frac_digits;
    }
    value = value * 10 + (c - '0');
    if (value > static_cast<int128>(INT64_MAX) * 10) {
      throw fail("out of range");
    }
  }
  if (!any_digit) {
    throw fail("no digits");
  }
  for (int i = frac_digits < 0 ? 0 : frac_digits; i < p_decimals; ++i) {
    value *= 10;
  }
  if (value > INT64_MAX) {
    throw fail("out of range");
  }
  return static_cast<std::int64_t>(negative ? -value : value);
}

/// Microseconds with nanosecond resolution, e.g. "2500.320".
inline std::string format_us(Nanos p_time)
{
  return format_fixed(p_time.count(), 3);
}

inline Nanos parse_us(std::string_view p_text)
{
  return Nanos(parse_fixed(p_text, 3));
}

}  // namespace procal
