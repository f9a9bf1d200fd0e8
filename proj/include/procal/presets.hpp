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
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "procal/instruments.hpp"
#include "procal/text_config.hpp"

namespace procal {

/// An instrument description plus what the demo pipeline needs to know about it.
struct InstrumentPreset
{
  AdcSpec adc;
  /// Calibration method the demo uses, e.g. "poly:1" or "lut:64".
  std::string method;
  /// Uncalibrated error the preset was tuned to, in percent of full scale.
  double target_before_pct = 0.0;
  TextConfig document;
};

namespace detail {

/// Width multipliers 1 + sigma * N(0, 1), kept above 0.05 so codes never vanish.
inline std::vector<double> random_dnl(int p_bits, double p_sigma, std::uint64_t p_seed)
{
  std::mt19937_64 rng(p_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> widths(std::size_t{ 1 } << p_bits);
  for (auto& w : widths) {
    w = std::max(0.05, 1.0 + p_sigma * dist(rng));
  }
  return widths;
}

inline constexpr std::string_view ina219_current = R"(# Synthetic stand-in for a 12-bit shunt monitor; linear gain and offset error.
# Tuning: gain and offset scaled together until the uncalibrated ladder sweep
# read 0.42 % of full scale at seed 0.
preset.name = ina219-current
preset.method = poly:1
preset.target_before_pct = 0.42
adc.n_bits = 12
adc.v_fs_v = 0.32
adc.shunt_ohm = 0.1
adc.offset_uv = 400
adc.gain_ppm = 14950
adc.noise_uv = 20
adc.sample_rate_hz = 1000
)";

inline constexpr std::string_view mcp3208_current = R"(# Synthetic stand-in for a 12-bit SAR converter behind a current shunt.
# Tuning: offset and gain error scaled until the uncalibrated ladder sweep read 2.58 %
# of full scale at seed 0.
preset.name = mcp3208-current
preset.method = poly:1
preset.target_before_pct = 2.58
adc.n_bits = 12
adc.v_fs_v = 5
adc.shunt_ohm = 3.9
adc.offset_uv = 1560
adc.gain_ppm = 57200
adc.noise_uv = 300
adc.sample_rate_hz = 1000
)";

inline constexpr std::string_view mcp3208_voltage = R"(# Synthetic stand-in for a 12-bit SAR converter with a compressive transfer
# curve that stays inside full scale.
# Tuning: INL amplitude scaled until the uncalibrated ladder sweep read 5.29 %
# of full scale at seed 0.
preset.name = mcp3208-voltage
preset.method = lut:64
preset.target_before_pct = 5.29
adc.n_bits = 12
adc.v_fs_v = 5
adc.offset_uv = 0
adc.gain_ppm = 0
adc.inl_uv = 0, 0, -341000
adc.noise_uv = 100
adc.sample_rate_hz = 1000
)";

inline constexpr std::string_view atmega2560_voltage = R"(# Synthetic stand-in for a 10-bit microcontroller converter.
# Tuning: INL and offset scaled until the uncalibrated ladder sweep read 0.2 %
# of full scale at seed 0.
preset.name = atmega2560-voltage
preset.method = lut:64
preset.target_before_pct = 0.2
adc.n_bits = 10
adc.v_fs_v = 5
adc.offset_uv = 5600
adc.gain_ppm = 0
adc.inl_uv = 0, 19000, -15200
adc.noise_uv = 0
adc.sample_rate_hz = 1000
)";

inline constexpr std::string_view dmm7510_current = R"(# Reference meter, current function: 24-bit, 1 MHz, noiseless.
preset.name = dmm7510-current
adc.n_bits = 24
adc.v_fs_v = 2
adc.shunt_ohm = 1
adc.sample_rate_hz = 1000000
)";

inline constexpr std::string_view dmm7510_voltage = R"(# Reference meter, voltage function: 24-bit, 1 MHz, noiseless.
preset.name = dmm7510-voltage
adc.n_bits = 24
adc.v_fs_v = 10
adc.sample_rate_hz = 1000000
)";

}  // namespace detail

inline const std::vector<std::string>& preset_names()
{
  static const std::vector<std::string> names{
    "ina219-current",  "mcp3208-current", "mcp3208-voltage",
    "atmega2560-voltage", "dmm7510-current", "dmm7510-voltage",
  };
  return names;
}

/// Build a preset from its text form.
inline InstrumentPreset preset_from_text(const TextConfig& p_doc)
{
  static const std::vector<std::string> known{
    "preset.name",    "preset.method",   "preset.target_before_pct",
    "adc.n_bits",     "adc.v_fs_v",      "adc.shunt_ohm",
    "adc.offset_uv",  "adc.gain_ppm",    "adc.inl_uv",
    "adc.dnl_widths", "adc.dnl_sigma",   "adc.dnl_seed",
    "adc.noise_uv",   "adc.sample_rate_hz", "adc.phase_us",
  };
  for (const auto& [key, value] : p_doc.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown preset key '" + key + "'");
    }
  }
  InstrumentPreset preset;
  preset.document = p_doc;
  auto& adc = preset.adc;
  adc.name = p_doc.at("preset.name");
  adc.n_bits = static_cast<int>(p_doc.integer("adc.n_bits"));
  adc.v_fs = Voltage(p_doc.fixed("adc.v_fs_v", 9));
  if (p_doc.contains("adc.shunt_ohm")) {
    adc.shunt = Resistance(p_doc.fixed("adc.shunt_ohm", 9));
  }
  if (p_doc.contains("adc.offset_uv")) {
    adc.offset_uv = p_doc.real("adc.offset_uv");
  }
  if (p_doc.contains("adc.gain_ppm")) {
    adc.gain_error_ppm = p_doc.real("adc.gain_ppm");
  }
  if (auto inl = p_doc.find("adc.inl_uv")) {
    adc.inl_coeffs = detail::parse_real_list("adc.inl_uv", *inl);
  }
  if (auto widths = p_doc.find("adc.dnl_widths")) {
    adc.dnl_widths = detail::parse_real_list("adc.dnl_widths", *widths);
  } else if (p_doc.contains("adc.dnl_sigma")) {
    const auto seed = p_doc.contains("adc.dnl_seed") ? p_doc.integer("adc.dnl_seed") : 0;
    adc.dnl_widths = detail::random_dnl(
      adc.n_bits, p_doc.real("adc.dnl_sigma"), static_cast<std::uint64_t>(seed));
  }
  if (p_doc.contains("adc.noise_uv")) {
    adc.noise_sigma_uv = p_doc.real("adc.noise_uv");
  }
  adc.sample_rate_hz = p_doc.integer("adc.sample_rate_hz");
  if (p_doc.contains("adc.phase_us")) {
    adc.phase = parse_us(p_doc.at("adc.phase_us"));
  }
  if (auto method = p_doc.find("preset.method")) {
    preset.method = *method;
  }
  if (p_doc.contains("preset.target_before_pct")) {
    preset.target_before_pct = p_doc.real("preset.target_before_pct");
  }
  validate(adc);
  return preset;
}

inline std::string_view preset_text(const std::string& p_name)
{
  if (p_name == "ina219-current") {
    return detail::ina219_current;
  }
  if (p_name == "mcp3208-current") {
    return detail::mcp3208_current;
  }
  if (p_name == "mcp3208-voltage") {
    return detail::mcp3208_voltage;
  }
  if (p_name == "atmega2560-voltage") {
    return detail::atmega2560_voltage;
  }
  if (p_name == "dmm7510-current") {
    return detail::dmm7510_current;
  }
  if (p_name == "dmm7510-voltage") {
    return detail::dmm7510_voltage;
  }
  std::string valid;
  for (const auto& name : preset_names()) {
    valid += (valid.empty() ? "" : ", ") + name;
  }
  throw ValidationError("unknown preset '" + p_name + "' (valid: " + valid + ")");
}

/// A built-in name, or a path to a preset file.
inline InstrumentPreset load_preset(const std::string& p_name_or_path)
{
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), p_name_or_path) != names.end()) {
    return preset_from_text(
      TextConfig::parse_string(std::string(preset_text(p_name_or_path)), p_name_or_path));
  }
  if (p_name_or_path.find('/') == std::string::npos &&
      p_name_or_path.find('.') == std::string::npos) {
    preset_text(p_name_or_path);  // throws with the list of valid names
  }
  return preset_from_text(TextConfig::load(p_name_or_path));
}

}  // namespace procal
