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
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "procal/error.hpp"
#include "procal/units.hpp"

namespace procal {

/**
 * @brief Ordered `key = value` document.
 *
 * Lines starting with `#` are comments. Keys keep their insertion order so a
 * written file is byte-stable.
 */
class TextConfig
{
public:
  static TextConfig parse(std::istream& p_in, const std::string& p_origin)
  {
    TextConfig doc;
    std::string line;
    int line_no = 0;
    while (std::getline(p_in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') {
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError(fmt::format(
          "{}:{}: expected 'key = value', got '{}'", p_origin, line_no, line));
      }
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ValidationError(
          fmt::format("{}:{}: empty key", p_origin, line_no));
      }
      if (doc.contains(key)) {
        throw ValidationError(
          fmt::format("{}:{}: duplicate key '{}'", p_origin, line_no, key));
      }
      doc.set(key, value);
    }
    return doc;
  }

  static TextConfig parse_string(const std::string& p_text,
                                 const std::string& p_origin)
  {
    std::istringstream in(p_text);
    return parse(in, p_origin);
  }

  static TextConfig load(const std::string& p_path)
  {
    std::ifstream in(p_path);
    if (!in) {
      throw ValidationError("cannot open '" + p_path + "'");
    }
    return parse(in, p_path);
  }

  void set(const std::string& p_key, std::string p_value)
  {
    if (auto it = m_index.find(p_key); it != m_index.end()) {
      m_entries[it->second].second = std::move(p_value);
      return;
    }
    m_index.emplace(p_key, m_entries.size());
    m_entries.emplace_back(p_key, std::move(p_value));
  }

  [[nodiscard]] bool contains(const std::string& p_key) const
  {
    return m_index.count(p_key) != 0;
  }

  [[nodiscard]] std::optional<std::string> find(const std::string& p_key) const
  {
    if (auto it = m_index.find(p_key); it != m_index.end()) {
      return m_entries[it->second].second;
    }
    return std::nullopt;
  }

  [[nodiscard]] const std::string& at(const std::string& p_key) const
  {
    auto it = m_index.find(p_key);
    if (it == m_index.end()) {
      throw ValidationError("missing key '" + p_key + "'");
    }
    return m_entries[it->second].second;
  }

  [[nodiscard]] std::int64_t fixed(const std::string& p_key,
                                   int p_decimals) const
  {
    try {
      return parse_fixed(at(p_key), p_decimals);
    } catch (const ValidationError& e) {
      throw ValidationError("key '" + p_key + "': " + e.what());
    }
  }

  [[nodiscard]] std::int64_t integer(const std::string& p_key) const
  {
    return fixed(p_key, 0);
  }

  [[nodiscard]] double real(const std::string& p_key) const
  {
    const auto& text = at(p_key);
    try {
      std::size_t used = 0;
      const double value = std::stod(text, &used);
      if (trim(text.substr(used)).empty()) {
        return value;
      }
    } catch (const std::exception&) {
    }
    throw ValidationError("key '" + p_key + "': '" + text +
                          "' is not a number");
  }

  [[nodiscard]] bool boolean(const std::string& p_key) const
  {
    const auto& text = at(p_key);
    if (text == "1" || text == "true") {
      return true;
    }
    if (text == "0" || text == "false") {
      return false;
    }
    throw ValidationError("key '" + p_key + "': '" + text +
                          "' is not a boolean");
  }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>&
  entries() const
  {
    return m_entries;
  }

  void write(std::ostream& p_out) const
  {
    for (const auto& [key, value] : m_entries) {
      p_out << key << " = " << value << '\n';
    }
  }

  void save(const std::string& p_path, const std::string& p_banner = {}) const
  {
    std::ofstream out(p_path, std::ios::binary);
    if (!out) {
      throw ValidationError("cannot write '" + p_path + "'");
    }
    if (!p_banner.empty()) {
      out << "# " << p_banner << '\n';
    }
    write(out);
  }

  static std::string trim(const std::string& p_text)
  {
    const auto first = p_text.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      return {};
    }
    const auto last = p_text.find_last_not_of(" \t\r");
    return p_text.substr(first, last - first + 1);
  }

private:
  std::vector<std::pair<std::string, std::string>> m_entries;
  std::map<std::string, std::size_t> m_index;
};

/// Shortest text that parses back to the same double.
inline std::string format_real(double p_value)
{
  return fmt::format("{}", p_value);
}

namespace detail {

/// Comma-separated reals; errors name the key.
inline std::vector<double> parse_real_list(const std::string& p_key,
                                           const std::string& p_text)
{
  std::vector<double> out;
  std::stringstream in(p_text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = TextConfig::trim(item);
    if (item.empty()) {
      continue;
    }
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw ValidationError("key '" + p_key + "': '" + item + "' is not a number");
    }
  }
  return out;
}

}  // namespace detail

}  // namespace procal
