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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace procal::test {

/// A fresh directory under the system temp dir, removed on destruction.
class ScratchDir
{
public:
  explicit ScratchDir(const std::string& p_tag)
  {
    std::random_device entropy;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
      m_path = base / ("procal-" + p_tag + "-" + std::to_string(entropy()));
      if (std::filesystem::create_directory(m_path)) {
        break;
      }
    }
  }
  ~ScratchDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(m_path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return m_path; }
  [[nodiscard]] std::string str() const { return m_path.string(); }
  [[nodiscard]] std::string file(const std::string& p_name) const
  {
    return (m_path / p_name).string();
  }

private:
  std::filesystem::path m_path;
};

inline std::string read_file(const std::string& p_path)
{
  std::ifstream in(p_path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::string& p_path, const std::string& p_text)
{
  std::ofstream out(p_path, std::ios::binary);
  out << p_text;
}

}  // namespace procal::test
