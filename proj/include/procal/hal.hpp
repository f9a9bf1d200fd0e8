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
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "procal/circuit.hpp"
#include "procal/units.hpp"

/**
 * @file hal.hpp
 * @brief Command encoding for the potentiometer and switch banks, and the
 * transports that carry it.
 *
 * A pot write is one SPI frame, most significant bit first. A switch write is
 * the whole 16-bit mask, high byte first; bit b drives bank slot b. The two
 * trigger events bracket every session.
 */

namespace procal::hal {
using procal::Nanos;

/// Time one bus transaction occupies on the simulated timeline
/// (an 8-bit frame at 50 MHz).
inline constexpr Nanos bus_write_time{ 160 };

/// Flag bit: a pot frame carrying the all-ones word stands for code 2^n.
inline constexpr std::uint8_t flag_top_alias = 0x01;

struct PotWriteFrame
{
  std::uint32_t word = 0;
  int n_bits = 8;
  /// Session-level sideband: the word is the all-ones alias of code 2^n.
  bool top_alias = false;

  [[nodiscard]] std::vector<std::uint8_t> bytes() const
  {
    const int width = (n_bits + 7) / 8;
    std::vector<std::uint8_t> out;
    for (int i = width - 1; i >= 0; --i) {
      out.push_back(static_cast<std::uint8_t>(word >> (8 * i)));
    }
    return out;
  }

  bool operator==(const PotWriteFrame&) const = default;
};

struct SwitchWord
{
  std::uint16_t mask = 0;

  [[nodiscard]] std::vector<std::uint8_t> bytes() const
  {
    return { static_cast<std::uint8_t>(mask >> 8),
             static_cast<std::uint8_t>(mask & 0xFF) };
  }

  [[nodiscard]] bool connected(int p_slot) const
  {
    return ((mask >> p_slot) & 1U) != 0;
  }

  bool operator==(const SwitchWord&) const = default;
};

inline PotWriteFrame encode_pot(int p_code, int p_n_bits = 8)
{
  if (p_n_bits < 1 || p_n_bits > 24) {
    throw procal::DomainError("pot width must be in [1, 24] bits");
  }
  const int top = 1 << p_n_bits;
  if (p_code < 0 || p_code > top) {
    throw procal::DomainError(fmt::format(
      "pot code {} outside encodable interval [0, {}]", p_code, top));
  }
  if (p_code == top) {
    return { static_cast<std::uint32_t>(top - 1), p_n_bits, true };
  }
  return { static_cast<std::uint32_t>(p_code), p_n_bits, false };
}

inline int decode_pot(const PotWriteFrame& p_frame)
{
  const auto all_ones = (1U << p_frame.n_bits) - 1U;
  if (p_frame.word > all_ones) {
    throw procal::DomainError("pot word wider than the frame");
  }
  if (p_frame.top_alias) {
    if (p_frame.word != all_ones) {
      throw procal::DomainError("top-code alias must carry the all-ones word");
    }
    return static_cast<int>(all_ones) + 1;
  }
  return static_cast<int>(p_frame.word);
}

inline SwitchWord encode_switches(std::uint16_t p_mask)
{
  return SwitchWord{ p_mask };
}

inline std::uint16_t decode_switches(const SwitchWord& p_word)
{
  return p_word.mask;
}

enum class EventKind
{
  trigger_start,
  pot_write,
  switch_write,
  trigger_stop,
};

inline const char* to_string(EventKind p_kind)
{
  switch (p_kind) {
    case EventKind::trigger_start:
      return "START";
    case EventKind::pot_write:
      return "POT";
    case EventKind::switch_write:
      return "SW";
    case EventKind::trigger_stop:
      return "STOP";
  }
  return "?";
}

struct TransportEvent
{
  Nanos t{};
  EventKind kind = EventKind::trigger_start;
  std::vector<std::uint8_t> payload;
  std::uint8_t flags = 0;

  bool operator==(const TransportEvent&) const = default;

  static TransportEvent start(Nanos p_t) { return { p_t, EventKind::trigger_start, {}, 0 }; }
  static TransportEvent stop(Nanos p_t) { return { p_t, EventKind::trigger_stop, {}, 0 }; }
  static TransportEvent pot(Nanos p_t, const PotWriteFrame& p_frame)
  {
    return { p_t,
             EventKind::pot_write,
             p_frame.bytes(),
             static_cast<std::uint8_t>(p_frame.top_alias ? flag_top_alias : 0) };
  }
  static TransportEvent switches(Nanos p_t, const SwitchWord& p_word)
  {
    return { p_t, EventKind::switch_write, p_word.bytes(), 0 };
  }

  [[nodiscard]] PotWriteFrame pot_frame(int p_n_bits) const
  {
    if (kind != EventKind::pot_write) {
      throw procal::ProtocolError("not a pot write");
    }
    if (payload.size() != static_cast<std::size_t>((p_n_bits + 7) / 8)) {
      throw procal::ProtocolError("pot frame has wrong length");
    }
    std::uint32_t word = 0;
    for (const auto byte : payload) {
      word = (word << 8) | byte;
    }
    return { word, p_n_bits, (flags & flag_top_alias) != 0 };
  }

  [[nodiscard]] SwitchWord switch_word() const
  {
    if (kind != EventKind::switch_write || payload.size() != 2) {
      throw procal::ProtocolError("not a switch write");
    }
    return { static_cast<std::uint16_t>((payload[0] << 8) | payload[1]) };
  }
};

/**
 * @brief Synchronous request/acknowledge transport.
 *
 * send() returns once the device acknowledged the event and throws
 * procal::TransportError when it did not.
 */
class Transport
{
public:
  virtual ~Transport() = default;
  virtual void send(const TransportEvent& p_event) = 0;
};

/// Simulated board: applies writes to the circuit model.
class MockTransport : public Transport
{
public:
  struct StateChange
  {
    Nanos t{};
    int pot_code = 0;
    std::uint16_t switch_mask = 0;
    procal::ElectricalOutput output{};
  };

  MockTransport(procal::CircuitSetup p_setup, procal::OutputKind p_kind)
    : m_setup(std::move(p_setup))
    , m_kind(p_kind)
    , m_pot_code(m_setup.pot.top_code())
  {
  }

  void send(const TransportEvent& p_event) override
  {
    switch (p_event.kind) {
      case EventKind::trigger_start:
        m_sampling = true;
        record(p_event.t);
        break;
      case EventKind::trigger_stop:
        m_sampling = false;
        break;
      case EventKind::pot_write:
        m_pot_code = decode_pot(p_event.pot_frame(m_setup.pot.n_bits));
        procal::check_code(m_setup.pot, m_pot_code);
        record(p_event.t);
        break;
      case EventKind::switch_write:
        m_mask = decode_switches(p_event.switch_word());
        record(p_event.t);
        break;
    }
    m_events.push_back(p_event);
  }

  [[nodiscard]] int pot_code() const { return m_pot_code; }
  [[nodiscard]] std::uint16_t switch_mask() const { return m_mask; }
  [[nodiscard]] bool sampling() const { return m_sampling; }
  [[nodiscard]] procal::ElectricalOutput output() const
  {
    return procal::evaluate(m_setup, m_pot_code, m_mask, m_kind);
  }
  /// Circuit state after every event that could change it.
  [[nodiscard]] const std::vector<StateChange>& history() const { return m_history; }
  [[nodiscard]] const std::vector<TransportEvent>& events() const { return m_events; }
  [[nodiscard]] const procal::CircuitSetup& setup() const { return m_setup; }
  [[nodiscard]] procal::OutputKind kind() const { return m_kind; }

private:
  void record(Nanos p_t)
  {
    m_history.push_back({ p_t, m_pot_code, m_mask, output() });
  }

  procal::CircuitSetup m_setup;
  procal::OutputKind m_kind;
  int m_pot_code;
  std::uint16_t m_mask = 0;
  bool m_sampling = false;
  std::vector<StateChange> m_history;
  std::vector<TransportEvent> m_events;
};

/// Keeps every acknowledged event and forwards it downstream, if any.
class RecordingTransport : public Transport
{
public:
  explicit RecordingTransport(Transport* p_downstream = nullptr)
    : m_downstream(p_downstream)
  {
  }

  void send(const TransportEvent& p_event) override
  {
    if (m_downstream != nullptr) {
      m_downstream->send(p_event);
    }
    m_events.push_back(p_event);
  }

  [[nodiscard]] const std::vector<TransportEvent>& events() const { return m_events; }

private:
  Transport* m_downstream;
  std::vector<TransportEvent> m_events;
};

/// Re-issue a recorded log, in order, into another transport.
inline void replay(std::span<const TransportEvent> p_log, Transport& p_target)
{
  for (const auto& event : p_log) {
    p_target.send(event);
  }
}

/**
 * @brief Protocol guard around a transport.
 *
 * Enforces one start trigger, writes only inside the start/stop window, one
 * stop trigger, and strictly increasing timestamps.
 */
class Session
{
public:
  explicit Session(Transport& p_transport)
    : m_transport(p_transport)
  {
  }

  void start(Nanos p_t)
  {
    if (m_state != state::idle) {
      throw procal::ProtocolError("session already started");
    }
    issue(TransportEvent::start(p_t));
    m_state = state::active;
  }

  void write_pot(Nanos p_t, const PotWriteFrame& p_frame)
  {
    require_active("pot write");
    issue(TransportEvent::pot(p_t, p_frame));
  }

  void write_switches(Nanos p_t, const SwitchWord& p_word)
  {
    require_active("switch write");
    issue(TransportEvent::switches(p_t, p_word));
  }

  void stop(Nanos p_t)
  {
    require_active("stop trigger");
    issue(TransportEvent::stop(p_t));
    m_state = state::stopped;
  }

  [[nodiscard]] bool active() const { return m_state == state::active; }
  [[nodiscard]] bool stopped() const { return m_state == state::stopped; }
  [[nodiscard]] const std::vector<TransportEvent>& log() const { return m_log; }

private:
  enum class state
  {
    idle,
    active,
    stopped,
  };

  void require_active(const char* p_what) const
  {
    if (m_state != state::active) {
      throw procal::ProtocolError(std::string(p_what) +
                                  " outside the start/stop trigger window");
    }
  }

  void issue(const TransportEvent& p_event)
  {
    if (!m_log.empty() && p_event.t <= m_log.back().t) {
      throw procal::ProtocolError(fmt::format(
        "event at {} us does not follow {} us",
        procal::format_us(p_event.t),
        procal::format_us(m_log.back().t)));
    }
    m_transport.send(p_event);
    m_log.push_back(p_event);
  }

  Transport& m_transport;
  state m_state = state::idle;
  std::vector<TransportEvent> m_log;
};

/// True when the log reads Start (Write)* Stop with strictly increasing time.
inline bool is_bracketed(std::span<const TransportEvent> p_log)
{
  if (p_log.size() < 2 || p_log.front().kind != EventKind::trigger_start ||
      p_log.back().kind != EventKind::trigger_stop) {
    return false;
  }
  for (std::size_t i = 1; i < p_log.size(); ++i) {
    if (p_log[i].t <= p_log[i - 1].t) {
      return false;
    }
    if (i + 1 < p_log.size() && (p_log[i].kind == EventKind::trigger_start ||
                                 p_log[i].kind == EventKind::trigger_stop)) {
      return false;
    }
  }
  return true;
}

// Event log file: header, then `t_us,kind,payload_hex,flags` per event.
inline constexpr const char* event_log_header = "t_us,kind,payload_hex,flags";

inline void write_event_log(std::ostream& p_out,
                            std::span<const TransportEvent> p_log)
{
  p_out << event_log_header << '\n';
  for (const auto& event : p_log) {
    std::string hex;
    for (const auto byte : event.payload) {
      hex += fmt::format("{:02x}", byte);
    }
    p_out << procal::format_us(event.t) << ',' << to_string(event.kind) << ','
          << hex << ',' << static_cast<int>(event.flags) << '\n';
  }
}

inline void save_event_log(const std::string& p_path,
                           std::span<const TransportEvent> p_log)
{
  std::ofstream out(p_path, std::ios::binary);
  if (!out) {
    throw procal::ValidationError("cannot write '" + p_path + "'");
  }
  write_event_log(out, p_log);
}

inline std::vector<TransportEvent> read_event_log(std::istream& p_in)
{
  std::vector<TransportEvent> log;
  std::string line;
  int line_no = 0;
  while (std::getline(p_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#' || line == event_log_header) {
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      cols.push_back(cell);
    }
    if (cols.size() == 3 && line.back() == ',') {
      cols.emplace_back();
    }
    if (cols.size() != 4) {
      throw procal::ValidationError(
        fmt::format("event log line {}: expected 4 columns", line_no));
    }
    TransportEvent event;
    event.t = procal::parse_us(cols[0]);
    if (cols[1] == "START") {
      event.kind = EventKind::trigger_start;
    } else if (cols[1] == "STOP") {
      event.kind = EventKind::trigger_stop;
    } else if (cols[1] == "POT") {
      event.kind = EventKind::pot_write;
    } else if (cols[1] == "SW") {
      event.kind = EventKind::switch_write;
    } else {
      throw procal::ValidationError(
        fmt::format("event log line {}: unknown kind '{}'", line_no, cols[1]));
    }
    if (cols[2].size() % 2 != 0) {
      throw procal::ValidationError(
        fmt::format("event log line {}: odd-length payload", line_no));
    }
    for (std::size_t i = 0; i < cols[2].size(); i += 2) {
      event.payload.push_back(
        static_cast<std::uint8_t>(std::stoul(cols[2].substr(i, 2), nullptr, 16)));
    }
    event.flags = static_cast<std::uint8_t>(procal::parse_fixed(cols[3], 0));
    log.push_back(std::move(event));
  }
  return log;
}

inline std::vector<TransportEvent> load_event_log(const std::string& p_path)
{
  std::ifstream in(p_path);
  if (!in) {
    throw procal::ValidationError("cannot open '" + p_path + "'");
  }
  return read_event_log(in);
}

}  // namespace procal::hal
