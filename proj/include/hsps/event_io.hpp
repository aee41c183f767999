// ============================================================================
// event_io.hpp -- trigger record files
//
// CSV:    header "t_clk_ps,t_s1_ps,t_s2_ps", one integer row per record, an
//         absent signal detection is an empty field.
// Binary: magic "HPB1", then per record three little-endian int64 values
//         (t_clk, t_s1, t_s2); an absent detection is INT64_MIN.
// ============================================================================
#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hsps/errors.hpp"

namespace hsps {

/// One heralding event: trigger-to-clock delay and signal-to-trigger delays,
/// all in integer picoseconds.
struct TriggerRecord {
  std::int64_t t_clk = 0;
  std::optional<std::int64_t> t_s1;
  std::optional<std::int64_t> t_s2;

  friend bool operator==(const TriggerRecord&, const TriggerRecord&) = default;
};

enum class EventFormat { csv, binary };

inline EventFormat event_format_from_string(const std::string& s) {
  if (s == "csv") return EventFormat::csv;
  if (s == "binary") return EventFormat::binary;
  throw DomainError("unknown event format '" + s + "' (expected csv|binary)");
}

inline const char* to_string(EventFormat f) { return f == EventFormat::csv ? "csv" : "binary"; }

inline constexpr std::string_view csv_header = "t_clk_ps,t_s1_ps,t_s2_ps";
inline constexpr std::array<char, 4> binary_magic = {'H', 'P', 'B', '1'};
inline constexpr std::int64_t absent_sentinel = std::numeric_limits<std::int64_t>::min();

namespace detail {

inline void put_i64(std::ostream& os, std::int64_t v) {
  const auto u = static_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

inline std::int64_t get_i64(const unsigned char* bytes) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<std::int64_t>(u);
}

inline std::optional<std::int64_t> decode_field(std::int64_t v) {
  if (v == absent_sentinel) return std::nullopt;
  return v;
}

}  // namespace detail

inline void write_events_csv(std::ostream& os, const std::vector<TriggerRecord>& records) {
  os << csv_header << '\n';
  for (const auto& r : records) {
    os << r.t_clk << ',';
    if (r.t_s1) os << *r.t_s1;
    os << ',';
    if (r.t_s2) os << *r.t_s2;
    os << '\n';
  }
}

inline void write_events_binary(std::ostream& os, const std::vector<TriggerRecord>& records) {
  os.write(binary_magic.data(), binary_magic.size());
  for (const auto& r : records) {
    detail::put_i64(os, r.t_clk);
    detail::put_i64(os, r.t_s1.value_or(absent_sentinel));
    detail::put_i64(os, r.t_s2.value_or(absent_sentinel));
  }
}

inline void write_events(const std::string& path, const std::vector<TriggerRecord>& records, EventFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  if (format == EventFormat::csv)
    write_events_csv(out, records);
  else
    write_events_binary(out, records);
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

namespace detail {

inline std::optional<std::int64_t> parse_csv_field(std::string_view field, bool allow_empty, std::size_t line,
                                                   const std::string& source) {
  if (field.empty()) {
    if (allow_empty) return std::nullopt;
    throw FormatError(source + ":" + std::to_string(line) + ": t_clk_ps must not be empty");
  }
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw FormatError(source + ":" + std::to_string(line) + ": not an integer: '" + std::string(field) + "'");
  if (v == absent_sentinel)
    throw FormatError(source + ":" + std::to_string(line) + ": value is reserved as the absent sentinel");
  return v;
}

}  // namespace detail

inline std::vector<TriggerRecord> read_events_csv(std::istream& in, const std::string& source = "<csv>") {
  std::vector<TriggerRecord> records;
  std::string line;
  std::size_t line_no = 0;
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw FormatError(source + ": empty file, expected CSV header");
  ++line_no;
  strip_cr(line);
  if (line != csv_header) throw FormatError(source + ": unknown header '" + line + "'");
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::string_view view(line);
    const auto c1 = view.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : view.find(',', c1 + 1);
    if (c2 == std::string_view::npos || view.find(',', c2 + 1) != std::string_view::npos)
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected 3 fields");
    TriggerRecord r;
    r.t_clk = *detail::parse_csv_field(view.substr(0, c1), false, line_no, source);
    r.t_s1 = detail::parse_csv_field(view.substr(c1 + 1, c2 - c1 - 1), true, line_no, source);
    r.t_s2 = detail::parse_csv_field(view.substr(c2 + 1), true, line_no, source);
    records.push_back(r);
  }
  return records;
}

/// Decodes a binary body (magic included).
inline std::vector<TriggerRecord> read_events_binary(std::string_view bytes, const std::string& source = "<binary>") {
  if (bytes.size() < binary_magic.size() ||
      std::memcmp(bytes.data(), binary_magic.data(), binary_magic.size()) != 0)
    throw FormatError(source + ": unknown magic");
  const std::size_t body = bytes.size() - binary_magic.size();
  constexpr std::size_t record_size = 24;
  if (body % record_size != 0)
    throw FormatError(source + ": truncated record at byte offset " +
                      std::to_string(binary_magic.size() + body / record_size * record_size));
  std::vector<TriggerRecord> records(body / record_size);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + binary_magic.size();
  for (auto& r : records) {
    const auto clk = detail::get_i64(p);
    if (clk == absent_sentinel)
      throw FormatError(source + ": absent t_clk at byte offset " +
                        std::to_string(p - reinterpret_cast<const unsigned char*>(bytes.data())));
    r.t_clk = clk;
    r.t_s1 = detail::decode_field(detail::get_i64(p + 8));
    r.t_s2 = detail::decode_field(detail::get_i64(p + 16));
    p += record_size;
  }
  return records;
}

/// Loads either format; binary files are recognised by their magic.
inline std::vector<TriggerRecord> load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(path, "read failed");
  const std::string bytes = std::move(buf).str();
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), binary_magic.data(), 4) == 0)
    return read_events_binary(bytes, path);
  std::istringstream text(bytes);
  return read_events_csv(text, path);
}

}  // namespace hsps
