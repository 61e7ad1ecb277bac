#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hatescore/error.hpp"

namespace hatescore {

/// Streaming reader for delimiter-separated text with RFC 4180 quoting:
/// fields may be wrapped in double quotes, embedded quotes are doubled, and
/// quoted fields may span lines. A trailing '\r' before '\n' is dropped.
class DelimitedReader {
 public:
  explicit DelimitedReader(std::istream& in, char delimiter = ',')
      : in_(in), delim_(delimiter) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// Throws InputError on an unterminated quoted field.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    ++record_;
    std::string field;
    bool quoted = false;
    bool field_started_quoted = false;
    for (;; c = in_.get()) {
      if (quoted) {
        if (c == EOF)
          throw InputError("unterminated quoted field in record " + std::to_string(record_));
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == EOF || c == '\n') {
        fields.push_back(std::move(field));
        return true;
      }
      if (c == '\r' && in_.peek() == '\n') continue;
      if (c == delim_) {
        fields.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
      } else if (c == '"' && field.empty() && !field_started_quoted) {
        quoted = true;
        field_started_quoted = true;
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
  }

  std::size_t records_read() const noexcept { return record_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t record_ = 0;
};

/// Quotes a field only when it contains the delimiter, a quote, or a line break.
inline std::string quote_field(std::string_view field, char delimiter = ',') {
  bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_record(std::ostream& out, const std::vector<std::string>& fields,
                         char delimiter = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.put(delimiter);
    out << quote_field(fields[i], delimiter);
  }
  out.put('\n');
}

inline std::string_view trim(std::string_view s) noexcept {
  constexpr std::string_view ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace hatescore
