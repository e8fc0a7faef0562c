#ifndef TAMM_CSV_HPP
#define TAMM_CSV_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace tamm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. Carries the 1-based line number and field name when known.
class FormatError : public Error {
 public:
  FormatError(std::string source, std::size_t line, std::string field, const std::string& what)
      : Error(fmt::format("{}:{}: field '{}': {}", source, line, field, what)),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

namespace csv {

/// Splits one RFC 4180 record. Quoted fields may contain commas and doubled quotes.
inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> to_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Line-oriented reader that checks the header and tracks line numbers.
class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Reads the header row and requires it to equal `expected` exactly.
  void expect_header(const std::vector<std::string>& expected) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw FormatError(source_, 1, "header", "missing header");
    }
    line_no_ = 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (split(line) != expected) {
      throw FormatError(source_, 1, "header", fmt::format("expected '{}'", fmt::join(expected, ",")));
    }
    width_ = expected.size();
    names_ = expected;
  }

  /// Next non-empty record; std::nullopt at end of input.
  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      auto fields = split(line);
      if (fields.size() != width_) {
        throw FormatError(source_, line_no_, "record",
                          fmt::format("expected {} fields, found {}", width_, fields.size()));
      }
      return fields;
    }
    return std::nullopt;
  }

  std::size_t line() const { return line_no_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw FormatError(source_, line_no_, names_.at(column), what);
  }

  double number(const std::vector<std::string>& rec, std::size_t column) const {
    auto v = to_double(rec[column]);
    if (!v) fail(column, fmt::format("'{}' is not a number", rec[column]));
    return *v;
  }

  std::optional<double> optional_number(const std::vector<std::string>& rec, std::size_t column) const {
    if (trim(rec[column]).empty()) return std::nullopt;
    return number(rec, column);
  }

  std::int64_t integer(const std::vector<std::string>& rec, std::size_t column) const {
    auto v = to_int(rec[column]);
    if (!v) fail(column, fmt::format("'{}' is not an integer", rec[column]));
    return *v;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
  std::size_t width_ = 0;
  std::vector<std::string> names_;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  return out;
}

}  // namespace csv
}  // namespace tamm

#endif  // TAMM_CSV_HPP
