#pragma once

#include <cmath>
#include <concepts>
#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace oprm::io {

/// Reals as fixed 6-decimal text; infinities as "inf"/"-inf", NaN as "nan".
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s.erase(0, 1);
  return s;
}

/// Comma-separated table writer: header row first, LF line endings.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
    bool first = true;
    for (auto h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_real(v); }
  static std::string cell(float v) { return format_real(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <std::integral T>
    requires(!std::same_as<T, bool>)
  static std::string cell(T v) {
    return std::to_string(v);
  }

  std::ostream& out_;
};

}  // namespace oprm::io
