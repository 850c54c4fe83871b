#include "oprm/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "oprm/errors.hpp"
#include "oprm/io/table.hpp"

namespace oprm::io {
namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  // Short fixed-point coordinates keep files stable and compact.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Axis {
  double lo, hi, px_lo, px_hi;
  double map(double v) const { return hi == lo ? (px_lo + px_hi) / 2 : px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

void header(std::ostream& out, const ChartSpec& spec) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
      << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(kW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(spec.title)
      << "</text>\n"
      << "<text x=\"" << num(kLeft + (kW - kLeft - kRight) / 2) << "\" y=\"" << num(kH - 15)
      << "\" text-anchor=\"middle\">" << esc(spec.x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << num(kTop + (kH - kTop - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num(kTop + (kH - kTop - kBottom) / 2) << ")\">" << esc(spec.y_label) << "</text>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
      << "\" stroke=\"black\"/>\n";
}

void y_ticks(std::ostream& out, const Axis& y) {
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << num(py) << "\" x2=\"" << kLeft << "\" y2=\"" << num(py)
        << "\" stroke=\"black\"/><text x=\"" << kLeft - 7 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
        << format_real(v).substr(0, format_real(v).find('.') + 3) << "</text>\n";
  }
}

Axis fit_y(const ChartSpec& spec, double lo, double hi) {
  if (spec.y_lo != spec.y_hi) return {spec.y_lo, spec.y_hi, kH - kBottom, kTop};
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {std::min(lo, 0.0), hi, kH - kBottom, kTop};
}

}  // namespace

void line_chart(std::ostream& out, const ChartSpec& spec, const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  auto tx = [&](double x) { return spec.log2_x ? std::log2(x) : x; };
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw UsageError("series '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log2_x && !(s.x[i] > 0)) throw UsageError("log-scale axis needs positive x values");
      xlo = std::min(xlo, tx(s.x[i]));
      xhi = std::max(xhi, tx(s.x[i]));
      if (std::isfinite(s.y[i])) {
        ylo = std::min(ylo, s.y[i]);
        yhi = std::max(yhi, s.y[i]);
      }
    }
  }
  if (!std::isfinite(xlo)) xlo = xhi = 0;
  if (!std::isfinite(ylo)) ylo = yhi = 0;
  const Axis x{xlo, xhi, kLeft + 10, kW - kRight - 10};
  const Axis y = fit_y(spec, ylo, yhi);

  header(out, spec);
  y_ticks(out, y);
  // x ticks at the distinct data x positions of the first series
  if (!series.empty())
    for (double v : series.front().x)
      out << "<text x=\"" << num(x.map(tx(v))) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
          << esc(format_real(v).substr(0, format_real(v).find('.'))) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    out << "<g class=\"series\" data-name=\"" << esc(s.name) << "\">\n<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << (i ? " " : "") << num(x.map(tx(s.x[i]))) << ',' << num(y.map(s.y[i]));
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << "<circle class=\"point\" cx=\"" << num(x.map(tx(s.x[i]))) << "\" cy=\"" << num(y.map(s.y[i]))
          << "\" r=\"3.5\" fill=\"" << color << "\" data-series=\"" << esc(s.name) << "\" data-x=\""
          << format_real(s.x[i]) << "\" data-y=\"" << format_real(s.y[i]) << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    out << "<line x1=\"" << kW - kRight + 12 << "\" y1=\"" << num(ly) << "\" x2=\"" << kW - kRight + 32 << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << kW - kRight + 38 << "\" y=\""
        << num(ly + 4) << "\">" << esc(s.name) << "</text>\n</g>\n";
  }
  out << "</svg>\n";
}

void bar_chart(std::ostream& out, const ChartSpec& spec, const std::vector<std::string>& labels,
               const std::vector<double>& values) {
  if (labels.size() != values.size()) throw UsageError("bar chart needs one label per value");
  double lo = 0, hi = 0;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const Axis y = fit_y(spec, lo, hi);
  header(out, spec);
  y_ticks(out, y);
  const double span = kW - kLeft - kRight;
  const double slot = values.empty() ? span : span / static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double top = y.map(std::max(v, 0.0)), base = y.map(std::min(v, 0.0));
    const double px = kLeft + slot * static_cast<double>(i) + slot * 0.1;
    out << "<rect class=\"bar\" x=\"" << num(px) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.8)
        << "\" height=\"" << num(base - top) << "\" fill=\"" << kPalette[0] << "\" data-label=\"" << esc(labels[i])
        << "\" data-y=\"" << format_real(values[i]) << "\"/>\n"
        << "<text x=\"" << num(px + slot * 0.4) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
        << esc(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace oprm::io
