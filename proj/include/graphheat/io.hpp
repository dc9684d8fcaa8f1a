#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphheat/common.hpp"

namespace graphheat::io {

/// Shortest text that round-trips through strtod; "nan"/"inf" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with a fixed header; cells are quoted only when they need it.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    Row& operator<<(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& operator<<(const char* s) { return *this << std::string(s); }
    Row& operator<<(double v) { return *this << format_double(v); }
    Row& operator<<(bool b) { return *this << std::string(b ? "true" : "false"); }
    template <typename I>
      requires std::is_integral_v<I>
    Row& operator<<(I v) {
      return *this << std::to_string(v);
    }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  Row& row() { return rows_.emplace_back(); }
  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream out;
    write_line(out, header_);
    for (const auto& r : rows_) {
      if (r.cells_.size() != header_.size())
        throw InvariantError("CSV row has " + std::to_string(r.cells_.size()) + " cells, header has " +
                             std::to_string(header_.size()));
      write_line(out, r.cells_);
    }
    return out.str();
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const auto& c = cells[i];
      if (c.find_first_of(",\"\n") == std::string::npos) {
        out << c;
      } else {
        out << '"';
        for (char ch : c) out << (ch == '"' ? "\"\"" : std::string(1, ch));
        out << '"';
      }
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

/// Write to a sibling temporary file, then rename over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

/// JSON number; non-finite values become strings so the document stays valid.
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

/// {"value", "tolerance", "pass"} triple for a checked quantity.
inline nlohmann::json checked(double value, double tolerance, bool pass) {
  return {{"value", number(value)}, {"tolerance", number(tolerance)}, {"pass", pass}};
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

/// Minimal line chart with linear axes.
inline std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<Series>& series) {
  constexpr double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  y0 = std::min(y0, 0.0);
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  const auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  const auto tick = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return std::string(buf);
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << f(H - B) << "\" x2=\"" << f(W - R) << "\" y2=\"" << f(H - B)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << f(H - B) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << f(px(xv)) << "\" y=\"" << f(H - B + 16) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    s << "<text x=\"" << f(L - 6) << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  s << "<text x=\"" << f((L + W - R) / 2) << "\" y=\"" << f(H - 12) << "\" text-anchor=\"middle\">" << x_label
    << "</text>\n";
  s << "<text x=\"16\" y=\"" << f((T + H - B) / 2) << "\" transform=\"rotate(-90 16 " << f((T + H - B) / 2)
    << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& se = series[k];
    s << "<polyline fill=\"none\" stroke=\"" << se.color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& [x, y] : se.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      s << (first ? "" : " ") << f(px(x)) << ',' << f(py(std::min(y, y1)));
      first = false;
    }
    s << "\"/>\n";
    const double ly = T + 18.0 * static_cast<double>(k);
    s << "<line x1=\"" << f(W - R + 12) << "\" y1=\"" << f(ly) << "\" x2=\"" << f(W - R + 36) << "\" y2=\"" << f(ly)
      << "\" stroke=\"" << se.color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << f(W - R + 42) << "\" y=\"" << f(ly + 4) << "\">" << se.label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace graphheat::io
