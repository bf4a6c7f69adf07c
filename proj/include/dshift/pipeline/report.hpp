#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshift/aspects/greedy_match.hpp"
#include "dshift/common/error.hpp"
#include "dshift/common/text.hpp"

namespace dshift {

enum class Aggregate { sum, mean };

struct ReportColumn {
  std::string name;
  Aggregate aggregate = Aggregate::mean;
};

// Per-class measurements of one factor at one pipeline stage. Rows are keyed
// by class and emitted in sorted order; the aggregate row is always derived
// from them (sum or mean of the defined values in each column).
struct FactorReport {
  std::string stage;
  std::vector<ReportColumn> columns;
  std::map<std::string, std::vector<std::optional<double>>> rows;
  Warnings warnings;

  void set(const std::string& cls, const std::string& column, std::optional<double> v) {
    auto& row = rows[cls];
    row.resize(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == column) {
        row[i] = v;
        return;
      }
    }
    throw std::logic_error("report has no column '" + column + "'");
  }

  std::optional<double> get(const std::string& cls, const std::string& column) const {
    auto it = rows.find(cls);
    if (it == rows.end()) return std::nullopt;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == column) return i < it->second.size() ? it->second[i] : std::nullopt;
    }
    return std::nullopt;
  }

  std::vector<std::optional<double>> aggregate() const {
    std::vector<std::optional<double>> out(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [cls, row] : rows) {
        if (c < row.size() && row[c]) {
          sum += *row[c];
          ++n;
        }
      }
      if (n == 0) continue;
      out[c] = columns[c].aggregate == Aggregate::sum ? sum : sum / double(n);
    }
    return out;
  }
};

// class,<columns...> then one row per class and a final "aggregate" row.
// An empty report is just the header line.
inline std::string report_csv(const FactorReport& r) {
  std::ostringstream os;
  os << "class";
  for (const auto& c : r.columns) os << ',' << csv_escape(c.name);
  os << '\n';
  if (r.rows.empty()) return os.str();
  auto emit = [&](const std::string& label, const std::vector<std::optional<double>>& row) {
    os << csv_escape(label);
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      os << ',' << format_optional(c < row.size() ? row[c] : std::nullopt);
    }
    os << '\n';
  };
  for (const auto& [cls, row] : r.rows) emit(cls, row);
  emit("aggregate", r.aggregate());
  return os.str();
}

inline nlohmann::ordered_json report_json(const FactorReport& r) {
  auto value = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
  };
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : r.columns) {
    j["columns"].push_back({{"name", c.name}, {"aggregate", c.aggregate == Aggregate::sum ? "sum" : "mean"}});
  }
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& [cls, row] : r.rows) {
    nlohmann::ordered_json jr;
    jr["class"] = cls;
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      jr[r.columns[c].name] = value(c < row.size() ? row[c] : std::nullopt);
    }
    j["rows"].push_back(std::move(jr));
  }
  nlohmann::ordered_json agg;
  const auto a = r.aggregate();
  for (std::size_t c = 0; c < r.columns.size(); ++c) agg[r.columns[c].name] = value(a[c]);
  j["aggregate"] = r.rows.empty() ? nlohmann::ordered_json() : agg;
  j["warnings"] = r.warnings;
  return j;
}

enum class ReportFormat { csv, json };

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

inline void emit_report(const FactorReport& r, ReportFormat format, const std::filesystem::path& path) {
  write_text_file(path, format == ReportFormat::csv ? report_csv(r) : report_json(r).dump(2) + "\n");
}

// ---------------------------------------------------------------- SVG

namespace detail {

inline std::string svg_header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string svg_text(double x, double y, const std::string& s, const char* anchor = "middle") {
  std::string esc;
  for (char c : s) {
    if (c == '<') esc += "&lt;";
    else if (c == '>') esc += "&gt;";
    else if (c == '&') esc += "&amp;";
    else esc += c;
  }
  return "<text x=\"" + format_number(x) + "\" y=\"" + format_number(y) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"" + anchor + "\">" + esc + "</text>\n";
}

}  // namespace detail

// d_KL against the number of accepted pairs: one polyline vertex per pair,
// with the epsilon level as a dashed line.
inline std::string curve_svg(const AspectMatch& m, const std::string& title) {
  constexpr int W = 480, H = 300, L = 50, R = 20, T = 30, B = 40;
  double ymax = m.epsilon;
  for (const auto& c : m.curve) ymax = std::max(ymax, c.d_kl);
  ymax *= 1.1;
  const double xmax = std::max<double>(1.0, double(m.curve.size()));
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return H - B - (H - T - B) * y / ymax; };
  std::string s = detail::svg_header(W, H);
  s += detail::svg_text(W / 2.0, 18, title);
  s += "<line x1=\"" + format_number(L) + "\" y1=\"" + format_number(H - B) + "\" x2=\"" + format_number(W - R) +
       "\" y2=\"" + format_number(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + format_number(L) + "\" y1=\"" + format_number(T) + "\" x2=\"" + format_number(L) +
       "\" y2=\"" + format_number(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + format_number(L) + "\" y1=\"" + format_number(py(m.epsilon)) + "\" x2=\"" +
       format_number(W - R) + "\" y2=\"" + format_number(py(m.epsilon)) +
       "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < m.curve.size(); ++i) {
    if (i) s += ' ';
    s += format_number(px(double(m.curve[i].pair_count))) + "," + format_number(py(m.curve[i].d_kl));
  }
  s += "\"/>\n";
  s += detail::svg_text(W / 2.0, H - 8, "selected pairs");
  s += detail::svg_text(12, T - 8, "d_KL", "start");
  s += detail::svg_text(L - 4, py(m.epsilon) + 4, "eps", "end");
  s += "</svg>\n";
  return s;
}

struct StageSizes {
  std::string stage;
  std::size_t a = 0;
  std::size_t b = 0;
};

// Grouped bars: per stage, set size of side A and side B.
inline std::string sizes_svg(const std::vector<StageSizes>& stages, const std::string& name_a,
                             const std::string& name_b) {
  constexpr int H = 300, L = 50, T = 30, B = 40, Group = 90;
  const int W = L + 20 + Group * int(std::max<std::size_t>(stages.size(), 1));
  double ymax = 1.0;
  for (const auto& s : stages) ymax = std::max({ymax, double(s.a), double(s.b)});
  ymax *= 1.1;
  auto py = [&](double y) { return H - B - (H - T - B) * y / ymax; };
  std::string s = detail::svg_header(W, H);
  s += detail::svg_text(W / 2.0, 18, "set size per stage (" + name_a + " / " + name_b + ")");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const double x0 = L + Group * double(i) + 10;
    auto bar = [&](double x, std::size_t v, const char* colour) {
      s += "<rect x=\"" + format_number(x) + "\" y=\"" + format_number(py(double(v))) +
           "\" width=\"30\" height=\"" + format_number(H - B - py(double(v))) + "\" fill=\"" + colour + "\"/>\n";
      s += detail::svg_text(x + 15, py(double(v)) - 3, std::to_string(v));
    };
    bar(x0, stages[i].a, "seagreen");
    bar(x0 + 32, stages[i].b, "indianred");
    s += detail::svg_text(x0 + 31, H - B + 15, stages[i].stage);
  }
  s += "</svg>\n";
  return s;
}

}  // namespace dshift
