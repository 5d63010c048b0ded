#include <softchain/plot.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace softchain {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 80, kRight = 20, kTop = 40, kBottom = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Axis mapping from data to pixels.
struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double p0 = 0, p1 = 1;

  double map(double v) const {
    double t;
    if (log) {
      const double x = v > 0 ? std::log10(v) : lo;
      t = (std::clamp(x, lo, hi) - lo) / (hi - lo);
    } else {
      t = (v - lo) / (hi - lo);
    }
    return p0 + t * (p1 - p0);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::ceil(lo)); e <= static_cast<int>(std::floor(hi)); ++e)
        out.push_back(std::pow(10.0, e));
      return out;
    }
    const double step = std::pow(10.0, std::floor(std::log10((hi - lo) / 2.0)));
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) out.push_back(v);
    return out;
  }
};

Axis make_axis(double lo, double hi, bool log, double p0, double p1) {
  Axis a;
  a.log = log;
  a.p0 = p0;
  a.p1 = p1;
  if (log) {
    lo = std::max(lo, 1e-300);
    hi = std::max(hi, lo);
    a.lo = std::floor(std::log10(lo));
    a.hi = std::ceil(std::log10(hi));
    if (a.hi <= a.lo) a.hi = a.lo + 1;
  } else {
    if (hi <= lo) {
      hi = lo + 1;
    }
    const double pad = 0.05 * (hi - lo);
    a.lo = lo - pad;
    a.hi = hi + pad;
  }
  return a;
}

void frame(std::ostringstream& s, const std::string& title, const std::string& x_label,
           const std::string& y_label, const Axis& y) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  s << "<text transform=\"translate(18," << kHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label) << "</text>\n";
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
    << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : y.ticks()) {
    const double py = y.map(v);
    s << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << fmt(py) << "\" y2=\"" << fmt(py)
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">" << tick(v)
      << "</text>\n";
  }
}

}  // namespace

std::string boxplot_svg(const std::string& title, const std::string& y_label, const std::vector<BoxGroup>& groups,
                        bool log_y) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups) {
    for (double v : {g.stats.min, g.stats.q1, g.stats.median, g.stats.q3, g.stats.max, g.stats.mean}) {
      if (log_y && !(v > 0)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    lo = log_y ? 1e-3 : 0.0;
    hi = log_y ? 1.0 : 1.0;
  }
  const Axis y = make_axis(lo, hi, log_y, kHeight - kBottom, kTop);
  std::ostringstream s;
  frame(s, title, "", y_label, y);
  const double plot_w = kWidth - kLeft - kRight;
  const double slot = groups.empty() ? plot_w : plot_w / groups.size();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const BoxStats& b = groups[i].stats;
    const double cx = kLeft + slot * (i + 0.5);
    const double half = std::min(30.0, 0.3 * slot);
    const char* color = kColors[i % 7];
    s << "<line x1=\"" << fmt(cx) << "\" x2=\"" << fmt(cx) << "\" y1=\"" << fmt(y.map(b.min)) << "\" y2=\""
      << fmt(y.map(b.max)) << "\" stroke=\"" << color << "\"/>\n";
    for (double v : {b.min, b.max})
      s << "<line x1=\"" << fmt(cx - half / 2) << "\" x2=\"" << fmt(cx + half / 2) << "\" y1=\"" << fmt(y.map(v))
        << "\" y2=\"" << fmt(y.map(v)) << "\" stroke=\"" << color << "\"/>\n";
    const double top = y.map(b.q3), bottom = y.map(b.q1);
    s << "<rect x=\"" << fmt(cx - half) << "\" y=\"" << fmt(std::min(top, bottom)) << "\" width=\"" << fmt(2 * half)
      << "\" height=\"" << fmt(std::abs(bottom - top)) << "\" fill=\"" << color
      << "\" fill-opacity=\"0.3\" stroke=\"" << color << "\"/>\n";
    s << "<line x1=\"" << fmt(cx - half) << "\" x2=\"" << fmt(cx + half) << "\" y1=\"" << fmt(y.map(b.median))
      << "\" y2=\"" << fmt(y.map(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(y.map(b.mean)) << "\" r=\"3\" fill=\"black\"/>\n";
    s << "<text x=\"" << fmt(cx) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
      << escape(groups[i].label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool log_x, bool log_y) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& sr : series)
    for (const auto& [x, v] : sr.points) {
      if ((log_x && !(x > 0)) || (log_y && !(v > 0)) || !std::isfinite(x) || !std::isfinite(v)) continue;
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  if (!std::isfinite(xlo)) {
    xlo = ylo = log_x ? 1.0 : 0.0;
    xhi = yhi = 10.0;
  }
  const Axis x = make_axis(xlo, xhi, log_x, kLeft, kWidth - kRight - 110);
  const Axis y = make_axis(ylo, yhi, log_y, kHeight - kBottom, kTop);
  std::ostringstream s;
  frame(s, title, x_label, y_label, y);
  for (double v : x.ticks())
    s << "<text x=\"" << fmt(x.map(v)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
      << tick(v) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 7];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [px, py] : series[i].points)
      if (std::isfinite(px) && std::isfinite(py)) s << fmt(x.map(px)) << ',' << fmt(y.map(py)) << ' ';
    s << "\"/>\n";
    for (const auto& [px, py] : series[i].points)
      if (std::isfinite(px) && std::isfinite(py))
        s << "<circle cx=\"" << fmt(x.map(px)) << "\" cy=\"" << fmt(y.map(py)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    const double ly = kTop + 16 + 18 * i;
    s << "<line x1=\"" << kWidth - kRight - 100 << "\" x2=\"" << kWidth - kRight - 80 << "\" y1=\"" << fmt(ly)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kWidth - kRight - 74 << "\" y=\"" << fmt(ly + 4) << "\">" << escape(series[i].label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace softchain
