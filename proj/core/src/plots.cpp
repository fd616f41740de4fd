#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "experiment_internal.hpp"
#include "oscchain/error.hpp"
#include "oscchain/experiment.hpp"

namespace oscchain {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720, kHeight = 440, kLeft = 80, kRight = 190, kTop = 40, kBottom = 56;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

struct Series {
  std::string name;
  std::vector<double> x, y, err;
  bool dashed = false;
};

class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel, bool logx = false)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), logx_(logx) {}

  void add(Series s) { series_.push_back(std::move(s)); }

  std::string render() const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double x = tx(s.x[i]), e = s.err.empty() ? 0.0 : s.err[i];
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, s.y[i] - e);
        y1 = std::max(y1, s.y[i] + e);
      }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= std::max(0.5, std::abs(y0) * 0.1), y1 += std::max(0.5, std::abs(y1) * 0.1);
    const double pad = 0.06 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double xpad = 0.04 * (x1 - x0);
    x0 -= xpad;
    x1 += xpad;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (tx(x) - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title_)
      << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    std::vector<double> xt;
    if (logx_) {
      for (const auto& s : series_) xt.insert(xt.end(), s.x.begin(), s.x.end());
      std::sort(xt.begin(), xt.end());
      xt.erase(std::unique(xt.begin(), xt.end()), xt.end());
    } else {
      xt = nice_ticks(x0, x1);
    }
    for (double t : xt)
      o << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << kTop + ph << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    for (double t : nice_ticks(y0, y1))
      o << "<line x1=\"" << kLeft - 5 << "\" x2=\"" << kLeft << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
        << "\" stroke=\"black\"/><text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
        << num(t) << "</text>\n";
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">" << esc(xlabel_)
      << "</text>\n"
      << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + ph / 2 << ")\">" << esc(ylabel_) << "</text>\n";

    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      const char* color = kPalette[k % 8];
      std::vector<std::size_t> order(s.x.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
      for (std::size_t i : order) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      o << "\"/>\n";
      for (std::size_t i : order) {
        if (!s.dashed) o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        if (!s.err.empty() && s.err[i] > 0.0)
          o << "<line x1=\"" << px(s.x[i]) << "\" x2=\"" << px(s.x[i]) << "\" y1=\"" << py(s.y[i] - s.err[i])
            << "\" y2=\"" << py(s.y[i] + s.err[i]) << "\" stroke=\"" << color << "\"/>\n";
      }
      const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
      o << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 36 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/><text x=\"" << kWidth - kRight + 42 << "\" y=\""
        << ly + 4 << "\">" << esc(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  double tx(double x) const { return logx_ ? std::log2(x) : x; }

  std::string title_, xlabel_, ylabel_;
  bool logx_;
  std::vector<Series> series_;
};

// Cells at (x, y) with a diverging color scale symmetric around zero.
std::string heatmap(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<double>& v) {
  std::vector<double> ux = xs, uy = ys;
  std::sort(ux.begin(), ux.end());
  ux.erase(std::unique(ux.begin(), ux.end()), ux.end());
  std::sort(uy.begin(), uy.end());
  uy.erase(std::unique(uy.begin(), uy.end()), uy.end());
  double vmax = 0.0;
  for (double x : v) vmax = std::max(vmax, std::abs(x));
  if (vmax == 0.0) vmax = 1.0;
  const double x0 = ux.front() - 0.5, x1 = ux.back() + 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double rowh = ph / static_cast<double>(uy.size());
  const double colw = pw / (x1 - x0);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::clamp(v[i] / vmax, -1.0, 1.0);
    const int r = f > 0 ? 255 : static_cast<int>(255 * (1 + f)), b = f < 0 ? 255 : static_cast<int>(255 * (1 - f));
    const int g = static_cast<int>(255 * (1 - std::abs(f)));
    const auto row = static_cast<std::size_t>(std::lower_bound(uy.begin(), uy.end(), ys[i]) - uy.begin());
    const double y = kTop + ph - rowh * static_cast<double>(row + 1);
    o << "<rect x=\"" << kLeft + (xs[i] - 0.5 - x0) * colw << "\" y=\"" << y << "\" width=\"" << colw
      << "\" height=\"" << rowh << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
  }
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(x0, x1))
    o << "<text x=\"" << kLeft + (t - x0) * colw << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
      << num(t) << "</text>\n";
  for (std::size_t k = 0; k < uy.size(); ++k)
    o << "<text x=\"" << kLeft - 8 << "\" y=\"" << kTop + ph - rowh * (static_cast<double>(k) + 0.5) + 4
      << "\" text-anchor=\"end\">" << num(uy[k]) << "</text>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">site j</text>\n"
    << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << kTop + ph / 2 << ")\">t</text>\n"
    << "<text x=\"" << kWidth - kRight + 12 << "\" y=\"" << kTop + 14 << "\">color range +/- " << num(vmax)
    << "</text>\n</svg>\n";
  return o.str();
}

double to_d(const std::string& s, const fs::path& src) {
  try {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
  } catch (const std::exception&) {
    throw DataError(src.string() + ": bad number '" + s + "'");
  }
}

std::string slug(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

void plot_estimates(const fs::path& src, const fs::path& out, PlotReport& rep) {
  const CsvTable t = read_csv(src);
  const std::size_t ce = t.column("estimator", src), cp = t.column("potential", src), cs = t.column("sigma", src),
                    cl = t.column("ell", src), ct = t.column("t", src), cv = t.column("value", src),
                    cse = t.column("stderr", src), cr = t.column("reference", src);
  std::map<std::string, std::map<std::string, std::pair<Series, Series>>> groups;
  std::vector<std::string> order;
  for (const auto& row : t.rows) {
    const std::string& est = row[ce];
    if (!groups.count(est)) order.push_back(est);
    std::string key = row[cp] + " s=" + row[cs];
    if (est != "bg2" && !row[cl].empty()) key += " l=" + row[cl];
    auto& [data, ref] = groups[est][key];
    data.name = key;
    ref.name = key + " ref";
    ref.dashed = true;
    const double tt = to_d(row[ct], src), v = to_d(row[cv], src), se = to_d(row[cse], src), r = to_d(row[cr], src);
    const bool per_time = est == "qv";
    const double x = est == "bg2" ? to_d(row[cl], src) : tt;
    const double scale = per_time && tt > 0.0 ? 1.0 / tt : 1.0;
    data.x.push_back(x);
    data.y.push_back(v * scale);
    data.err.push_back(se * scale);
    if (!std::isnan(r)) {
      ref.x.push_back(x);
      ref.y.push_back(r * scale);
    }
  }
  for (const auto& est : order) {
    const bool bg2 = est == "bg2";
    LinePlot plot(est, bg2 ? "block size l" : "t (macro)", est == "qv" ? "estimate / t" : "value", bg2);
    for (auto& [key, pair] : groups[est]) {
      auto [data, ref] = pair;
      plot.add(data);
      // a single reference point still draws as a flat line over the data range
      if (ref.x.size() == 1 && data.x.size() > 1) {
        const double lo = *std::min_element(data.x.begin(), data.x.end());
        const double hi = *std::max_element(data.x.begin(), data.x.end());
        ref.x = {lo, hi};
        ref.y = {ref.y[0], ref.y[0]};
      }
      if (est == "qv" && !ref.y.empty()) {
        const double level = ref.y.back();
        ref.x = {0.0, *std::max_element(data.x.begin(), data.x.end())};
        ref.y = {level, level};
      }
      if (!ref.x.empty()) plot.add(ref);
    }
    const fs::path file = out / (slug(est) + ".svg");
    write_text(file, plot.render());
    rep.files.push_back(file);
  }
}

void plot_correlation(const fs::path& src, const fs::path& out, PlotReport& rep) {
  const CsvTable t = read_csv(src);
  const std::size_t cp = t.column("potential", src), cs = t.column("sigma", src), ct = t.column("t", src),
                    cl = t.column("lag", src), co = t.column("offset", src), cm = t.column("mean", src);
  struct Grid {
    std::vector<double> x, y, v;
  };
  std::map<std::string, Grid> grids;
  for (const auto& row : t.rows) {
    auto& g = grids[row[cp] + (row[cs] == "1" ? std::string("_plus") : std::string("_minus"))];
    // unrecentered site: lag plus the frame shift
    g.x.push_back(to_d(row[cl], src) + to_d(row[co], src));
    g.y.push_back(to_d(row[ct], src));
    g.v.push_back(to_d(row[cm], src));
  }
  for (const auto& [key, g] : grids) {
    const fs::path file = out / ("correlation_" + slug(key) + ".svg");
    write_text(file, heatmap("S(j, t) " + key, g.x, g.y, g.v));
    rep.files.push_back(file);
  }
}

void plot_sbe(const fs::path& src, const fs::path& out, PlotReport& rep) {
  const CsvTable t = read_csv(src);
  const std::size_t cp = t.column("potential", src), ct = t.column("t", src), cv = t.column("variance", src),
                    cse = t.column("stderr", src), cr = t.column("reference", src);
  LinePlot plot("SBE cell variance", "t", "Var(u_j)");
  std::map<std::string, std::pair<Series, Series>> series;
  for (const auto& row : t.rows) {
    auto& [d, r] = series[row[cp]];
    d.name = row[cp];
    r.name = "2/(beta dx)";
    r.dashed = true;
    d.x.push_back(to_d(row[ct], src));
    d.y.push_back(to_d(row[cv], src));
    d.err.push_back(to_d(row[cse], src));
    r.x.push_back(d.x.back());
    r.y.push_back(to_d(row[cr], src));
  }
  for (auto& [k, p] : series) {
    plot.add(p.first);
    plot.add(p.second);
  }
  const fs::path file = out / "sbe_variance.svg";
  write_text(file, plot.render());
  rep.files.push_back(file);
}

void plot_fields(const fs::path& src, const fs::path& out, PlotReport& rep) {
  const CsvTable t = read_csv(src);
  const std::size_t cp = t.column("potential", src), cr = t.column("replica", src), ct = t.column("t_macro", src),
                    cs = t.column("sigma", src), cc = t.column("corrected", src), cv = t.column("value", src);
  std::map<std::string, std::map<std::string, Series>> plots;
  for (const auto& row : t.rows) {
    auto& s = plots[row[cp]]["rep " + row[cr] + " s=" + row[cs] + (row[cc] == "1" ? " corr" : "")];
    s.name = "rep " + row[cr] + " s=" + row[cs] + (row[cc] == "1" ? " corr" : "");
    s.x.push_back(to_d(row[ct], src));
    s.y.push_back(to_d(row[cv], src));
  }
  for (auto& [pot, series] : plots) {
    LinePlot plot("fluctuation fields " + pot, "t (macro)", "X_t(phi)");
    std::size_t k = 0;
    for (auto& [name, s] : series)
      if (k++ < 8) plot.add(s);
    const fs::path file = out / ("fields_" + slug(pot) + ".svg");
    write_text(file, plot.render());
    rep.files.push_back(file);
  }
}

void plot_sweep(const fs::path& src, const fs::path& out, PlotReport& rep) {
  const CsvTable t = read_csv(src);
  const std::size_t ca = t.column("axis", src), cx = t.column("axis_value", src), ce = t.column("estimator", src),
                    cp = t.column("potential", src), cs = t.column("sigma", src), cl = t.column("ell", src),
                    ct = t.column("t", src), cv = t.column("value", src), cse = t.column("stderr", src);
  std::map<std::string, std::map<std::string, Series>> plots;
  std::string axis = "value";
  for (const auto& row : t.rows) {
    axis = row[ca];
    std::string key = row[cp] + " s=" + row[cs];
    if (axis != "ell" && !row[cl].empty()) key += " l=" + row[cl];
    if (row[ce] == "qv" || row[ce] == "smoothed_corr") key += " t=" + num(to_d(row[ct], src));
    auto& s = plots[row[ce]][key];
    s.name = key;
    s.x.push_back(to_d(row[cx], src));
    s.y.push_back(to_d(row[cv], src));
    s.err.push_back(to_d(row[cse], src));
  }
  for (auto& [est, series] : plots) {
    const bool logx = axis == "n" || axis == "ell";
    LinePlot plot(est + " sweep", axis, "value", logx);
    std::size_t k = 0;
    for (auto& [key, s] : series)
      if (k++ < 8) plot.add(s);
    const fs::path file = out / ("sweep_" + slug(est) + ".svg");
    write_text(file, plot.render());
    rep.files.push_back(file);
  }
}

}  // namespace

PlotReport emit_plots(const fs::path& dir) {
  PlotReport rep;
  if (!fs::is_directory(dir)) throw ResourceError("not a directory: " + dir.string());
  const std::vector<std::pair<std::string, void (*)(const fs::path&, const fs::path&, PlotReport&)>> tables = {
      {"estimates.csv", plot_estimates},
      {"correlation.csv", plot_correlation},
      {"sbe.csv", plot_sbe},
      {"fields.csv", plot_fields},
      {"sweep.csv", plot_sweep}};
  bool any = false;
  for (const auto& [name, fn] : tables) any = any || fs::exists(dir / name);
  if (!any) {
    rep.warnings.push_back("no result tables in " + dir.string() + "; nothing to plot");
    return rep;
  }
  const fs::path out = dir / "plots";
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ResourceError("cannot create " + out.string() + ": " + ec.message());
  for (const auto& [name, fn] : tables)
    if (fs::exists(dir / name)) fn(dir / name, out, rep);
  return rep;
}

}  // namespace oscchain
