#include "mpat/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mpat/common.hpp"

namespace mpat {

using nlohmann::json;

RegressionFit linreg(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("linreg: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("linreg: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("linreg: x values are constant");
  RegressionFit fit;
  fit.n = xs.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = syy == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
  return fit;
}

namespace {

void require_same_keys(const ScoreMap& a, const ScoreMap& b, const char* what) {
  bool same = a.size() == b.size();
  for (auto ia = a.begin(), ib = b.begin(); same && ia != a.end(); ++ia, ++ib) same = ia->first == ib->first;
  if (!same) throw DataError(std::string(what) + ": out-of-context and in-context score maps have different pair ids");
}

struct Moments {
  double mean = 0, pop_std = 0, sample_std = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.pop_std = std::sqrt(ss / static_cast<double>(v.size()));
  m.sample_std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return m;
}

Bin make_bin(std::string label, const std::vector<double>& ooc, const std::vector<double>& ic) {
  Bin b;
  b.label = std::move(label);
  b.count = ooc.size();
  const auto mo = moments(ooc), mi = moments(ic);
  b.ooc_mean = mo.mean;
  b.ooc_std = mo.pop_std;
  b.ooc_sample_std = mo.sample_std;
  b.ic_mean = mi.mean;
  b.ic_std = mi.pop_std;
  b.ic_sample_std = mi.sample_std;
  return b;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

RegressionFit linreg(const ScoreMap& ooc, const ScoreMap& ic) {
  require_same_keys(ooc, ic, "linreg");
  std::vector<double> xs, ys;
  for (const auto& [id, x] : ooc) {
    xs.push_back(x);
    ys.push_back(ic.at(id));
  }
  return linreg(xs, ys);
}

BinStats bin_stats(const ScoreMap& ooc, const ScoreMap& ic, double boundary) {
  require_same_keys(ooc, ic, "bin_stats");
  std::vector<double> lo_ooc, lo_ic, hi_ooc, hi_ic;
  for (const auto& [id, x] : ooc) {
    const double y = ic.at(id);
    if (x < boundary) {
      lo_ooc.push_back(x);
      lo_ic.push_back(y);
    } else {
      hi_ooc.push_back(x);
      hi_ic.push_back(y);
    }
  }
  return {make_bin("<" + fmt(boundary), lo_ooc, lo_ic), make_bin(">=" + fmt(boundary), hi_ooc, hi_ic)};
}

ShiftCounts shift_counts(const ScoreMap& ooc, const ScoreMap& ic) {
  require_same_keys(ooc, ic, "shift_counts");
  ShiftCounts s;
  double raised_sum = 0, lowered_sum = 0;
  for (const auto& [id, x] : ooc) {
    const double d = ic.at(id) - x;
    if (std::abs(d) < 1e-12) {
      ++s.unchanged;
    } else if (d > 0) {
      ++s.raised;
      raised_sum += x;
    } else {
      ++s.lowered;
      lowered_sum += x;
    }
  }
  if (s.raised) s.raised_ooc_mean = raised_sum / static_cast<double>(s.raised);
  if (s.lowered) s.lowered_ooc_mean = lowered_sum / static_cast<double>(s.lowered);
  return s;
}

Scale parse_scale(std::string_view s) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) throw DataError("scale must be 'lo,hi'");
  Scale sc;
  try {
    sc.lo = std::stod(std::string(s.substr(0, comma)));
    sc.hi = std::stod(std::string(s.substr(comma + 1)));
  } catch (const std::exception&) {
    throw DataError("scale must be 'lo,hi', got '" + std::string(s) + "'");
  }
  if (!(sc.lo < sc.hi)) throw DataError("scale lower bound must be below the upper bound");
  return sc;
}

CompressionVerdict compression_verdict(const RegressionFit& fit, Scale scale) {
  CompressionVerdict v;
  if (fit.slope != 1.0) v.fixed_point = fit.intercept / (1.0 - fit.slope);
  v.compressive = fit.slope < 1.0 && v.fixed_point && *v.fixed_point > scale.lo && *v.fixed_point < scale.hi;
  return v;
}

std::string render_scatter_svg(const ScoreMap& ooc, const ScoreMap& ic, Scale scale, const RegressionFit& fit,
                               const ScatterOptions& options) {
  require_same_keys(ooc, ic, "render_scatter");
  if (ooc.empty()) throw DataError("render_scatter: nothing to plot");

  constexpr double kSize = 480, kMargin = 60;
  const double plot = kSize - 2 * kMargin;
  const double span = scale.hi - scale.lo;
  auto px = [&](double v) { return kMargin + (v - scale.lo) / span * plot; };
  auto py = [&](double v) { return kSize - kMargin - (v - scale.lo) / span * plot; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!options.deterministic) {
    const auto now = std::chrono::system_clock::now();
    os << "<!-- generated " << std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()
       << " -->\n";
  }
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize << "\" viewBox=\"0 0 "
     << kSize << " " << kSize << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << kSize << "\" height=\"" << kSize << "\" fill=\"white\"/>\n";
  os << "  <path class=\"axes\" d=\"M" << kMargin << "," << kMargin << " V" << kSize - kMargin << " H"
     << kSize - kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = scale.lo + span * i / 4.0;
    os << "  <text x=\"" << num(px(v)) << "\" y=\"" << kSize - kMargin + 16 << "\" font-size=\"10\" "
       << "text-anchor=\"middle\">" << num(v) << "</text>\n";
    os << "  <text x=\"" << kMargin - 6 << "\" y=\"" << num(py(v) + 3) << "\" font-size=\"10\" "
       << "text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  os << "  <text x=\"" << kSize / 2 << "\" y=\"" << kSize - 16 << "\" font-size=\"12\" text-anchor=\"middle\">"
     << xml_escape(options.x_label) << "</text>\n";
  os << "  <text x=\"16\" y=\"" << kSize / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kSize / 2 << ")\">" << xml_escape(options.y_label) << "</text>\n";
  if (!options.title.empty()) {
    os << "  <text x=\"" << kSize / 2 << "\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">"
       << xml_escape(options.title) << "</text>\n";
  }

  os << "  <g class=\"points\" fill=\"steelblue\" fill-opacity=\"0.6\">\n";
  for (const auto& [id, x] : ooc) {
    os << "    <circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(ic.at(id))) << "\" r=\"3\"><title>"
       << xml_escape(id) << "</title></circle>\n";
  }
  os << "  </g>\n";

  os << "  <line class=\"identity\" x1=\"" << num(px(scale.lo)) << "\" y1=\"" << num(py(scale.lo)) << "\" x2=\""
     << num(px(scale.hi)) << "\" y2=\"" << num(py(scale.hi)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  const double y_lo = fit.intercept + fit.slope * scale.lo;
  const double y_hi = fit.intercept + fit.slope * scale.hi;
  os << "  <line class=\"regression\" x1=\"" << num(px(scale.lo)) << "\" y1=\"" << num(py(y_lo)) << "\" x2=\""
     << num(px(scale.hi)) << "\" y2=\"" << num(py(y_hi)) << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
  os << "</svg>\n";
  return os.str();
}

void render_scatter(const ScoreMap& ooc, const ScoreMap& ic, Scale scale, const RegressionFit& fit,
                    const std::filesystem::path& out_path, const ScatterOptions& options) {
  write_file_atomic(out_path, render_scatter_svg(ooc, ic, scale, fit, options));
}

json analysis_summary(const RegressionFit& fit, const BinStats& bins, const ShiftCounts& shifts,
                      const CompressionVerdict& verdict, Scale scale) {
  auto bin_json = [](const Bin& b) {
    return json{{"label", b.label},       {"count", b.count},
                {"ooc_mean", b.ooc_mean}, {"ooc_std", b.ooc_std},
                {"ic_mean", b.ic_mean},   {"ic_std", b.ic_std},
                {"ooc_sample_std", b.ooc_sample_std}, {"ic_sample_std", b.ic_sample_std}};
  };
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r"] = fit.r;
  j["n"] = fit.n;
  j["scale"] = {scale.lo, scale.hi};
  j["bins"] = {bin_json(bins.low), bin_json(bins.high)};
  j["shifts"] = {{"raised", shifts.raised},
                 {"lowered", shifts.lowered},
                 {"unchanged", shifts.unchanged},
                 {"raised_ooc_mean", opt(shifts.raised_ooc_mean)},
                 {"lowered_ooc_mean", opt(shifts.lowered_ooc_mean)}};
  j["verdict"] = {{"compressive", verdict.compressive}, {"fixed_point", opt(verdict.fixed_point)}};
  return j;
}

ScoreMap parse_score_map(std::string_view text) {
  ScoreMap out;
  json j = json::parse(text, nullptr, false);
  if (!j.is_discarded() && j.is_object() && !j.contains("pair_id")) {
    for (const auto& [k, v] : j.items()) {
      if (!v.is_number()) throw DataError("score for '" + k + "' is not a number");
      out[k] = v.get<double>();
    }
    return out;
  }
  // JSON lines of {"pair_id": ..., "mean"|"score": ...}, as written by the aggregation step.
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) throw DataError(where + "expected a JSON object");
    if (!rec.contains("pair_id") || !rec["pair_id"].is_string()) throw DataError(where + "missing pair_id");
    const json* value = rec.contains("mean") ? &rec["mean"] : rec.contains("score") ? &rec["score"] : nullptr;
    if (!value || !value->is_number()) throw DataError(where + "missing numeric mean or score");
    if (!out.emplace(rec["pair_id"].get<std::string>(), value->get<double>()).second) {
      throw DataError(where + "duplicate pair_id");
    }
  }
  if (out.empty()) throw DataError("no scores found");
  return out;
}

ScoreMap load_score_map(const std::filesystem::path& path) {
  try {
    return parse_score_map(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string score_map_json(const ScoreMap& scores) {
  json j = json::object();
  for (const auto& [k, v] : scores) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace mpat
