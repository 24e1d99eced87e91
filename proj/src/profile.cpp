#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "gridopt/bench.hpp"
#include "gridopt/error.hpp"

namespace gridopt {

Metric parse_metric(std::string_view name) {
  if (name == "time") return Metric::Time;
  if (name == "iters") return Metric::Iters;
  if (name == "memory") return Metric::Memory;
  throw Error(ErrorCode::UnknownMetric, fmt::format("'{}'", name));
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::Time: return "time";
    case Metric::Iters: return "iters";
    case Metric::Memory: return "memory";
  }
  return "?";
}

double metric_value(const RunRecord& rec, Metric metric) {
  if (!rec.success) return std::numeric_limits<double>::infinity();
  switch (metric) {
    case Metric::Time: return rec.time_s;
    case Metric::Iters: return rec.iters;
    case Metric::Memory: return rec.memory_bytes;
  }
  throw Error(ErrorCode::UnknownMetric, "bad metric value");
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 1 || !(lo > 0) || !(hi >= lo))
    throw std::invalid_argument("log_grid needs 0 < lo <= hi and points >= 1");
  std::vector<double> g(static_cast<std::size_t>(points));
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i)
    g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> default_grid(Metric metric) {
  return log_grid(1.0, metric == Metric::Iters ? 8.0 : 10.0, 200);
}

std::vector<ProfileCurve> compute_profile(const std::vector<RunRecord>& records,
                                          Metric metric,
                                          const std::vector<double>& alphas) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecordSet, "no run records");
  if (alphas.empty() || alphas.front() < 1.0 ||
      !std::is_sorted(alphas.begin(), alphas.end()))
    throw std::invalid_argument("alpha grid must be ascending and start at >= 1");

  std::set<std::string> solver_set, problem_set;
  for (const RunRecord& r : records) {
    solver_set.insert(r.solver_id);
    problem_set.insert(r.problem_id);
  }
  const std::vector<std::string> solvers(solver_set.begin(), solver_set.end());
  const std::vector<std::string> problems(problem_set.begin(), problem_set.end());
  std::map<std::string, std::size_t> s_index, p_index;
  for (std::size_t i = 0; i < solvers.size(); ++i) s_index[solvers[i]] = i;
  for (std::size_t i = 0; i < problems.size(); ++i) p_index[problems[i]] = i;

  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t ns = solvers.size(), np = problems.size();
  std::vector<double> theta(ns * np, inf);
  std::vector<char> seen(ns * np, 0);
  for (const RunRecord& r : records) {
    const std::size_t at = s_index[r.solver_id] * np + p_index[r.problem_id];
    if (seen[at])
      throw std::invalid_argument(
          fmt::format("duplicate record for ({}, {})", r.solver_id, r.problem_id));
    seen[at] = 1;
    double v = metric_value(r, metric);
    if (std::isnan(v)) v = inf;
    theta[at] = std::max(v, std::numeric_limits<double>::denorm_min());
  }

  // ratio θ_ms / θ̃_s, +∞ for failures and for problems nobody solved
  std::vector<double> ratio(ns * np, inf);
  for (std::size_t p = 0; p < np; ++p) {
    double best = inf;
    for (std::size_t m = 0; m < ns; ++m) best = std::min(best, theta[m * np + p]);
    if (!std::isfinite(best)) continue;
    for (std::size_t m = 0; m < ns; ++m) ratio[m * np + p] = theta[m * np + p] / best;
  }

  std::vector<ProfileCurve> curves(ns);
  for (std::size_t m = 0; m < ns; ++m) {
    ProfileCurve& c = curves[m];
    c.solver_id = solvers[m];
    c.alphas = alphas;
    c.values.resize(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::size_t count = 0;
      for (std::size_t p = 0; p < np; ++p) count += ratio[m * np + p] <= alphas[a];
      c.values[a] = static_cast<double>(count) / static_cast<double>(np);
    }
  }
  return curves;
}

void canonical_sort(std::vector<RunRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     return std::tie(a.solver_id, a.problem_id) <
                            std::tie(b.solver_id, b.problem_id);
                   });
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits one CSV record; quoted fields may hold commas and doubled quotes.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::IoFailure, fmt::format("line {}: bad number '{}'", line, s));
}

constexpr const char* kRunsHeader =
    "solver_id,problem_id,success,time_s,iters,memory_bytes,objective";

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kRunsHeader << '\n';
  for (const RunRecord& r : records) {
    out << fmt::format("{},{},{},{},{},{},", csv_field(r.solver_id),
                       csv_field(r.problem_id), r.success ? 1 : 0, r.time_s,
                       r.iters, r.memory_bytes);
    if (r.objective) out << fmt::format("{}", *r.objective);
    out << '\n';
  }
}

std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::IoFailure, "runs file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRunsHeader)
    throw Error(ErrorCode::IoFailure, fmt::format("unexpected header '{}'", line));
  std::vector<RunRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 7)
      throw Error(ErrorCode::IoFailure,
                  fmt::format("line {}: expected 7 fields, got {}", lineno, f.size()));
    RunRecord r;
    r.solver_id = f[0];
    r.problem_id = f[1];
    if (f[2] == "1" || f[2] == "true")
      r.success = true;
    else if (f[2] == "0" || f[2] == "false")
      r.success = false;
    else
      throw Error(ErrorCode::IoFailure, fmt::format("line {}: bad success flag", lineno));
    r.time_s = parse_number(f[3], lineno);
    r.iters = parse_number(f[4], lineno);
    r.memory_bytes = parse_number(f[5], lineno);
    if (!f[6].empty()) r.objective = parse_number(f[6], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void write_profile_csv(std::ostream& out, const std::vector<ProfileCurve>& curves) {
  out << "solver_id,alpha,p\n";
  for (const ProfileCurve& c : curves)
    for (std::size_t i = 0; i < c.alphas.size(); ++i)
      out << fmt::format("{},{},{}\n", csv_field(c.solver_id), c.alphas[i], c.values[i]);
}

namespace {

std::string xml_escape(const std::string& s) {
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

void write_profile_svg(std::ostream& out, const std::vector<ProfileCurve>& curves,
                       Metric metric) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf"};
  const double w = 640, h = 420, left = 60, right = 180, top = 20, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double amax = 1.0;
  for (const ProfileCurve& c : curves)
    if (!c.alphas.empty()) amax = std::max(amax, c.alphas.back());
  const double lmax = std::log(amax) > 0 ? std::log(amax) : 1.0;
  auto px = [&](double a) { return left + pw * std::log(std::max(a, 1.0)) / lmax; };
  auto py = [&](double p) { return top + ph * (1.0 - p); };

  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      w, h, w, h);
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
      "fill=\"none\" stroke=\"black\"/>\n",
      left, top, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double p = i / 4.0;
    out << fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.2f}</text>\n",
        left - 6, py(p) + 4, p);
  }
  for (double a : {1.0, 2.0, 4.0, 8.0, 10.0}) {
    if (a > amax) continue;
    out << fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
        px(a), top + ph + 16, a);
  }
  out << fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">alpha ({})</text>\n",
      left + pw / 2, h - 10, to_string(metric));
  out << fmt::format(
      "<text x=\"14\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 14 {:.2f})\">p(alpha)</text>\n",
      top + ph / 2, top + ph / 2);

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const ProfileCurve& c = curves[k];
    const char* colour = palette[k % std::size(palette)];
    std::string pts;
    for (std::size_t i = 0; i < c.alphas.size(); ++i) {
      if (i > 0) pts += fmt::format(" {:.2f},{:.2f}", px(c.alphas[i]), py(c.values[i - 1]));
      pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(c.alphas[i]),
                         py(c.values[i]));
    }
    out << fmt::format(
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        colour, pts);
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    out << fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
        "stroke-width=\"2\"/>\n",
        left + pw + 12, ly, left + pw + 32, ly, colour);
    out << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n",
                       left + pw + 38, ly + 4, xml_escape(c.solver_id));
  }
  out << "</svg>\n";
}

namespace {

/// Renders into memory first so a failed render leaves no file behind.
template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& render) {
  std::ostringstream buf;
  render(buf);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, fmt::format("cannot open {}", path.string()));
  const std::string s = buf.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw Error(ErrorCode::IoFailure, fmt::format("cannot write {}", path.string()));
}

}  // namespace

void emit_records(const std::filesystem::path& path,
                  const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecordSet, "no run records");
  write_file(path, [&](std::ostream& o) { write_records_csv(o, records); });
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, fmt::format("cannot open {}", path.string()));
  return read_records_csv(f);
}

void emit_profile(const std::filesystem::path& csv_path,
                  const std::vector<ProfileCurve>& curves) {
  if (curves.empty()) throw Error(ErrorCode::EmptyRecordSet, "no profile curves");
  write_file(csv_path, [&](std::ostream& o) { write_profile_csv(o, curves); });
}

void emit_profile_svg(const std::filesystem::path& svg_path,
                      const std::vector<ProfileCurve>& curves, Metric metric) {
  if (curves.empty()) throw Error(ErrorCode::EmptyRecordSet, "no profile curves");
  write_file(svg_path, [&](std::ostream& o) { write_profile_svg(o, curves, metric); });
}

}  // namespace gridopt
