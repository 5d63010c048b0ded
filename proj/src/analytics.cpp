#include <softchain/analytics.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace softchain {

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double get_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error(std::string(what) + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: inputs differ in length");
  if (x.size() < 3) throw std::invalid_argument("spearman: need at least 3 samples");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("spearman: non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("spearman: non-finite value");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw StatisticsError("spearman: constant input, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_q: a must be > 0");
  if (!(x >= 0.0)) throw std::invalid_argument("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_sf: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * dof, 0.5 * x);
}

// ---------------------------------------------------------------------------------------------

int outcome_category(Outcome o) {
  switch (o) {
    case Outcome::Lift: return 0;
    case Outcome::Slip: return 1;
    case Outcome::Tip: return 2;
    default: break;
  }
  throw std::invalid_argument("outcome '" + outcome_name(o) + "' has no category");
}

std::array<long, 3> TransitionMatrix::row_totals() const {
  std::array<long, 3> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i] += counts[i][j];
  return r;
}

std::array<long, 3> TransitionMatrix::col_totals() const {
  std::array<long, 3> c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[j] += counts[i][j];
  return c;
}

long TransitionMatrix::total() const {
  const auto r = row_totals();
  return r[0] + r[1] + r[2];
}

TransitionMatrix build_transition_matrix(const std::vector<Outcome>& a, const std::vector<Outcome>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("build_transition_matrix: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + " outcomes");
  TransitionMatrix t;
  for (std::size_t i = 0; i < a.size(); ++i) ++t.counts[outcome_category(a[i])][outcome_category(b[i])];
  return t;
}

TransitionMatrix build_transition_matrix(const std::vector<EpisodeRecord>& a,
                                         const std::vector<EpisodeRecord>& b) {
  std::vector<Outcome> oa, ob;
  for (const auto& r : a) oa.push_back(r.outcome);
  for (const auto& r : b) ob.push_back(r.outcome);
  return build_transition_matrix(oa, ob);
}

StuartMaxwellResult stuart_maxwell(const TransitionMatrix& t) {
  constexpr int k = 3;
  const auto rows = t.row_totals(), cols = t.col_totals();
  Eigen::Vector2d d;
  Eigen::Matrix2d s;
  for (int i = 0; i < k - 1; ++i) {
    d[i] = static_cast<double>(rows[i] - cols[i]);
    for (int j = 0; j < k - 1; ++j)
      s(i, j) = i == j ? static_cast<double>(rows[i] + cols[i] - 2 * t.counts[i][i])
                       : -static_cast<double>(t.counts[i][j] + t.counts[j][i]);
  }
  StuartMaxwellResult r;
  Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix2d> cod(s);
  cod.setThreshold(1e-12);
  r.dof = static_cast<int>(cod.rank());
  if (r.dof == 0) return r;
  r.chi2 = std::max(0.0, d.dot(cod.pseudoInverse() * d));
  r.p = chi_square_sf(r.chi2, r.dof);
  return r;
}

// ---------------------------------------------------------------------------------------------

double corrective_action(const ActionVector& unperturbed, const ActionVector& perturbed) {
  double s = 0.0;
  for (int i = 0; i < kActDim; ++i) s += (unperturbed[i] - perturbed[i]) * (unperturbed[i] - perturbed[i]);
  return 100.0 * std::sqrt(s) / std::sqrt(static_cast<double>(kActDim));
}

std::vector<double> corrective_series(const std::vector<ActionVector>& unperturbed,
                                      const std::vector<ActionVector>& perturbed) {
  const std::size_t n = std::min(unperturbed.size(), perturbed.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = corrective_action(unperturbed[i], perturbed[i]);
  return out;
}

WindowStats window_stats(const std::vector<double>& series, int onset, int window) {
  if (onset < 0 || window < 1) throw std::invalid_argument("window_stats: bad onset or window");
  if (static_cast<std::size_t>(onset) + static_cast<std::size_t>(window) > series.size())
    throw std::out_of_range("window_stats: window [" + std::to_string(onset) + ", " +
                            std::to_string(onset + window) + ") exceeds series length " +
                            std::to_string(series.size()));
  std::vector<double> w(series.begin() + onset, series.begin() + onset + window);
  WindowStats s;
  s.mean = std::accumulate(w.begin(), w.end(), 0.0) / window;
  s.max = *std::max_element(w.begin(), w.end());
  s.median = median_of(std::move(w));
  return s;
}

std::vector<CorrectiveGroup> corrective_table(const std::vector<CorrectiveTrial>& trials, int onset,
                                              int window) {
  if (onset < 0 || window < 1) throw std::invalid_argument("corrective_table: bad onset or window");
  std::map<std::pair<int, int>, std::pair<long, std::vector<double>>> groups;
  for (const auto& t : trials) {
    const int a = outcome_category(t.from), b = outcome_category(t.to);
    const int end = std::min<int>(onset + window, static_cast<int>(t.series.size()));
    if (end <= onset) continue;
    auto& g = groups[{a, b}];
    ++g.first;
    g.second.insert(g.second.end(), t.series.begin() + onset, t.series.begin() + end);
  }
  std::vector<CorrectiveGroup> out;
  for (auto& [key, g] : groups) {
    CorrectiveGroup c;
    c.transition = std::string(kCategoryNames[key.first]) + " -> " + kCategoryNames[key.second];
    c.trials = g.first;
    c.mean = std::accumulate(g.second.begin(), g.second.end(), 0.0) / g.second.size();
    c.max = *std::max_element(g.second.begin(), g.second.end());
    c.median = median_of(g.second);
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

const std::vector<std::string>& correlation_variables() {
  static const std::vector<std::string> v = {"box_x", "box_y", "box_z", "mass",
                                             "success", "slip", "tip", "length"};
  return v;
}

std::vector<double> correlation_column(const std::vector<EpisodeRecord>& records,
                                       const std::string& variable) {
  std::vector<double> c;
  c.reserve(records.size());
  for (const auto& r : records) {
    if (variable == "box_x") c.push_back(r.box.size.x());
    else if (variable == "box_y") c.push_back(r.box.size.y());
    else if (variable == "box_z") c.push_back(r.box.size.z());
    else if (variable == "mass") c.push_back(r.box.mass);
    else if (variable == "success") c.push_back(r.outcome == Outcome::Lift ? 1.0 : 0.0);
    else if (variable == "slip") c.push_back(r.outcome == Outcome::Slip ? 1.0 : 0.0);
    else if (variable == "tip") c.push_back(r.outcome == Outcome::Tip ? 1.0 : 0.0);
    else if (variable == "length") c.push_back(r.length);
    else throw std::invalid_argument("unknown correlation variable '" + variable + "'");
  }
  return c;
}

CorrelationMatrix correlation_matrix(const std::vector<EpisodeRecord>& records,
                                     const std::vector<std::string>& variables) {
  if (records.size() < 3) throw std::invalid_argument("correlation_matrix: need at least 3 records");
  CorrelationMatrix m;
  m.variables = variables;
  std::vector<std::vector<double>> cols;
  for (const auto& v : variables) cols.push_back(correlation_column(records, v));
  const std::size_t n = variables.size();
  m.rho.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      try {
        const double r = i == j ? (spearman(cols[i], cols[i]), 1.0) : spearman(cols[i], cols[j]);
        m.rho[i][j] = m.rho[j][i] = r;
      } catch (const StatisticsError&) {
      }
    }
  return m;
}

// ---------------------------------------------------------------------------------------------

double OutcomeSummary::success_rate() const { return episodes ? double(success) / episodes : 0.0; }
double OutcomeSummary::slip_rate() const { return episodes ? double(slip) / episodes : 0.0; }
double OutcomeSummary::tip_rate() const { return episodes ? double(tip) / episodes : 0.0; }

OutcomeSummary summarize(const std::vector<EpisodeRecord>& records) {
  OutcomeSummary s;
  for (const auto& r : records) {
    ++s.episodes;
    switch (r.outcome) {
      case Outcome::Lift: ++s.success; break;
      case Outcome::Slip: ++s.slip; break;
      case Outcome::Tip: ++s.tip; break;
      default: ++s.error; break;
    }
  }
  return s;
}

void write_summary_csv(std::ostream& out, const OutcomeSummary& s) {
  out << "episodes,success,slip,tip,error,success_rate,slip_rate,tip_rate\n";
  out << s.episodes << ',' << s.success << ',' << s.slip << ',' << s.tip << ',' << s.error << ',';
  put_double(out, s.success_rate());
  out << ',';
  put_double(out, s.slip_rate());
  out << ',';
  put_double(out, s.tip_rate());
  out << '\n';
}

void write_transition_csv(std::ostream& out, const TransitionMatrix& t, const StuartMaxwellResult& sm) {
  out << "outcome,Success,Slip,Tip,Total\n";
  const auto rows = t.row_totals(), cols = t.col_totals();
  for (int i = 0; i < 3; ++i)
    out << kCategoryNames[i] << ',' << t.counts[i][0] << ',' << t.counts[i][1] << ',' << t.counts[i][2]
        << ',' << rows[i] << '\n';
  out << "Total," << cols[0] << ',' << cols[1] << ',' << cols[2] << ',' << t.total() << '\n';
  out << "chi2,";
  put_double(out, sm.chi2);
  out << "\ndof," << sm.dof << "\np,";
  put_double(out, sm.p);
  out << '\n';
}

void write_corrective_csv(std::ostream& out, const std::vector<CorrectiveGroup>& groups) {
  out << "transition,trials,mean_pct,median_pct,max_pct\n";
  for (const auto& g : groups) {
    out << g.transition << ',' << g.trials << ',';
    put_double(out, g.mean);
    out << ',';
    put_double(out, g.median);
    out << ',';
    put_double(out, g.max);
    out << '\n';
  }
}

void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m) {
  out << "variable";
  for (const auto& v : m.variables) out << ',' << v;
  out << '\n';
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    out << m.variables[i];
    for (std::size_t j = 0; j < m.variables.size(); ++j) {
      out << ',';
      if (m.rho[i][j])
        put_double(out, *m.rho[i][j]);
      else
        out << "undefined";
    }
    out << '\n';
  }
}

void write_records_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << "index,box_x,box_y,box_z,mass,offset_x,yaw,perturbed,outcome,length,reward\n";
  for (const auto& r : records) {
    out << r.index;
    for (double v : {r.box.size.x(), r.box.size.y(), r.box.size.z(), r.box.mass, r.offset_x, r.yaw}) {
      out << ',';
      put_double(out, v);
    }
    out << ',' << (r.perturbed ? 1 : 0) << ',' << outcome_name(r.outcome) << ',' << r.length << ',';
    put_double(out, r.total_reward);
    out << '\n';
  }
}

std::vector<EpisodeRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,box_x", 0) != 0)
    throw std::runtime_error("episode records: missing header");
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 11) throw std::runtime_error("episode records: expected 11 fields in '" + line + "'");
    EpisodeRecord r;
    r.index = static_cast<int>(get_double(f[0], "episode records"));
    r.box.size = Vec3(get_double(f[1], "episode records"), get_double(f[2], "episode records"),
                      get_double(f[3], "episode records"));
    r.box.mass = get_double(f[4], "episode records");
    r.offset_x = get_double(f[5], "episode records");
    r.yaw = get_double(f[6], "episode records");
    r.perturbed = f[7] == "1";
    r.outcome = parse_outcome(f[8]);
    r.length = static_cast<int>(get_double(f[9], "episode records"));
    r.total_reward = get_double(f[10], "episode records");
    out.push_back(r);
  }
  return out;
}

void write_actions_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << "index,step";
  for (int i = 0; i < kActDim; ++i) out << ",a" << i;
  out << '\n';
  for (const auto& r : records)
    for (std::size_t s = 0; s < r.actions.size(); ++s) {
      out << r.index << ',' << s;
      for (double v : r.actions[s]) {
        out << ',';
        put_double(out, v);
      }
      out << '\n';
    }
}

void read_actions_csv(std::istream& in, std::vector<EpisodeRecord>& records) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,step", 0) != 0)
    throw std::runtime_error("episode actions: missing header");
  std::map<int, EpisodeRecord*> by_index;
  for (auto& r : records) {
    r.actions.clear();
    by_index[r.index] = &r;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 2 + kActDim) throw std::runtime_error("episode actions: bad row '" + line + "'");
    const int idx = static_cast<int>(get_double(f[0], "episode actions"));
    const auto it = by_index.find(idx);
    if (it == by_index.end()) throw std::runtime_error("episode actions: unknown episode " + f[0]);
    ActionVector a;
    for (int i = 0; i < kActDim; ++i) a[i] = get_double(f[2 + i], "episode actions");
    it->second->actions.push_back(a);
  }
}

}  // namespace softchain
