#include <softchain/analytics.hpp>

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace softchain;

namespace {

TransitionMatrix table(std::array<std::array<long, 3>, 3> c) {
  TransitionMatrix t;
  t.counts = c;
  return t;
}

const TransitionMatrix kUnperturbed = table({{{922, 6, 3}, {13, 27, 10}, {6, 1, 12}}});
const TransitionMatrix kPerturbed = table({{{815, 2, 5}, {20, 44, 48}, {15, 4, 47}}});

// Closed-form 3x3 marginal homogeneity statistic (Fleiss-Everitt).
double stuart_maxwell_3x3(const TransitionMatrix& t) {
  const auto r = t.row_totals();
  const auto c = t.col_totals();
  const double d1 = r[0] - c[0], d2 = r[1] - c[1], d3 = r[2] - c[2];
  const double n12 = 0.5 * (t.counts[0][1] + t.counts[1][0]);
  const double n13 = 0.5 * (t.counts[0][2] + t.counts[2][0]);
  const double n23 = 0.5 * (t.counts[1][2] + t.counts[2][1]);
  return (n23 * d1 * d1 + n13 * d2 * d2 + n12 * d3 * d3) / (2.0 * (n12 * n13 + n12 * n23 + n13 * n23));
}

// O(n^2) ranks: 1 + (#smaller) + (#equal - 1) / 2.
std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

EpisodeRecord record(int index, Outcome o, double mass, int length) {
  EpisodeRecord r;
  r.index = index;
  r.outcome = o;
  r.box.mass = mass;
  r.box.size = Vec3(0.2 + 0.01 * index, 0.3 + 0.02 * ((index * 7) % 11), 0.5 + 0.03 * ((index * 5) % 13));
  r.length = length;
  r.offset_x = 0.01 * index;
  r.yaw = -0.1 * index;
  r.total_reward = 0.25 * index;
  return r;
}

}  // namespace

TEST_CASE("transition marginals") {
  CHECK(kUnperturbed.row_totals() == std::array<long, 3>{931, 50, 19});
  CHECK(kUnperturbed.col_totals() == std::array<long, 3>{941, 34, 25});
  CHECK(kPerturbed.row_totals() == std::array<long, 3>{822, 112, 66});
  CHECK(kPerturbed.col_totals() == std::array<long, 3>{850, 50, 100});
  CHECK(kUnperturbed.total() == 1000);
  CHECK(kPerturbed.total() == 1000);
}

TEST_CASE("stuart-maxwell against the closed form") {
  for (const auto& t : {kUnperturbed, kPerturbed}) {
    const StuartMaxwellResult r = stuart_maxwell(t);
    const double chi2 = stuart_maxwell_3x3(t);
    CHECK(r.dof == 2);
    CHECK(r.chi2 == doctest::Approx(chi2).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(std::exp(-0.5 * chi2)).epsilon(1e-10));
  }
  // Hand-evaluated: 2044 / 239.5 and 54.53.
  CHECK(stuart_maxwell(kUnperturbed).chi2 == doctest::Approx(2044.0 / 239.5).epsilon(1e-12));
  CHECK(stuart_maxwell(kUnperturbed).p == doctest::Approx(0.01402).epsilon(1e-3));
  CHECK(stuart_maxwell(kPerturbed).p == doctest::Approx(1.45e-12).epsilon(0.01));
}

TEST_CASE("stuart-maxwell degenerate tables") {
  // Symmetric table: no marginal difference.
  const auto sym = stuart_maxwell(table({{{5, 3, 2}, {3, 4, 1}, {2, 1, 6}}}));
  CHECK(sym.chi2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sym.p == doctest::Approx(1.0));
  // Only Success/Slip discordant: covariance is rank 1.
  const auto r1 = stuart_maxwell(table({{{10, 4, 0}, {1, 5, 0}, {0, 0, 3}}}));
  CHECK(r1.dof == 1);
  CHECK(r1.chi2 == doctest::Approx(9.0 / 5.0).epsilon(1e-12));  // McNemar on the 2x2 block
  // No discordant pairs at all.
  const auto none = stuart_maxwell(table({{{10, 0, 0}, {0, 5, 0}, {0, 0, 3}}}));
  CHECK(none.dof == 0);
  CHECK(none.p == 1.0);
}

TEST_CASE("chi-square survival") {
  for (double x : {0.1, 1.0, 4.0, 8.5, 30.0, 54.5, 120.0}) {
    CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
    CHECK(chi_square_sf(x, 4) == doctest::Approx(std::exp(-x / 2) * (1 + x / 2)).epsilon(1e-12));
    CHECK(chi_square_sf(x, 1) == doctest::Approx(std::erfc(std::sqrt(x / 2))).epsilon(1e-10));
  }
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_sf(0.0, 3) == 1.0);
  CHECK(gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
  CHECK_THROWS(chi_square_sf(1.0, 0));
  CHECK(chi_square_sf(-1.0, 2) == 1.0);
}

TEST_CASE("spearman matches pearson on naive ranks") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = trial % 2 ? small(rng) : normal(rng);  // ties on odd trials
      y[i] = 0.5 * x[i] + (trial % 3 ? small(rng) : normal(rng));
    }
    CHECK(average_ranks(x) == naive_ranks(x));
    CHECK(spearman(x, y) == doctest::Approx(pearson(naive_ranks(x), naive_ranks(y))).epsilon(1e-12));
  }
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), StatisticsError);
  CHECK_THROWS(spearman({1, 2}, {1, 2, 3}));
}

TEST_CASE("corrective action normalizer") {
  const ActionVector zero{};
  ActionVector unit{};
  unit[4] = 1.0;
  ActionVector ones;
  ones.fill(1.0);
  CHECK(corrective_action(zero, unit) == doctest::Approx(100.0 / std::sqrt(13.0)).epsilon(1e-14));
  CHECK(corrective_action(zero, unit) == doctest::Approx(27.735).epsilon(1e-4));
  CHECK(corrective_action(zero, ones) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(corrective_action(ones, ones) == 0.0);

  const std::vector<ActionVector> a(5, zero), b(3, unit);
  const auto s = corrective_series(a, b);
  REQUIRE(s.size() == 3);
  CHECK(s[2] == doctest::Approx(27.735).epsilon(1e-4));
}

TEST_CASE("window statistics") {
  std::vector<double> s(300, 0.0);
  for (int i = 0; i < 100; ++i) s[160 + i] = i;  // 0..99 inside the window
  const WindowStats w = window_stats(s, 160, 100);
  CHECK(w.mean == doctest::Approx(49.5));
  CHECK(w.median == doctest::Approx(49.5));
  CHECK(w.max == 99.0);
  CHECK_THROWS_AS(window_stats(s, 250, 100), std::out_of_range);
  CHECK_THROWS_AS(window_stats(s, -1, 10), std::invalid_argument);
}

TEST_CASE("corrective table schema on synthetic logs") {
  std::vector<CorrectiveTrial> trials;
  auto trial = [](Outcome from, Outcome to, int length, double level) {
    CorrectiveTrial t{from, to, std::vector<double>(static_cast<std::size_t>(length), 0.0)};
    for (int i = 10; i < length; ++i) t.series[static_cast<std::size_t>(i)] = level * (i - 9);
    return t;
  };
  trials.push_back(trial(Outcome::Lift, Outcome::Lift, 40, 1.0));
  trials.push_back(trial(Outcome::Lift, Outcome::Lift, 40, 2.0));
  trials.push_back(trial(Outcome::Slip, Outcome::Tip, 15, 3.0));  // ends inside the window
  trials.push_back(trial(Outcome::Tip, Outcome::Lift, 5, 1.0));   // ends before onset
  const auto groups = corrective_table(trials, 10, 20);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].transition == "Success -> Success");
  CHECK(groups[0].trials == 2);
  // Pooled samples {1..20} and {2..40 step 2}.
  CHECK(groups[0].mean == doctest::Approx((210.0 + 420.0) / 40.0));
  CHECK(groups[0].max == 40.0);
  CHECK(groups[0].median == doctest::Approx(14.0));  // 19 samples <= 13, 21 samples <= 14
  CHECK(groups[1].transition == "Slip -> Tip");
  CHECK(groups[1].trials == 1);
  CHECK(groups[1].mean == doctest::Approx(9.0));  // 3, 6, 9, 12, 15
  CHECK(groups[1].max == 15.0);

  std::ostringstream out;
  write_corrective_csv(out, groups);
  CHECK(out.str().rfind("transition,trials,mean_pct,median_pct,max_pct\n", 0) == 0);
}

TEST_CASE("transition matrix from outcomes") {
  const std::vector<Outcome> a{Outcome::Lift, Outcome::Slip, Outcome::Tip, Outcome::Lift};
  const std::vector<Outcome> b{Outcome::Lift, Outcome::Tip, Outcome::Tip, Outcome::Slip};
  const TransitionMatrix t = build_transition_matrix(a, b);
  CHECK(t.counts[0][0] == 1);
  CHECK(t.counts[0][1] == 1);
  CHECK(t.counts[1][2] == 1);
  CHECK(t.counts[2][2] == 1);
  CHECK_THROWS(build_transition_matrix(a, std::vector<Outcome>{Outcome::Lift}));
  CHECK_THROWS(build_transition_matrix(std::vector<Outcome>{Outcome::Error}, std::vector<Outcome>{Outcome::Lift}));
  CHECK(outcome_category(Outcome::Lift) == 0);
  CHECK(outcome_category(Outcome::Slip) == 1);
  CHECK(outcome_category(Outcome::Tip) == 2);
}

TEST_CASE("correlation matrix and summary") {
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < 30; ++i)
    recs.push_back(record(i, i % 3 == 0 ? Outcome::Tip : Outcome::Lift, 0.5 + 0.3 * i, 100 + 7 * i));
  const CorrelationMatrix m = correlation_matrix(recs, correlation_variables());
  REQUIRE(m.variables.size() == 8);
  const auto idx = [&](const std::string& v) {
    return static_cast<std::size_t>(std::find(m.variables.begin(), m.variables.end(), v) - m.variables.begin());
  };
  CHECK(*m.rho[idx("mass")][idx("length")] == doctest::Approx(1.0));
  CHECK(*m.rho[idx("success")][idx("tip")] == doctest::Approx(-1.0));
  CHECK_FALSE(m.rho[idx("slip")][idx("mass")].has_value());  // no slips: constant column
  CHECK(*m.rho[idx("box_x")][idx("box_x")] == doctest::Approx(1.0));

  const OutcomeSummary s = summarize(recs);
  CHECK(s.episodes == 30);
  CHECK(s.tip == 10);
  CHECK(s.success == 20);
  CHECK(s.success_rate() + s.slip_rate() + s.tip_rate() == doctest::Approx(1.0));
}

TEST_CASE("record and action csv round trip") {
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < 4; ++i) {
    EpisodeRecord r = record(i, i == 2 ? Outcome::Slip : Outcome::Lift, 1.0 / 3.0 + i, 10 + i);
    r.perturbed = i % 2;
    for (int k = 0; k < 3 + i; ++k) {
      ActionVector a;
      for (int j = 0; j < kActDim; ++j) a[j] = std::sin(0.1 * (k * 13 + j)) / 3.0;
      r.actions.push_back(a);
    }
    recs.push_back(r);
  }
  std::stringstream rs, as;
  write_records_csv(rs, recs);
  write_actions_csv(as, recs);
  auto back = read_records_csv(rs);
  read_actions_csv(as, back);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].index == recs[i].index);
    CHECK(back[i].outcome == recs[i].outcome);
    CHECK(back[i].perturbed == recs[i].perturbed);
    CHECK(back[i].box.size == recs[i].box.size);
    CHECK(back[i].box.mass == recs[i].box.mass);
    CHECK(back[i].offset_x == recs[i].offset_x);
    CHECK(back[i].yaw == recs[i].yaw);
    CHECK(back[i].length == recs[i].length);
    CHECK(back[i].total_reward == recs[i].total_reward);
    CHECK(back[i].actions == recs[i].actions);
  }
  std::stringstream bad("nonsense\n");
  CHECK_THROWS(read_records_csv(bad));
}
