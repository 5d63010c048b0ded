#pragma once

#include <softchain/env.hpp>

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace softchain {

/// Raised for statistics that are undefined on the given data.
class StatisticsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rank correlation with average ranks for ties. Throws StatisticsError for a constant input.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Average ranks (1-based).
std::vector<double> average_ranks(const std::vector<double>& x);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, int dof);

/// Category order used everywhere: Success (Lift), Slip, Tip.
int outcome_category(Outcome o);
inline constexpr std::array<const char*, 3> kCategoryNames = {"Success", "Slip", "Tip"};

struct TransitionMatrix {
  std::array<std::array<long, 3>, 3> counts{};  // rows: condition A, cols: condition B

  std::array<long, 3> row_totals() const;
  std::array<long, 3> col_totals() const;
  long total() const;
};

/// Pairs outcome_a[i] with outcome_b[i]. Throws on length mismatch or an outcome outside
/// {Lift, Slip, Tip}.
TransitionMatrix build_transition_matrix(const std::vector<Outcome>& a, const std::vector<Outcome>& b);
TransitionMatrix build_transition_matrix(const std::vector<EpisodeRecord>& a,
                                         const std::vector<EpisodeRecord>& b);

struct StuartMaxwellResult {
  double chi2 = 0.0;
  int dof = 0;
  double p = 1.0;
};

/// Marginal homogeneity test. A singular covariance falls back to the pseudo-inverse with
/// dof = rank.
StuartMaxwellResult stuart_maxwell(const TransitionMatrix& t);

/// 100 ||a_u - a_p|| / sqrt(13).
double corrective_action(const ActionVector& unperturbed, const ActionVector& perturbed);
/// Per-step corrective action over the common prefix of two action trajectories.
std::vector<double> corrective_series(const std::vector<ActionVector>& unperturbed,
                                      const std::vector<ActionVector>& perturbed);

struct WindowStats {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

/// Statistics over series[onset, onset + window). Throws std::out_of_range when the window
/// runs past the series.
WindowStats window_stats(const std::vector<double>& series, int onset, int window = 100);

/// One trial of the corrective-action analysis: its outcome transition and per-step series.
struct CorrectiveTrial {
  Outcome from = Outcome::None;
  Outcome to = Outcome::None;
  std::vector<double> series;
};

struct CorrectiveGroup {
  std::string transition;  // e.g. "Slip -> Tip"
  long trials = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

/// Groups trials by transition and pools every in-window sample of a group. Trials whose
/// series ends before onset + window contribute the steps they have; trials ending before
/// onset are skipped.
std::vector<CorrectiveGroup> corrective_table(const std::vector<CorrectiveTrial>& trials, int onset,
                                              int window = 100);

/// Correlation variables: box_x, box_y, box_z, mass, success, slip, tip, length.
const std::vector<std::string>& correlation_variables();
std::vector<double> correlation_column(const std::vector<EpisodeRecord>& records,
                                       const std::string& variable);

/// Pairwise rank correlations; an entry is empty when either column is constant.
struct CorrelationMatrix {
  std::vector<std::string> variables;
  std::vector<std::vector<std::optional<double>>> rho;
};

CorrelationMatrix correlation_matrix(const std::vector<EpisodeRecord>& records,
                                     const std::vector<std::string>& variables);

struct OutcomeSummary {
  long episodes = 0;
  long success = 0;
  long slip = 0;
  long tip = 0;
  long error = 0;
  double success_rate() const;
  double slip_rate() const;
  double tip_rate() const;
};

OutcomeSummary summarize(const std::vector<EpisodeRecord>& records);

void write_summary_csv(std::ostream& out, const OutcomeSummary& s);
void write_transition_csv(std::ostream& out, const TransitionMatrix& t, const StuartMaxwellResult& sm);
void write_corrective_csv(std::ostream& out, const std::vector<CorrectiveGroup>& groups);
void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m);

/// Episode record table: index, box, placement, outcome, length, reward, then the actions
/// flattened one step per row in a companion file.
void write_records_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_records_csv(std::istream& in);
void write_actions_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);
/// Fills the action trajectories of `records` (matched by index).
void read_actions_csv(std::istream& in, std::vector<EpisodeRecord>& records);

}  // namespace softchain
