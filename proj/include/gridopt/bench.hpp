#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridopt/ipm.hpp"
#include "gridopt/opf.hpp"

namespace gridopt {

struct RunRecord {
  std::string solver_id;
  std::string problem_id;
  bool success = false;
  double time_s = 0;
  double iters = 0;
  double memory_bytes = 0;
  std::optional<double> objective;  // $/h, set on success
};

enum class Metric { Time, Iters, Memory };

/// "time", "iters" or "memory"; throws Error{UnknownMetric}.
Metric parse_metric(std::string_view name);
std::string to_string(Metric metric);

/// The statistic θ of a record; +∞ for a failed run.
double metric_value(const RunRecord& rec, Metric metric);

struct ProfileCurve {
  std::string solver_id;
  std::vector<double> alphas;
  std::vector<double> values;
};

/// `points` log-spaced values from lo to hi, endpoints exact.
std::vector<double> log_grid(double lo, double hi, int points = 200);
/// [1, 10] for time and memory, [1, 8] for iterations.
std::vector<double> default_grid(Metric metric);

/// Dolan–Moré profiles, one curve per solver sorted by id. Missing
/// (solver, problem) pairs count as failures. Throws Error{EmptyRecordSet}
/// for no records and std::invalid_argument for a duplicated pair or a grid
/// that is empty, unsorted or below 1.
std::vector<ProfileCurve> compute_profile(const std::vector<RunRecord>& records,
                                          Metric metric,
                                          const std::vector<double>& alphas);

/// Sorts by (solver_id, problem_id).
void canonical_sort(std::vector<RunRecord>& records);

// runs.csv: solver_id,problem_id,success,time_s,iters,memory_bytes,objective
void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& in);

// profile.csv: solver_id,alpha,p
void write_profile_csv(std::ostream& out, const std::vector<ProfileCurve>& curves);
void write_profile_svg(std::ostream& out, const std::vector<ProfileCurve>& curves,
                       Metric metric);

/// File variants; Error{EmptyRecordSet} on empty input (nothing written),
/// Error{IoFailure} when the file cannot be opened or written.
void emit_records(const std::filesystem::path& path,
                  const std::vector<RunRecord>& records);
std::vector<RunRecord> load_records(const std::filesystem::path& path);
void emit_profile(const std::filesystem::path& csv_path,
                  const std::vector<ProfileCurve>& curves);
void emit_profile_svg(const std::filesystem::path& svg_path,
                      const std::vector<ProfileCurve>& curves, Metric metric);

/// One named option set. mu0 left unset follows the start mode.
struct OptionSet {
  std::string name;
  SolveOptions options;
  bool mu0_given = false;
};

/// Suite file (TOML):
///
///   cases = ["case9.m", "case14.m"]     # relative to the suite file
///   formulations = ["polar-power", "cart-current"]
///   starts = ["mpc", "flat", "pf"]
///   time_limit = 600.0                  # seconds per run, optional
///
///   [options.default]
///   [options.fm]
///   mu_rule = "fm"
///   step_control = false
///
/// Option keys: tol, max_iter, xi, mu0, mu_rule (sigma|fm), sigma, kappa,
/// theta, step_control, bound_shift, obj_scale. Without [options.*] tables a
/// single set named "default" is used.
struct SuiteSpec {
  std::vector<std::filesystem::path> cases;
  std::vector<Formulation> formulations;
  std::vector<StartMode> starts;
  std::vector<OptionSet> option_sets;
  double time_limit = std::numeric_limits<double>::infinity();
};

/// Throws Error{SuiteSpecError}.
SuiteSpec parse_suite(std::string_view toml_text,
                      const std::filesystem::path& base_dir = {});
SuiteSpec load_suite(const std::filesystem::path& path);

/// solver_id = "<formulation>/<option set>", problem_id = "<case>/<start>".
/// Every combination is solved once; failures are recorded, never thrown.
/// Throws Error{SuiteSpecError} up front for a case that does not load.
std::vector<RunRecord> run_suite(const SuiteSpec& spec, int jobs = 1);

}  // namespace gridopt
