#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace gridopt {

/// Raw case tables exactly as read from a MATPOWER-style case file. One
/// matrix row per record; columns beyond the documented schema are kept.
struct CaseData {
  std::string name;
  double base_mva = 100.0;
  Eigen::MatrixXd bus;
  Eigen::MatrixXd gen;
  Eigen::MatrixXd branch;
  Eigen::MatrixXd gencost;  // 0x0 when the case has no cost table

  friend bool operator==(const CaseData& a, const CaseData& b);
};

// Minimum column counts of the tables.
inline constexpr Eigen::Index kBusColumns = 13;
inline constexpr Eigen::Index kGenColumns = 10;
inline constexpr Eigen::Index kBranchColumns = 13;
inline constexpr Eigen::Index kGencostColumns = 4;

// Bus columns (0-based).
namespace bus_col {
inline constexpr int BUS_I = 0, BUS_TYPE = 1, PD = 2, QD = 3, GS = 4, BS = 5,
                     AREA = 6, VM = 7, VA = 8, BASE_KV = 9, ZONE = 10,
                     VMAX = 11, VMIN = 12;
}
// Generator columns (0-based).
namespace gen_col {
inline constexpr int GEN_BUS = 0, PG = 1, QG = 2, QMAX = 3, QMIN = 4, VG = 5,
                     MBASE = 6, GEN_STATUS = 7, PMAX = 8, PMIN = 9;
}
// Branch columns (0-based).
namespace branch_col {
inline constexpr int F_BUS = 0, T_BUS = 1, BR_R = 2, BR_X = 3, BR_B = 4,
                     RATE_A = 5, RATE_B = 6, RATE_C = 7, TAP = 8, SHIFT = 9,
                     BR_STATUS = 10, ANGMIN = 11, ANGMAX = 12;
}
// Generator cost columns (0-based).
namespace cost_col {
inline constexpr int MODEL = 0, STARTUP = 1, SHUTDOWN = 2, NCOST = 3, COST = 4;
}

/// Parses the `.m` case subset: `mpc.<name> = <scalar|matrix>;` assignments,
/// `%` comments, an optional `function mpc = name` header. String and cell
/// array assignments (`mpc.version = '2'`, `mpc.bus_name = {...}`) are
/// skipped. The case name must consist of letters, digits and '_'.
/// Throws Error{MalformedMatrix, MissingTable, NumericParse, InvalidCase}.
CaseData parse_case(std::string_view text);

/// Emits the `.m` subset at 17 significant digits, so that
/// parse_case(write_case(c)) == c.
std::string write_case(const CaseData& c);

/// Structured mirror format: one JSON document with keys name, baseMVA,
/// bus, gen, branch, gencost (arrays of rows).
CaseData parse_case_json(std::string_view text);
std::string write_case_json(const CaseData& c);

/// Reads `.m` or `.json` by extension. The case name defaults to the file
/// stem when the file does not declare one.
CaseData load_case(const std::filesystem::path& path);
void save_case(const std::filesystem::path& path, const CaseData& c);

}  // namespace gridopt
