#include <cmath>
#include <complex>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gridopt/bench.hpp"
#include "gridopt/case_io.hpp"
#include "gridopt/error.hpp"
#include "gridopt/ipm.hpp"
#include "gridopt/network.hpp"
#include "gridopt/opf.hpp"

using namespace gridopt;
using json = nlohmann::ordered_json;

namespace {

struct SolveArgs {
  std::string case_path;
  std::string formulation = "polar-power";
  std::string start = "mpc";
  double tol = 1e-4;
  int max_iter = 500;
  std::string mu_rule = "sigma";
  double mu0 = 0;  // 0: by start mode
  double obj_scale = 1;
  double time_limit = 0;  // 0: none
  bool no_step_control = false;
  bool verbose = false;
  std::string out;
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json solution_json(const OpfProblem& prob, const SolveResult& r) {
  const Network& net = prob.network();
  const VarLayout& lay = prob.layout();
  const CVec v = prob.voltage(r.x);
  json buses = json::array();
  for (Index i = 0; i < net.n_bus(); ++i)
    buses.push_back({{"id", std::llround(net.buses[static_cast<std::size_t>(i)].id)},
                     {"vm", std::abs(v(i))},
                     {"va_deg", std::arg(v(i)) * 180.0 / std::numbers::pi}});
  json gens = json::array();
  for (Index k = 0; k < net.n_gen(); ++k) {
    const Generator& g = net.gens[static_cast<std::size_t>(k)];
    gens.push_back({{"row", g.source_row},
                    {"bus", std::llround(net.buses[static_cast<std::size_t>(g.bus)].id)},
                    {"pg_mw", r.x(lay.pg() + k) * net.base_mva},
                    {"qg_mvar", r.x(lay.qg() + k) * net.base_mva}});
  }
  return {{"bus", buses}, {"gen", gens}};
}

int run_solve(const SolveArgs& a) {
  const Formulation form = Formulation::parse(a.formulation);
  const StartMode start = parse_start_mode(a.start);
  auto net = std::make_shared<const Network>(build_network(load_case(a.case_path)));
  const OpfProblem prob = build_nlp(net, form);

  SolveOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.mu_rule = a.mu_rule == "fm" ? MuRule::MonotoneFM : MuRule::ScaledComplementarity;
  opts.mu0 = a.mu0 > 0 ? a.mu0 : default_mu0(start == StartMode::Flat);
  opts.obj_scale = a.obj_scale;
  if (a.time_limit > 0) opts.time_limit = a.time_limit;
  opts.step_control = !a.no_step_control;
  opts.verbose = a.verbose;
  opts.log = &std::cout;

  const Vec x0 = initial_guess(prob, start);
  const SolveResult r = ipm_solve(prob, x0, opts);

  json out = {
      {"case", net->name},
      {"formulation", form.name()},
      {"start", to_string(start)},
      {"status", to_string(r.status)},
      {"message", r.message},
      {"objective", number_or_null(r.f)},
      {"iterations", r.iterations},
      {"kkt",
       {{"feascond", r.kkt.feas},
        {"gradcond", r.kkt.grad},
        {"compcond", r.kkt.comp},
        {"costcond", r.kkt.cost}}},
      {"time_s", r.wall_time},
      {"peak_memory_bytes", r.peak_mem},
      {"factorizations", r.factorization_count},
      {"nvar", prob.n()},
      {"n_eq", prob.m_eq()},
      {"n_ineq", prob.m_ineq()},
  };
  if (r.x.size() == prob.n()) out["solution"] = solution_json(prob, r);

  std::ofstream f(a.out);
  if (!f) throw Error(ErrorCode::IoFailure, fmt::format("cannot open {}", a.out));
  f << out.dump(2) << '\n';
  if (!f) throw Error(ErrorCode::IoFailure, fmt::format("cannot write {}", a.out));

  std::cerr << fmt::format("{} {} {}: {} after {} iterations, f = {}\n", net->name,
                           form.name(), to_string(start), to_string(r.status),
                           r.iterations, r.f);
  return r.status == SolveStatus::Optimal ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC optimal power flow with a primal-dual interior point solver"};
  app.require_subcommand(1);

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand("solve", "Solve one OPF instance");
  solve->add_option("--case", sa.case_path, "MATPOWER .m or .json case file")
      ->required()
      ->check(CLI::ExistingFile);
  solve->add_option("--formulation", sa.formulation)
      ->check(CLI::IsMember({"polar-power", "polar-current", "cart-power", "cart-current"}))
      ->capture_default_str();
  solve->add_option("--start", sa.start)
      ->check(CLI::IsMember({"flat", "mpc", "pf"}))
      ->capture_default_str();
  solve->add_option("--tol", sa.tol)->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--max-iter", sa.max_iter)->check(CLI::NonNegativeNumber)->capture_default_str();
  solve->add_option("--mu-rule", sa.mu_rule)
      ->check(CLI::IsMember({"sigma", "fm"}))
      ->capture_default_str();
  solve->add_option("--mu0", sa.mu0, "initial barrier parameter (default: 1 for flat, 1e-2 otherwise)")
      ->check(CLI::PositiveNumber);
  solve->add_option("--obj-scale", sa.obj_scale, "objective multiplier used inside the solver")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  solve->add_option("--time-limit", sa.time_limit, "seconds")->check(CLI::PositiveNumber);
  solve->add_flag("--no-step-control", sa.no_step_control);
  solve->add_flag("--verbose", sa.verbose, "print the iteration log");
  solve->add_option("--out", sa.out, "result JSON")->required();

  std::string suite_path, runs_out;
  int jobs = 1;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--suite", suite_path, "suite TOML")->required()->check(CLI::ExistingFile);
  bench->add_option("--jobs", jobs)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--out", runs_out, "runs CSV")->required();

  std::string runs_in, metric_name = "time", profile_out, svg_out;
  CLI::App* profile = app.add_subcommand("profile", "Compute performance profiles");
  profile->add_option("--runs", runs_in, "runs CSV")->required()->check(CLI::ExistingFile);
  profile->add_option("--metric", metric_name)
      ->check(CLI::IsMember({"time", "iters", "memory"}))
      ->capture_default_str();
  profile->add_option("--out", profile_out, "profile CSV")->required();
  profile->add_option("--svg", svg_out, "step plot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return run_solve(sa);
    if (*bench) {
      const SuiteSpec spec = load_suite(suite_path);
      const auto recs = run_suite(spec, jobs);
      emit_records(runs_out, recs);
      int ok = 0;
      for (const auto& r : recs) ok += r.success;
      std::cerr << fmt::format("{} runs, {} successful\n", recs.size(), ok);
      return 0;
    }
    if (*profile) {
      const Metric metric = parse_metric(metric_name);
      const auto curves = compute_profile(load_records(runs_in), metric, default_grid(metric));
      emit_profile(profile_out, curves);
      if (!svg_out.empty()) emit_profile_svg(svg_out, curves, metric);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "gridopt: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
