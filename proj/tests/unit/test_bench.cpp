#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gridopt/bench.hpp"
#include "gridopt/error.hpp"
#include "profile_oracle.hpp"
#include "test_util.hpp"

using namespace gridopt;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no gridopt::Error thrown");
  return ErrorCode::IoFailure;
}

const ProfileCurve& curve(const std::vector<ProfileCurve>& cs, const std::string& id) {
  for (const auto& c : cs)
    if (c.solver_id == id) return c;
  throw std::runtime_error("no curve " + id);
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "gridopt_bench_test";
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream b;
  b << f.rdbuf();
  return b.str();
}

}  // namespace

TEST_CASE("metric names") {
  CHECK(parse_metric("time") == Metric::Time);
  CHECK(parse_metric("iters") == Metric::Iters);
  CHECK(parse_metric("memory") == Metric::Memory);
  CHECK(to_string(Metric::Iters) == "iters");
  CHECK(code_of([] { parse_metric("rss"); }) == ErrorCode::UnknownMetric);

  RunRecord r;
  r.success = false;
  r.iters = 7;
  CHECK(std::isinf(metric_value(r, Metric::Iters)));
  r.success = true;
  CHECK(metric_value(r, Metric::Iters) == 7);
}

TEST_CASE("alpha grids") {
  const auto g = default_grid(Metric::Time);
  REQUIRE(g.size() == 200);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 10.0);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(default_grid(Metric::Iters).back() == 8.0);
  CHECK(default_grid(Metric::Memory).back() == 10.0);
  const auto three = log_grid(1, 4, 3);
  CHECK(three[1] == doctest::Approx(2.0));
}

TEST_CASE("two-solver profile") {
  const auto recs = test::two_solver_records();
  const std::vector<double> grid{1, 2, 8};
  const auto cs = compute_profile(recs, Metric::Iters, grid);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].solver_id == "m1");
  CHECK(cs[1].solver_id == "m2");
  const auto& m1 = curve(cs, "m1").values;
  const auto& m2 = curve(cs, "m2").values;
  CHECK(m1[0] == 2.0 / 3);
  CHECK(m2[0] == 1.0 / 3);
  CHECK(m1[1] == 2.0 / 3);
  CHECK(m2[1] == 2.0 / 3);
  CHECK(m2[2] == 1.0);
  CHECK(m1[2] == 2.0 / 3);

  const auto fine = default_grid(Metric::Iters);
  const auto brute = test::brute_profile(recs, Metric::Iters, fine);
  for (const auto& c : compute_profile(recs, Metric::Iters, fine))
    CHECK(c.values == brute.at(c.solver_id));
}

TEST_CASE("single solver and all-failing solver") {
  std::vector<RunRecord> recs;
  for (int s = 0; s < 4; ++s) {
    RunRecord r;
    r.solver_id = "only";
    r.problem_id = "p" + std::to_string(s);
    r.success = true;
    r.iters = 3 + s;
    recs.push_back(r);
    r.solver_id = "broken";
    r.success = false;
    recs.push_back(r);
  }
  const auto cs = compute_profile(recs, Metric::Iters, default_grid(Metric::Iters));
  for (double v : curve(cs, "only").values) CHECK(v == 1.0);
  for (double v : curve(cs, "broken").values) CHECK(v == 0.0);
}

TEST_CASE("problems nobody solved stay in the denominator") {
  auto recs = test::two_solver_records();
  RunRecord r;
  r.problem_id = "s4";
  r.solver_id = "m1";
  recs.push_back(r);
  r.solver_id = "m2";
  recs.push_back(r);
  const auto cs = compute_profile(recs, Metric::Iters, {1, 8});
  CHECK(curve(cs, "m2").values[1] == 0.75);
}

TEST_CASE("zero statistics and missing pairs") {
  std::vector<RunRecord> recs(3);
  recs[0] = {"a", "p", true, 0, 0, 0, {}};
  recs[1] = {"b", "p", true, 0, 0, 0, {}};
  recs[2] = {"a", "q", true, 1, 1, 1, {}};  // b has no record for q
  const auto cs = compute_profile(recs, Metric::Iters, {1, 2});
  CHECK(curve(cs, "a").values == std::vector<double>{1.0, 1.0});
  CHECK(curve(cs, "b").values == std::vector<double>{0.5, 0.5});
}

TEST_CASE("compute_profile errors") {
  CHECK(code_of([] { compute_profile({}, Metric::Time, {1}); }) ==
        ErrorCode::EmptyRecordSet);
  auto recs = test::two_solver_records();
  CHECK_THROWS_AS(compute_profile(recs, Metric::Time, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_profile(recs, Metric::Time, {2, 1}), std::invalid_argument);
  CHECK_THROWS_AS(compute_profile(recs, Metric::Time, {0.5, 1}), std::invalid_argument);
  recs.push_back(recs.front());
  CHECK_THROWS_AS(compute_profile(recs, Metric::Time, {1}), std::invalid_argument);
}

TEST_CASE("profile properties on random record sets") {
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Metric metrics[] = {Metric::Time, Metric::Iters, Metric::Memory};
  for (int trial = 0; trial < 1000; ++trial) {
    const auto recs = test::random_records(rng);
    const Metric metric = metrics[trial % 3];
    const auto grid = default_grid(metric);
    const auto cs = compute_profile(recs, metric, grid);
    const auto brute = test::brute_profile(recs, metric, grid);

    std::set<std::string> problems, solved;
    std::map<std::string, int> wins;
    for (const auto& r : recs) {
      problems.insert(r.problem_id);
      if (r.success) {
        solved.insert(r.problem_id);
        ++wins[r.solver_id];
      }
    }
    const double np = static_cast<double>(problems.size());

    double sum_at_one = 0;
    for (const auto& c : cs) {
      REQUIRE(c.values == brute.at(c.solver_id));
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        REQUIRE(c.values[i] >= 0.0);
        REQUIRE(c.values[i] <= 1.0);
        if (i > 0) REQUIRE(c.values[i - 1] <= c.values[i]);
      }
      REQUIRE(c.values.back() <= wins[c.solver_id] / np + 1e-15);
      sum_at_one += c.values.front();
    }
    REQUIRE(sum_at_one >= static_cast<double>(solved.size()) / np - 1e-15);

    // one problem rescaled
    auto scaled = recs;
    const std::string target = *problems.begin();
    const double factor = trial % 2 ? std::ldexp(1.0, trial % 20 - 10) : 0.01 + 100 * u(rng);
    for (auto& r : scaled)
      if (r.problem_id == target) {
        r.time_s *= factor;
        r.iters *= factor;
        r.memory_bytes *= factor;
      }
    const auto cs2 = compute_profile(scaled, metric, grid);
    for (std::size_t k = 0; k < cs.size(); ++k) REQUIRE(cs2[k].values == cs[k].values);
  }
}

TEST_CASE("success fraction at the limit") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto recs = test::random_records(rng);
    for (auto& r : recs) r.time_s = 0.5 + r.time_s;  // ratios bounded well below 1e300
    const auto cs = compute_profile(recs, Metric::Time, {1.0, 1e300});
    std::set<std::string> problems;
    std::map<std::string, int> wins;
    for (const auto& r : recs) {
      problems.insert(r.problem_id);
      wins[r.solver_id] += r.success;
    }
    for (const auto& c : cs)
      CHECK(c.values.back() == wins[c.solver_id] / static_cast<double>(problems.size()));
  }
}

TEST_CASE("runs csv") {
  std::vector<RunRecord> recs(1);
  recs[0] = {"polar-power/default", "case9/mpc", true, 0.125, 14, 123456, 5296.686202870813};
  std::ostringstream out;
  write_records_csv(out, recs);
  CHECK(out.str() ==
        "solver_id,problem_id,success,time_s,iters,memory_bytes,objective\n"
        "polar-power/default,case9/mpc,1,0.125,14,123456,5296.686202870813\n");

  recs.push_back({"a,\"b\"", "p", false, 1e-7, 500, 0, {}});
  std::ostringstream out2;
  write_records_csv(out2, recs);
  std::istringstream in(out2.str());
  const auto back = read_records_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].objective == recs[0].objective);
  CHECK(back[0].time_s == recs[0].time_s);
  CHECK(back[1].solver_id == "a,\"b\"");
  CHECK_FALSE(back[1].success);
  CHECK_FALSE(back[1].objective.has_value());
  CHECK(back[1].time_s == 1e-7);

  std::istringstream bad("solver,problem\n");
  CHECK(code_of([&] { read_records_csv(bad); }) == ErrorCode::IoFailure);
  std::istringstream short_row(
      "solver_id,problem_id,success,time_s,iters,memory_bytes,objective\na,b,1,2\n");
  CHECK(code_of([&] { read_records_csv(short_row); }) == ErrorCode::IoFailure);
}

TEST_CASE("profile csv matches compute_profile") {
  const auto cs = compute_profile(test::two_solver_records(), Metric::Iters, {1, 2, 8});
  std::ostringstream out;
  write_profile_csv(out, cs);
  CHECK(out.str() ==
        "solver_id,alpha,p\n"
        "m1,1,0.6666666666666666\n"
        "m1,2,0.6666666666666666\n"
        "m1,8,0.6666666666666666\n"
        "m2,1,0.3333333333333333\n"
        "m2,2,0.6666666666666666\n"
        "m2,8,1\n");
}

TEST_CASE("file output is deterministic") {
  const auto dir = temp_dir();
  const auto recs = test::two_solver_records();
  const auto cs = compute_profile(recs, Metric::Time, default_grid(Metric::Time));
  emit_records(dir / "a.csv", recs);
  emit_records(dir / "b.csv", recs);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(load_records(dir / "a.csv").size() == recs.size());

  emit_profile(dir / "p1.csv", cs);
  emit_profile(dir / "p2.csv", cs);
  CHECK(slurp(dir / "p1.csv") == slurp(dir / "p2.csv"));
  emit_profile_svg(dir / "p1.svg", cs, Metric::Time);
  emit_profile_svg(dir / "p2.svg", cs, Metric::Time);
  const std::string svg = slurp(dir / "p1.svg");
  CHECK(svg == slurp(dir / "p2.svg"));
  CHECK(svg.rfind("<svg", 0) == 0);
  std::size_t lines = 0;
  for (std::size_t at = 0; (at = svg.find("<polyline", at)) != std::string::npos; ++at)
    ++lines;
  CHECK(lines == 2);

  const std::vector<RunRecord> one(recs.begin(), recs.begin() + 1);
  emit_records(dir / "one.csv", one);
  const std::string text = slurp(dir / "one.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("empty inputs write nothing") {
  const auto dir = temp_dir();
  std::filesystem::remove(dir / "empty.csv");
  std::filesystem::remove(dir / "empty.svg");
  CHECK(code_of([&] { emit_records(dir / "empty.csv", {}); }) == ErrorCode::EmptyRecordSet);
  CHECK(code_of([&] { emit_profile(dir / "empty.csv", {}); }) == ErrorCode::EmptyRecordSet);
  CHECK(code_of([&] { emit_profile_svg(dir / "empty.svg", {}, Metric::Time); }) ==
        ErrorCode::EmptyRecordSet);
  CHECK_FALSE(std::filesystem::exists(dir / "empty.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "empty.svg"));
  CHECK(code_of([&] { emit_records(dir / "no/such/dir/x.csv", test::two_solver_records()); }) ==
        ErrorCode::IoFailure);
  CHECK(code_of([&] { load_records(dir / "missing.csv"); }) == ErrorCode::IoFailure);
}

TEST_CASE("canonical sort") {
  std::vector<RunRecord> recs(3);
  recs[0].solver_id = "b";
  recs[0].problem_id = "x";
  recs[1].solver_id = "a";
  recs[1].problem_id = "y";
  recs[2].solver_id = "a";
  recs[2].problem_id = "x";
  canonical_sort(recs);
  CHECK(recs[0].problem_id == "x");
  CHECK(recs[0].solver_id == "a");
  CHECK(recs[1].problem_id == "y");
  CHECK(recs[2].solver_id == "b");
}

TEST_CASE("suite parsing") {
  const std::filesystem::path base(GRIDOPT_TEST_DATA);
  const auto spec = parse_suite(R"(
cases = ["case9.m", "case14.m"]
formulations = ["polar-power", "cart-current"]
starts = ["mpc", "flat"]
time_limit = 30

[options.fm]
mu_rule = "fm"
step_control = false
max_iter = 200

[options.tight]
tol = 1e-6
mu0 = 0.5
)",
                                base);
  REQUIRE(spec.cases.size() == 2);
  CHECK(spec.cases[0] == base / "case9.m");
  CHECK(spec.formulations.size() == 2);
  CHECK(spec.starts[1] == StartMode::Flat);
  CHECK(spec.time_limit == 30);
  REQUIRE(spec.option_sets.size() == 2);
  CHECK(spec.option_sets[0].name == "fm");
  CHECK(spec.option_sets[0].options.mu_rule == MuRule::MonotoneFM);
  CHECK_FALSE(spec.option_sets[0].options.step_control);
  CHECK(spec.option_sets[0].options.max_iter == 200);
  CHECK_FALSE(spec.option_sets[0].mu0_given);
  CHECK(spec.option_sets[1].options.tol == 1e-6);
  CHECK(spec.option_sets[1].mu0_given);

  const auto plain = parse_suite(
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n", base);
  REQUIRE(plain.option_sets.size() == 1);
  CHECK(plain.option_sets[0].name == "default");
  CHECK(plain.option_sets[0].options.tol == 1e-4);
  CHECK(plain.option_sets[0].options.max_iter == 500);
  CHECK(std::isinf(plain.time_limit));

  const char* bad[] = {
      "cases = [\"nope.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-voltage\"]\nstarts = [\"mpc\"]\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"cold\"]\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n"
      "[options.x]\ntol = \"small\"\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n"
      "[options.x]\nwarm = true\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n"
      "[options.x]\nmu_rule = \"mehrotra\"\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n"
      "[options.x]\nmax_iter = -1\n",
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\nseed = 1\n",
      "cases = []\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n",
      "formulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n",
      "cases = [\"case9.m\"\n",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK(code_of([&] { parse_suite(text, base); }) == ErrorCode::SuiteSpecError);
  }
  CHECK(code_of([] { load_suite("/no/such/suite.toml"); }) == ErrorCode::SuiteSpecError);
}

TEST_CASE("suite runs") {
  const std::filesystem::path base(GRIDOPT_TEST_DATA);
  SuiteSpec spec = parse_suite(
      "cases = [\"case9.m\"]\nformulations = [\"polar-power\"]\n"
      "starts = [\"flat\", \"mpc\", \"pf\"]\n",
      base);
  const auto recs = run_suite(spec, 1);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].problem_id == "case9/flat");
  CHECK(recs[1].problem_id == "case9/mpc");
  CHECK(recs[2].problem_id == "case9/pf");
  for (const auto& r : recs) {
    CHECK(r.solver_id == "polar-power/default");
    CHECK(r.success);
    CHECK(r.iters > 0);
    CHECK(r.time_s > 0);
    CHECK(r.memory_bytes > 0);
    REQUIRE(r.objective.has_value());
    CHECK(*r.objective == doctest::Approx(5296.69).epsilon(1e-5));
  }

  const auto par = run_suite(spec, 3);
  REQUIRE(par.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(par[i].problem_id == recs[i].problem_id);
    CHECK(par[i].iters == recs[i].iters);
    CHECK(par[i].objective == recs[i].objective);
  }

  spec.option_sets[0].options.max_iter = 2;
  spec.option_sets[0].name = "short";
  const auto cut = run_suite(spec, 2);
  REQUIRE(cut.size() == 3);
  for (const auto& r : cut) {
    CHECK_FALSE(r.success);
    CHECK(r.iters == 2);
    CHECK_FALSE(r.objective.has_value());
    CHECK(std::isinf(metric_value(r, Metric::Iters)));
  }
}

TEST_CASE("suite with a case that does not load") {
  const auto dir = temp_dir();
  {
    std::ofstream f(dir / "broken.m");
    f << "function mpc = broken\nmpc.baseMVA = 100;\n";
  }
  const SuiteSpec spec = parse_suite(
      "cases = [\"broken.m\"]\nformulations = [\"polar-power\"]\nstarts = [\"mpc\"]\n", dir);
  CHECK(code_of([&] { run_suite(spec); }) == ErrorCode::SuiteSpecError);
}
