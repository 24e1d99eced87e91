#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <toml.hpp>

#include "gridopt/bench.hpp"
#include "gridopt/case_io.hpp"
#include "gridopt/error.hpp"
#include "gridopt/network.hpp"

namespace gridopt {

namespace {

[[noreturn]] void spec_error(const std::string& msg) {
  throw Error(ErrorCode::SuiteSpecError, msg);
}

std::vector<std::string> string_list(const toml::table& t, const char* key) {
  const toml::node* node = t.get(key);
  if (!node) spec_error(fmt::format("missing '{}'", key));
  const toml::array* arr = node->as_array();
  if (!arr || arr->empty()) spec_error(fmt::format("'{}' must be a nonempty array", key));
  std::vector<std::string> out;
  for (const toml::node& item : *arr) {
    const auto s = item.value<std::string>();
    if (!s) spec_error(fmt::format("'{}' must hold strings", key));
    out.push_back(*s);
  }
  return out;
}

double number(const toml::node& node, const std::string& key) {
  if (const auto v = node.value<double>()) return *v;
  spec_error(fmt::format("option '{}' must be a number", key));
}

OptionSet parse_option_set(const std::string& name, const toml::table& t) {
  OptionSet set;
  set.name = name;
  SolveOptions& o = set.options;
  for (const auto& [k, node] : t) {
    const std::string key(k.str());
    if (key == "tol") {
      o.tol = number(node, key);
      if (!(o.tol > 0)) spec_error("tol must be positive");
    } else if (key == "max_iter") {
      const auto v = node.value<int64_t>();
      if (!v || *v < 0) spec_error("max_iter must be a nonnegative integer");
      o.max_iter = static_cast<int>(*v);
    } else if (key == "xi") {
      o.xi = number(node, key);
      if (!(o.xi > 0 && o.xi < 1)) spec_error("xi must lie in (0, 1)");
    } else if (key == "mu0") {
      o.mu0 = number(node, key);
      if (!(o.mu0 > 0)) spec_error("mu0 must be positive");
      set.mu0_given = true;
    } else if (key == "mu_rule") {
      const auto v = node.value<std::string>();
      if (v && *v == "sigma")
        o.mu_rule = MuRule::ScaledComplementarity;
      else if (v && *v == "fm")
        o.mu_rule = MuRule::MonotoneFM;
      else
        spec_error("mu_rule must be \"sigma\" or \"fm\"");
    } else if (key == "sigma") {
      o.sigma = number(node, key);
      if (!(o.sigma > 0 && o.sigma < 1)) spec_error("sigma must lie in (0, 1)");
    } else if (key == "kappa") {
      o.kappa = number(node, key);
    } else if (key == "theta") {
      o.theta = number(node, key);
    } else if (key == "step_control") {
      const auto v = node.value<bool>();
      if (!v) spec_error("step_control must be a boolean");
      o.step_control = *v;
    } else if (key == "bound_shift") {
      o.bound_shift = number(node, key);
    } else if (key == "obj_scale") {
      o.obj_scale = number(node, key);
      if (!(o.obj_scale > 0)) spec_error("obj_scale must be positive");
    } else {
      spec_error(fmt::format("unknown option '{}' in set '{}'", key, name));
    }
  }
  return set;
}

}  // namespace

SuiteSpec parse_suite(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    spec_error(fmt::format("TOML: {}", e.description()));
  }
  for (const auto& [k, node] : root) {
    const std::string_view key = k.str();
    if (key != "cases" && key != "formulations" && key != "starts" &&
        key != "time_limit" && key != "options")
      spec_error(fmt::format("unknown key '{}'", key));
  }

  SuiteSpec spec;
  for (const std::string& c : string_list(root, "cases")) {
    std::filesystem::path p(c);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!std::filesystem::is_regular_file(p))
      spec_error(fmt::format("unknown case path '{}'", p.string()));
    spec.cases.push_back(p);
  }
  for (const std::string& f : string_list(root, "formulations")) {
    try {
      spec.formulations.push_back(Formulation::parse(f));
    } catch (const std::exception&) {
      spec_error(fmt::format("unknown formulation '{}'", f));
    }
  }
  for (const std::string& s : string_list(root, "starts")) {
    try {
      spec.starts.push_back(parse_start_mode(s));
    } catch (const std::exception&) {
      spec_error(fmt::format("unknown start mode '{}'", s));
    }
  }
  if (const toml::node* tl = root.get("time_limit")) {
    spec.time_limit = number(*tl, "time_limit");
    if (!(spec.time_limit > 0)) spec_error("time_limit must be positive");
  }
  if (const toml::node* opts = root.get("options")) {
    const toml::table* t = opts->as_table();
    if (!t || t->empty()) spec_error("'options' must be a table of option sets");
    for (const auto& [name, node] : *t) {
      const toml::table* set = node.as_table();
      if (!set) spec_error(fmt::format("option set '{}' must be a table", name.str()));
      spec.option_sets.push_back(parse_option_set(std::string(name.str()), *set));
    }
  } else {
    spec.option_sets.push_back(OptionSet{"default", {}, false});
  }
  return spec;
}

SuiteSpec load_suite(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) spec_error(fmt::format("cannot open suite file {}", path.string()));
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_suite(buf.str(), path.parent_path());
}

std::vector<RunRecord> run_suite(const SuiteSpec& spec, int jobs) {
  std::vector<std::shared_ptr<const Network>> nets;
  for (const auto& path : spec.cases) {
    try {
      nets.push_back(std::make_shared<const Network>(build_network(load_case(path))));
    } catch (const Error& e) {
      spec_error(fmt::format("case {}: {}", path.string(), e.what()));
    }
  }

  struct Task {
    std::size_t c, f, s, o;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < spec.cases.size(); ++c)
    for (std::size_t f = 0; f < spec.formulations.size(); ++f)
      for (std::size_t s = 0; s < spec.starts.size(); ++s)
        for (std::size_t o = 0; o < spec.option_sets.size(); ++o)
          tasks.push_back({c, f, s, o});

  std::vector<RunRecord> out(tasks.size());
  auto run_one = [&](std::size_t i) {
    const Task& t = tasks[i];
    const Formulation form = spec.formulations[t.f];
    const StartMode start = spec.starts[t.s];
    const OptionSet& set = spec.option_sets[t.o];
    RunRecord& rec = out[i];
    rec.solver_id = form.name() + "/" + set.name;
    rec.problem_id = spec.cases[t.c].stem().string() + "/" + to_string(start);

    SolveOptions opts = set.options;
    if (!set.mu0_given) opts.mu0 = default_mu0(start == StartMode::Flat);
    opts.time_limit = std::min(opts.time_limit, spec.time_limit);
    opts.verbose = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const OpfProblem prob(nets[t.c], form);
      const Vec x0 = initial_guess(prob, start);
      const SolveResult r = ipm_solve(prob, x0, opts);
      rec.success = r.status == SolveStatus::Optimal;
      rec.iters = r.iterations;
      rec.memory_bytes = static_cast<double>(r.peak_mem);
      if (rec.success) rec.objective = r.f;
    } catch (const std::exception&) {
      rec.success = false;
    }
    rec.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) run_one(i);
      });
    for (std::thread& th : pool) th.join();
  }
  canonical_sort(out);
  return out;
}

}  // namespace gridopt
