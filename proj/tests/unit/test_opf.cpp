#include <doctest.h>

#include <random>

#include "gridopt/error.hpp"
#include "gridopt/opf.hpp"
#include "test_util.hpp"

using namespace gridopt;

namespace {

void check_derivatives(const OpfProblem& prob, int points, unsigned seed) {
  std::mt19937 rng(seed);
  for (int p = 0; p < points; ++p) {
    const Vec x = test::random_interior(prob, rng);
    const Vec lg = test::random_vec(prob.m_eq(), rng);
    const Vec lh = test::random_vec(prob.m_ineq(), rng).cwiseAbs();
    const double w = 0.7;

    auto f = [&](const Vec& y) { return Vec::Constant(1, prob.eval_f(y)); };
    const Eigen::MatrixXd grad_fd = test::fd_jacobian(f, x).transpose();
    CHECK(test::rel_err(prob.eval_grad_f(x), grad_fd) <= 1e-6);

    auto g = [&](const Vec& y) { return prob.eval_g(y); };
    CHECK(test::rel_err(Eigen::MatrixXd(prob.eval_jac_g(x)),
                        test::fd_jacobian(g, x)) <= 1e-6);

    auto h = [&](const Vec& y) { return prob.eval_h(y); };
    CHECK(test::rel_err(Eigen::MatrixXd(prob.eval_jac_h(x)),
                        test::fd_jacobian(h, x)) <= 1e-6);

    auto grad_l = [&](const Vec& y) {
      Vec r = w * prob.eval_grad_f(y);
      r += prob.eval_jac_g(y).transpose() * lg;
      r += prob.eval_jac_h(y).transpose() * lh;
      return r;
    };
    const Eigen::MatrixXd hess(prob.eval_hessian(x, w, lg, lh));
    CHECK(test::rel_err(hess, test::fd_jacobian(grad_l, x)) <= 1e-5);
    CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1.0, hess.cwiseAbs().maxCoeff()));
  }
}

}  // namespace

TEST_CASE("formulation names round trip") {
  for (const Formulation& f : kAllFormulations)
    CHECK(Formulation::parse(f.name()) == f);
  CHECK_THROWS_AS(Formulation::parse("polar"), std::invalid_argument);
}

TEST_CASE("dimensions follow the layout rules") {
  for (const char* name : {"case9.m", "case14.m", "case30.m", "case118.m"}) {
    auto net = test::load_net(name);
    const Index nlim = static_cast<Index>(net->limited_branches().size());
    for (const Formulation& form : kAllFormulations) {
      const OpfProblem p = build_nlp(net, form);
      CHECK(p.n() == 2 * net->n_bus() + 2 * net->n_gen());
      if (form.voltage == VoltageCoords::Polar) {
        CHECK(p.m_eq() == 2 * net->n_bus());
        CHECK(p.m_ineq() == 2 * nlim);
      } else {
        CHECK(p.m_eq() == 2 * net->n_bus() + 1);
        CHECK(p.m_ineq() == 2 * nlim + 2 * net->n_bus());
      }
      CHECK((p.x_min().array() <= p.x_max().array()).all());
    }
  }
}

TEST_CASE("bounds pin the polar reference angle and the Cartesian real part") {
  auto net = test::load_net("case9.m");
  const Index ref = net->ref_bus;
  const OpfProblem polar = build_nlp(net, Formulation::parse("polar-power"));
  CHECK(polar.x_min()(ref) == polar.x_max()(ref));
  const OpfProblem cart = build_nlp(net, Formulation::parse("cart-power"));
  CHECK(cart.x_min()(ref) == 0.0);
  const Index nb = net->n_bus();
  CHECK(cart.x_min()(nb + 1) == -net->buses[1].vmax);
  CHECK(cart.x_max()(nb + 1) == net->buses[1].vmax);
}

TEST_CASE("analytic derivatives match finite differences") {
  for (const char* name : {"case9.m", "case14.m", "case30.m"}) {
    auto net = test::load_net(name);
    for (const Formulation& form : kAllFormulations) {
      CAPTURE(name);
      CAPTURE(form.name());
      check_derivatives(build_nlp(net, form), 20, 17u);
    }
  }
}

TEST_CASE("derivatives include cubic and reactive costs") {
  CaseData c = load_case(test::data_path("case9.m"));
  const Index ng = c.gen.rows();
  Eigen::MatrixXd cost(2 * ng, 8);
  cost.setZero();
  for (Index k = 0; k < 2 * ng; ++k) {
    cost(k, 0) = 2;
    cost(k, 3) = 4;
    cost(k, 4) = 1e-5 * static_cast<double>(k + 1);
    cost(k, 5) = 0.01;
    cost(k, 6) = 5.0 + static_cast<double>(k);
    cost(k, 7) = 100;
  }
  c.gencost = cost;
  auto net = std::make_shared<const Network>(build_network(c));
  for (const Formulation& form : kAllFormulations)
    check_derivatives(build_nlp(net, form), 5, 3u);
}

TEST_CASE("Jacobian and Hessian patterns do not depend on x") {
  auto net = test::load_net("case14.m");
  std::mt19937 rng(5);
  for (const Formulation& form : kAllFormulations) {
    const OpfProblem p = build_nlp(net, form);
    const Vec x1 = test::random_interior(p, rng), x2 = test::random_interior(p, rng);
    const Vec lg = Vec::Zero(p.m_eq()), lh = Vec::Zero(p.m_ineq());
    auto same_pattern = [](SpMat a, SpMat b) {
      a.makeCompressed();
      b.makeCompressed();
      if (a.nonZeros() != b.nonZeros()) return false;
      for (Index k = 0; k <= a.outerSize(); ++k)
        if (a.outerIndexPtr()[k] != b.outerIndexPtr()[k]) return false;
      for (Index k = 0; k < a.nonZeros(); ++k)
        if (a.innerIndexPtr()[k] != b.innerIndexPtr()[k]) return false;
      return true;
    };
    CHECK(same_pattern(p.eval_jac_g(x1), p.eval_jac_g(x2)));
    CHECK(same_pattern(p.eval_jac_h(x1), p.eval_jac_h(x2)));
    CHECK(same_pattern(p.eval_hessian(x1, 1.0, lg, lh),
                       p.eval_hessian(x2, 0.0, test::random_vec(p.m_eq(), rng),
                                      test::random_vec(p.m_ineq(), rng))));
  }
}

TEST_CASE("polar and Cartesian power balance agree") {
  auto net = test::load_net("case30.m");
  const OpfProblem polar = build_nlp(net, Formulation::parse("polar-power"));
  const OpfProblem cart = build_nlp(net, Formulation::parse("cart-power"));
  std::mt19937 rng(11);
  for (int k = 0; k < 10; ++k) {
    const Vec xp = test::random_interior(polar, rng);
    Vec xc = xp;
    cart.set_voltage(xc, polar.voltage(xp));
    const Vec gp = polar.eval_g(xp), gc = cart.eval_g(xc);
    CHECK((gp - gc.head(gp.size())).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("power and current balance vanish together") {
  auto net = test::load_net("case14.m");
  const PfSolution pf = newton_pf(*net);
  for (const Formulation& form : kAllFormulations) {
    const OpfProblem p = build_nlp(net, form);
    Vec x = Vec::Zero(p.n());
    CVec v = pf.voltage();
    if (form.voltage == VoltageCoords::Cartesian)
      v *= std::polar(1.0, -std::arg(v(net->ref_bus)));
    p.set_voltage(x, v);
    x.segment(p.layout().pg(), net->n_gen()) = pf.pg;
    x.segment(p.layout().qg(), net->n_gen()) = pf.qg;
    const Vec g = p.eval_g(x);
    CAPTURE(form.name());
    CHECK(g.head(2 * net->n_bus()).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("current balance rejects zero voltage") {
  auto net = test::load_net("case9.m");
  const OpfProblem p = build_nlp(net, Formulation::parse("cart-current"));
  Vec x = initial_guess(p, StartMode::Flat);
  x(3) = 0.0;
  x(net->n_bus() + 3) = 0.0;
  try {
    p.eval_g(x);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVoltageDomain);
  }
  const OpfProblem pp = build_nlp(net, Formulation::parse("cart-power"));
  CHECK(pp.eval_g(x).allFinite());
}

TEST_CASE("unsupported costs are rejected") {
  CaseData c = test::one_bus_case(100, 2);
  c.gencost.resize(1, 8);
  c.gencost << 2, 0, 0, 4, 1, 1, 1, 1;
  CHECK_NOTHROW(build_nlp(std::make_shared<const Network>(build_network(c)),
                          Formulation{}));
  c.gencost.resize(1, 9);
  c.gencost << 2, 0, 0, 5, 1, 1, 1, 1, 1;
  try {
    build_nlp(std::make_shared<const Network>(build_network(c)), Formulation{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedCost);
  }
  c.gencost.resize(1, 8);
  c.gencost << 1, 0, 0, 2, 0, 0, 100, 200;
  CHECK_THROWS_AS(build_nlp(std::make_shared<const Network>(build_network(c)),
                            Formulation{}),
                  Error);
}

TEST_CASE("one-bus objective") {
  auto net = std::make_shared<const Network>(
      build_network(test::one_bus_case(100, 2)));
  const OpfProblem p = build_nlp(net, Formulation{});
  Vec x = initial_guess(p, StartMode::Flat);
  x(p.layout().pg()) = 1.0;
  CHECK(p.eval_f(x) == doctest::Approx(200.0));
}

TEST_CASE("flat start follows the bound rules") {
  CaseData c = test::one_bus_case(100, 2);
  c.bus(0, bus_col::VMAX) = 1.06;
  c.bus(0, bus_col::VMIN) = 0.94;
  c.gen(0, gen_col::PMIN) = 10;
  c.gen(0, gen_col::PMAX) = std::numeric_limits<double>::infinity();
  c.gen(0, gen_col::QMIN) = -std::numeric_limits<double>::infinity();
  c.gen(0, gen_col::QMAX) = 20;
  auto net = std::make_shared<const Network>(build_network(c));
  const OpfProblem p = build_nlp(net, Formulation{});
  const Vec x = initial_guess(p, StartMode::Flat);
  CHECK(x(p.layout().v2()) == doctest::Approx(1.0));
  CHECK(x(p.layout().pg()) == doctest::Approx(1.1));
  CHECK(x(p.layout().qg()) == doctest::Approx(-0.8));

  const OpfProblem pc = build_nlp(net, Formulation::parse("cart-power"));
  const Vec xc = initial_guess(pc, StartMode::Flat);
  CHECK(xc(pc.layout().v1()) == doctest::Approx(1.0));
  CHECK(xc(pc.layout().v2()) == 0.0);
}

TEST_CASE("case and power-flow starts lie inside the box") {
  auto net = test::load_net("case30.m");
  for (const Formulation& form : kAllFormulations) {
    const OpfProblem p = build_nlp(net, form);
    for (StartMode m : {StartMode::CaseData, StartMode::PfSolve}) {
      const Vec x = initial_guess(p, m);
      CHECK((x.array() >= p.x_min().array()).all());
      CHECK((x.array() <= p.x_max().array()).all());
    }
    if (form.voltage == VoltageCoords::Cartesian) {
      const Vec x = initial_guess(p, StartMode::PfSolve);
      CHECK(x(p.layout().v2() + net->ref_bus) == doctest::Approx(0.0));
    }
  }
  CHECK(parse_start_mode("mpc") == StartMode::CaseData);
  CHECK(to_string(StartMode::PfSolve) == "pf");
}
