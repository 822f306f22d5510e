#include "carpetlab/rw_analysis.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace carpet;

namespace {

template <class G>
ClassFunction<G> haar_one(std::shared_ptr<const IrrepTable<G>> t = irrep_table<G>()) {
  std::vector<double> c(t->size(), 0.0);
  c[t->trivial] = 1.0;
  return from_coeffs<G>(t, c);
}

// Symmetric trig polynomial 1 + sum_{n<=K} a_n 2 cos(n theta).
ClassFunction<U1> random_trig(Rng& rng, int K) {
  auto t = irrep_table<U1>(K);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<double> a(K + 1);
  for (int n = 1; n <= K; ++n) a[n] = u(rng) / n;
  std::vector<double> c(t->size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int n = std::abs(t->labels[i][0]);
    c[i] = n == 0 ? 1.0 : a[n];
  }
  return from_coeffs<U1>(t, c);
}

// d/dtheta of the wrapped Gaussian sqrt(2 pi beta) sum_m exp(-beta (theta + 2 pi m)^2 / 2).
double villain_derivative(double beta, double theta) {
  double s = 0.0;
  for (int m = -40; m <= 40; ++m) {
    const double u = theta + 2.0 * pi * m;
    s += -beta * u * std::exp(-0.5 * beta * u * u);
  }
  return s * std::sqrt(2.0 * pi * beta);
}

}  // namespace

TEST(GradSup, ConstantIsZero) {
  EXPECT_EQ(grad_sup(haar_one<U1>(), 0.2).value, 0.0);
  EXPECT_EQ(grad_sup(haar_one<SU2>(), 0.2, 64).value, 0.0);
  EXPECT_NEAR(grad2_l2(haar_one<U1>(), 0.2), 0.0, 1e-14);
  EXPECT_NEAR(grad2_l2(haar_one<SU2>(), 0.2, 64), 0.0, 1e-14);
}

TEST(GradSup, VillainMatchesDerivative) {
  const double beta = 1.0;
  double vmax = 0.0;
  for (int k = 0; k < 200000; ++k) vmax = std::max(vmax, std::abs(villain_derivative(beta, -pi + 2.0 * pi * k / 200000)));
  const auto v = villain_density<U1>(beta);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.03, 0.01}) {
    const auto g = grad_sup(v, eps);
    const double err = std::abs(g.value / (eps * vmax) - 1.0);
    EXPECT_LT(err, prev) << eps;
    EXPECT_LT(g.relative_change(), 1e-3);
    prev = err;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(Grad2, L2NormMatchesFourierU1) {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = random_trig(rng, 6);
    const double eps = 0.15 + 0.1 * trial;
    const double r = 2.0 * eps;
    // sum_n c_n^2 (2|B_r| - 2 sin(n r) / (pi n))
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const int n = f.table().labels[i][0];
      if (n == 0) continue;
      s += f.coeffs()[i] * f.coeffs()[i] * (2.0 * r / pi - 2.0 * std::sin(n * r) / (pi * n));
    }
    EXPECT_NEAR(grad2_l2(f, eps), std::sqrt(s), 1e-10 * (1.0 + std::sqrt(s)));
  }
}

TEST(Grad2, L2NormMatchesFourierSU2) {
  const auto f = wilson_density<SU2>(2.0, irrep_table<SU2>(24));
  const double eps = 0.3, r = 2.0 * eps;
  // int_{B_r} chi_l(y) dy: class angle a < r / sqrt2 with density (2/pi) sin^2 a
  const auto gl = gauss_legendre(200, 0.0, r / std::numbers::sqrt2);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const int l = f.table().labels[i][0];
    const double d = l + 1.0;
    double ball = 0.0, chi = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double a = gl.nodes[k], w = gl.weights[k] * (2.0 / pi) * std::sin(a) * std::sin(a);
      ball += w;
      chi += w * std::sin(d * a) / std::sin(a);
    }
    s += f.coeffs()[i] * f.coeffs()[i] * (2.0 * ball - 2.0 * chi / d);
  }
  EXPECT_NEAR(grad2_l2(f, eps), std::sqrt(s), 1e-6 * std::sqrt(s));
}

TEST(Grad2, BoundHoldsOnRandomFunctions) {
  // nabla f(x) <= 2 |Omega|^-1/2 sup_{y in Omega} nabla_2 f(xy)
  Rng rng(22);
  const double eps = 0.3;
  const auto rule = detail::ball_rule<U1>(2.0 * eps);
  const double omega = ball_volume<U1>(eps);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_trig(rng, 8);
    const auto fp = [&f](const U1::ClassPoint& c) { return f(c); };
    for (double x = -pi; x < pi; x += 0.37) {
      double grad = 0.0, sup2 = 0.0;
      for (int k = -200; k <= 200; ++k) {
        const double y = eps * k / 200.5;
        grad = std::max(grad, std::abs(f({x}) - f({x + y})));
        sup2 = std::max(sup2, grad2_at<U1>(fp, eps, U1::Element(x + y), rule));
      }
      EXPECT_LE(grad, 2.0 / std::sqrt(omega) * sup2) << trial << " " << x;
    }
  }
}

TEST(WordMetric, Invariants) {
  for (double eps : {0.13, 0.3, 0.7}) {
    const auto t = WordMetricTable<SU2>::build(eps, 256);
    const double diam = pi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      EXPECT_GE(t.rho_word[i], 1);
      EXPECT_EQ(t.rho_word[i] == 1, t.rho_geo[i] < eps);
      EXPECT_LE(t.rho_word[i], static_cast<int>(std::ceil(diam / eps)));
      // rho in Omega^n and not in Omega^(n-1)
      EXPECT_LT(t.rho_geo[i], t.rho_word[i] * eps);
      EXPECT_GE(t.rho_geo[i], (t.rho_word[i] - 1) * eps);
    }
  }
  EXPECT_EQ(word_length(0.0, 0.1), 1);
  EXPECT_THROW(WordMetricTable<U1>::build(0.0), std::invalid_argument);
}

TEST(WeakHarnack, U1WilsonFamilyHolds) {
  const int N = 4;
  const auto p = family_member<U1>(ActionKind::Wilson, 1.0, N);
  const auto r = weak_harnack_check(p, 1.0 / N, 4, 8);
  EXPECT_GT(r.c0, 0.0);
  EXPECT_TRUE(r.passed());
  EXPECT_GT(r.grad_rhs - r.grad_lhs, 0.0);
  EXPECT_GT(r.rho_margin, 0.0);
  EXPECT_LT(r.grid_change, 1e-2);
}

TEST(WeakHarnack, HaarHasZeroLeftSide) {
  const auto r = weak_harnack_check(haar_one<U1>(), 0.25, 2, 4);
  EXPECT_EQ(r.grad_lhs, 0.0);
  EXPECT_NEAR(r.rho_lhs, 0.0, 1e-14);
  EXPECT_TRUE(r.passed());
}

TEST(WeakHarnack, IdentityRowIsZero) {
  const auto p = family_member<U1>(ActionKind::Wilson, 1.0, 2);
  const auto pk = convolve_power(p, 2 * 2 + 4);
  EXPECT_NEAR(pk({0.0}) - value_at_identity(pk), 0.0, 1e-10);
}

TEST(WeakHarnack, NotApplicableWhenInfimumVanishes) {
  auto t = irrep_table<U1>(1);
  std::vector<double> c(t->size(), 1.0);  // 1 + 2 cos: p^(2) changes sign
  const auto p = from_coeffs<U1>(t, c);
  EXPECT_THROW(weak_harnack_check(p, 1.5, 1, 1), NotApplicable);
}

TEST(Spectral, InequalityOnFourierSide) {
  const auto p = wilson_density<U1>(3.0);
  Rng rng(23);
  std::uniform_int_distribution<int> u(1, 40);
  for (int k = 0; k < 10; ++k) EXPECT_GE(spectral_margin(p, u(rng), u(rng)), 0.0);
  // all lambda in [-1, 1]: lambda^{2m}(1 - lambda^{2n}) <= n / 2m
  for (int n = 1; n <= 20; ++n)
    for (int m = 1; m <= 20; ++m) {
      double worst = 0.0;
      for (int i = 0; i <= 2000; ++i) {
        const double l = -1.0 + i / 1000.0;
        worst = std::max(worst, std::pow(l, 2 * m) - std::pow(l, 2 * n + 2 * m));
      }
      EXPECT_LE(worst, n / (2.0 * m)) << n << " " << m;
    }
}

TEST(L2Identity, QuadratureMatchesSeries) {
  const auto p = wilson_density<U1>(2.0);
  for (int n : {1, 3}) EXPECT_NEAR(l2_identity_defect(p, n), 0.0, 1e-10);
  const auto q = wilson_density<SU2>(2.0);
  for (int n : {1, 3}) EXPECT_NEAR(l2_identity_defect(q, n), 0.0, 1e-10);
}

TEST(Doubling, SU2BallVolumes) {
  Rng rng(24);
  for (auto [eps, samples] : {std::pair{0.1, 40'000'000L}, std::pair{0.2, 5'000'000L}}) {
    const auto rows = doubling_volumes<SU2>(eps, 10, samples, rng);
    ASSERT_EQ(rows.size(), 10u);
    for (const auto& r : rows) EXPECT_NEAR(r.mc, r.exact, 0.1 * r.exact) << eps << " n=" << r.n;
    // small balls follow |Omega| n^3
    EXPECT_NEAR(rows[4].exact / rows[0].exact, 125.0, 0.1 * 125.0);
  }
}

TEST(Moments, U1MantonQuadrature) {
  Rng rng(25);
  const double beta = 1.5;
  double prev = std::numeric_limits<double>::infinity();
  for (int N : {1, 3, 100}) {
    const auto r = moment_check<U1>(ActionKind::Manton, beta, N, 0, rng);
    EXPECT_TRUE(r.drift_consistent_with_zero());
    const double rel = std::abs(r.NA[0] * beta - 1.0);
    EXPECT_LE(rel, prev + 1e-12);
    prev = rel;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Moments, SU2WilsonSampling) {
  Rng rng(26);
  const auto r = moment_check<SU2>(ActionKind::Wilson, 1.0, 100, 200000, rng);
  EXPECT_EQ(r.samples, 200000);
  EXPECT_TRUE(r.drift_consistent_with_zero(4.0));
  EXPECT_LT(r.rel_frobenius, 0.05);
  for (int k = 0; k < 9; ++k) EXPECT_LT(r.asymmetry, 1e-12 + 4.0 * r.NA_err[k] + 1e-9);
  EXPECT_LT(r.tail_mass, 1e-4);
}

TEST(Moments, TailMassDecreases) {
  Rng rng(27);
  double prev = 1.0;
  for (int N : {2, 8, 32}) {
    const auto r = moment_check<U1>(ActionKind::Wilson, 1.0, N, 0, rng);
    EXPECT_LT(r.tail_mass, prev);
    prev = r.tail_mass;
  }
  EXPECT_THROW(moment_check<SU3>(ActionKind::Wilson, 1.0, 4, 100, rng), std::invalid_argument);
}

TEST(GradientScaling, VillainSequenceIsConstant) {
  const auto rep = gradient_scaling_check<U1>(ActionKind::Villain, 1.0, {2, 4, 8}, {2});
  ASSERT_EQ(rep.grad_eps_carpet.size(), 3u);
  // same V_beta; only eps = 1/N changes, so compare eps * value
  const double a = rep.grad_eps_carpet[0] * 0.5;
  const auto v = villain_density<U1>(1.0);
  EXPECT_NEAR(a, grad_sup(v, 0.5).value, 1e-12);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_LT(rep.grad_eps_carpet[i], 1.2 * rep.grad_eps_carpet[0] + 1.0);
}

TEST(GradientScaling, U1WilsonSingleConstant) {
  const auto rep = gradient_scaling_check<U1>(ActionKind::Wilson, 1.0, {2, 4, 8, 16}, {2, 3, 4, 5, 6, 7, 8, 9, 10});
  for (const auto& pt : rep.points) EXPECT_LE(pt.grad, rep.constant * pt.bound * (1 + 1e-12));
  EXPECT_TRUE(rep.passed()) << rep.constant;
  for (double r : rep.p2_at_1_scaled) EXPECT_GT(r, 0.0);
}

TEST(GradientScaling, SU2Crossover) {
  const auto rep = gradient_scaling_check<SU2>(ActionKind::Wilson, 1.0, {2, 4}, {1, 2, 3, 4}, 128);
  ASSERT_EQ(rep.crossover.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(std::abs(rep.crossover[i] - rep.predicted_crossover[i]), 1.0);
  // halving eps moves the crossover by log2(4)
  EXPECT_NEAR(rep.crossover[1] - rep.crossover[0], 2.0, 0.5);
  EXPECT_NEAR(rep.predicted_crossover[1] - rep.predicted_crossover[0], 2.0, 1e-12);
}

TEST(CheckCsv, Header) {
  std::ostringstream os;
  write_check_csv(os, {{"weak_harnack_grad", "U1", "wilson", 1.0, 4, 8, 0.1, 0.2, 0.1, "pass"}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "check,group,action,beta,N,m,lhs,rhs,margin,status");
}
