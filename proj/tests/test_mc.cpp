#include "carpetlab/mc.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace carpet;

namespace {

// One plaquette on edges 0..3 plus a free edge 4.
PlaquetteComplex single_plaquette() {
  PlaquetteComplex cx;
  cx.num_vertices = 6;
  cx.edge_ends = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}};
  cx.edge_kind.assign(5, EdgeKind::Base);
  cx.plaquettes = {{SignedEdge{0, 1}, SignedEdge{1, 1}, SignedEdge{2, -1}, SignedEdge{3, -1}}};
  cx.build_incidence();
  cx.validate();
  return cx;
}

template <class G>
ClassFunction<G> haar_weight() {
  const auto t = irrep_table<G>();
  std::vector<double> c(t->size(), 0.0);
  c[t->trivial] = 1.0;
  return from_coeffs<G>(t, c);
}

double wilson_u1_pdf(double beta, double t) { return std::exp(beta * std::cos(t)) / (2 * pi * std::cyl_bessel_i(0.0, beta)); }

// Kolmogorov-Smirnov distance to the uniform law on [-pi, pi).
double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  double d = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = (x[i] + pi) / (2 * pi);
    d = std::max({d, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return d;
}

Observables<U1> mean_plaquette(const PlaquetteComplex& cx) {
  return {{"mean_plaquette"}, [&cx](const Configuration<U1>& c, std::span<double> out) {
            double s = 0.0;
            for (int p = 0; p < cx.num_plaquettes(); ++p) s += holonomy(c, cx, p).trace().real();
            out[0] = s / cx.num_plaquettes();
          }};
}

}  // namespace

TEST(LocalWeight, TrivialCasesAndComplementOracle) {
  const auto cx = single_plaquette();
  const double beta = 1.7;
  const auto q = wilson_density<U1>(beta);
  ChainState<U1> s(cx, q, 1);
  Rng rng(3);
  for (int e = 0; e < 5; ++e) s.config()[e] = U1::haar(rng);
  const double a0 = s.config()[0].angle(), a2 = s.config()[2].angle(), a3 = s.config()[3].angle();
  EXPECT_NEAR(local_weight(s, 1, s.config()[1]), s.weight(0).at(holonomy(s.config(), cx, 0)), 1e-14);
  EXPECT_EQ(local_weight(s, 4, U1::Element(0.3)), 1.0);
  for (double th : {-2.0, 0.1, 1.3}) {
    const double alpha = a0 - a2 - a3;
    EXPECT_NEAR(local_weight(s, 1, U1::Element(th)), wilson_u1_pdf(beta, th + alpha) * 2 * pi, 1e-12);
  }
}

TEST(Metropolis, ZeroCouplingIsHaar) {
  const auto cx = single_plaquette();
  ChainState<U1> s(cx, haar_weight<U1>(), 2);
  for (int k = 0; k < 200; ++k) metropolis_sweep(s);
  s.freeze();
  std::vector<double> x;
  for (int k = 0; k < 20000; ++k) {
    metropolis_sweep(s);
    x.push_back(s.config()[0].angle());
  }
  EXPECT_DOUBLE_EQ(s.acceptance(), 1.0);
  EXPECT_LT(ks_uniform(x), 1.63 / std::sqrt(20000.0));  // alpha = 0.01
}

TEST(Metropolis, FrozenChainsAreBitReproducible) {
  BoxLattice b(2, 1);
  const auto q = wilson_density<SU2>(1.0);
  ChainState<SU2> s1(b.complex(), q, 42), s2(b.complex(), q, 42);
  for (int k = 0; k < 50; ++k) {
    metropolis_sweep(s1);
    metropolis_sweep(s2);
  }
  for (int e = 0; e < s1.config().size(); ++e)
    EXPECT_TRUE(s1.config()[e].matrix() == s2.config()[e].matrix());
  EXPECT_EQ(s1.width(), s2.width());
}

TEST(Metropolis, SinglePlaquetteAngleHistogram) {
  const auto cx = single_plaquette();
  const double beta = 2.0;
  ChainState<U1> s(cx, wilson_density<U1>(beta), 5);
  for (int k = 0; k < 2000; ++k) metropolis_sweep(s);
  s.freeze();
  constexpr int B = 32;
  std::vector<double> counts(B, 0.0);
  long n = 0;
  for (long k = 0; k < 1'000'000; ++k) {
    metropolis_sweep(s);
    if (k % 10) continue;
    const double t = holonomy(s.config(), cx, 0).angle();
    counts[std::min(B - 1, static_cast<int>((t + pi) / (2 * pi) * B))] += 1;
    ++n;
  }
  double chi2 = 0.0;
  for (int k = 0; k < B; ++k) {
    double prob = 0.0;
    const int sub = 200;
    for (int j = 0; j < sub; ++j)
      prob += wilson_u1_pdf(beta, -pi + (k + (j + 0.5) / sub) * 2 * pi / B) * (2 * pi / B / sub);
    const double expct = prob * n;
    chi2 += (counts[k] - expct) * (counts[k] - expct) / expct;
  }
  EXPECT_LT(chi2, 61.1);  // 31 dof, p = 0.001
}

TEST(Metropolis, DetailedBalanceOfSingleEdgeKernel) {
  const auto cx = single_plaquette();
  ChainState<U1> s(cx, wilson_density<U1>(1.5), 6);
  s.config()[1] = U1::Element(0.4);
  s.config()[2] = U1::Element(-1.1);
  s.config()[3] = U1::Element(2.0);
  s.set_width(1.5);
  s.freeze();
  const auto dens = conditional_density_u1(s, 0);
  const int M = static_cast<int>(dens.size());
  std::vector<double> cdf(M + 1, 0.0);
  for (int k = 0; k < M; ++k) cdf[k + 1] = cdf[k] + dens[k] * 2 * pi / M;
  constexpr int K = 8;
  std::vector<std::vector<double>> C(K, std::vector<double>(K, 0.0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Rng rng(7);
  auto bin = [](double t) { return std::min(K - 1, static_cast<int>((t + pi) / (2 * pi) * K)); };
  for (int trial = 0; trial < 400000; ++trial) {
    const double x = u(rng) * cdf[M];
    const int k = std::clamp(static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin()) - 1, 0, M - 1);
    const double t0 = -pi + (k + u(rng)) * 2 * pi / M;
    s.config()[0] = U1::Element(t0);
    metropolis_update(s, 0);
    C[bin(t0)][bin(s.config()[0].angle())] += 1;
  }
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) EXPECT_LE(std::abs(C[i][j] - C[j][i]), 4.0 * std::sqrt(C[i][j] + C[j][i] + 1));
}

TEST(HeatBath, ConditionalIsNormalizedAndZeroCouplingIsUniform) {
  BoxLattice b(2, 1);
  ChainState<U1> s(b.complex(), wilson_density<U1>(1.0), 8);
  for (int k = 0; k < 5; ++k) heatbath_sweep_u1(s);
  for (int e : {0, 3, 7}) {
    const auto d = conditional_density_u1(s, e);
    EXPECT_NEAR(pairwise_sum(d) * 2 * pi / d.size(), 1.0, 1e-10);
  }
  ChainState<U1> h(b.complex(), haar_weight<U1>(), 9);
  std::vector<double> x;
  for (int k = 0; k < 20000; ++k) {
    heatbath_sweep_u1(h);
    x.push_back(h.config()[4].angle());
  }
  EXPECT_LT(ks_uniform(x), 1.63 / std::sqrt(20000.0));
}

TEST(HeatBath, AgreesWithMetropolis) {
  BoxLattice b(2, 2);
  const auto& cx = b.complex();
  const auto q = wilson_density<U1>(1.0);
  const auto obs = mean_plaquette(cx);
  ChainState<U1> h(cx, q, 10), m(cx, q, 11);
  const auto rh = estimate(h, obs, {.sweeps = 20000, .burn_in = 500, .batches = 32, .sampler = Sampler::HeatBath});
  const auto rm = estimate(m, obs, {.sweeps = 20000, .burn_in = 500, .batches = 32, .sampler = Sampler::Metropolis});
  EXPECT_LE(std::abs(rh[0].estimate - rm[0].estimate), 3 * std::hypot(rh[0].stderr_, rm[0].stderr_));
}

TEST(Estimate, FrozenAndHaarLimits) {
  BoxLattice b(2, 1);
  const auto& cx = b.complex();
  const auto loop = plaquette_loop(cx, 0);
  ChainState<U1> cold(cx, wilson_density<U1>(1000.0), 12);
  const auto r1 = estimate(cold, loop_observables<U1>(cx, {"p0"}, {loop}), {.sweeps = 2000, .burn_in = 100});
  EXPECT_NEAR(r1[0].estimate, 1.0, 0.01);
  ChainState<U1> hot(cx, haar_weight<U1>(), 13);
  const auto r0 = estimate(hot, loop_observables<U1>(cx, {"p0"}, {loop}), {.sweeps = 4000, .burn_in = 10});
  EXPECT_LE(std::abs(r0[0].estimate), 3 * r0[0].stderr_);
  EXPECT_GT(r0[0].stderr_, 0.0);
}

TEST(Estimate, TwoDimensionalFactorization) {
  BoxLattice b(2, 2);
  const auto& cx = b.complex();
  ChainState<U1> s(cx, wilson_density<U1>(1.0), 14);
  const auto r = estimate(s, mean_plaquette(cx), {.sweeps = 40000, .burn_in = 200});
  const double exact = std::cyl_bessel_i(1.0, 1.0) / std::cyl_bessel_i(0.0, 1.0);
  EXPECT_NEAR(exact, 0.4464, 1e-4);
  EXPECT_LE(std::abs(r[0].estimate - exact), 3 * r[0].stderr_);
  EXPECT_LT(r[0].stderr_, 0.002);
}

TEST(Estimate, SU2AgreesWithCoefficientOracle) {
  // free boundary in 2D: each plaquette holonomy has law q, so <Tr/2> = q_(1/2) / 2
  BoxLattice b(2, 1);
  const auto& cx = b.complex();
  const auto q = wilson_density<SU2>(2.0);
  ChainState<SU2> s(cx, q, 15);
  std::vector<std::string> names;
  std::vector<std::vector<SignedEdge>> loops;
  for (int p = 0; p < cx.num_plaquettes(); ++p) {
    names.push_back("p" + std::to_string(p));
    loops.push_back(plaquette_loop(cx, p));
  }
  const auto r = estimate(s, loop_observables<SU2>(cx, names, loops), {.sweeps = 20000, .burn_in = 1000});
  const double exact = q.coeff({1}) / 2.0;
  for (const auto& x : r) EXPECT_LE(std::abs(x.estimate - exact), 3.5 * x.stderr_) << x.observable;
}

TEST(Estimate, FewBatchesGiveNoErrorBar) {
  BoxLattice b(2, 1);
  ChainState<U1> s(b.complex(), wilson_density<U1>(1.0), 16);
  const auto r = estimate(s, mean_plaquette(b.complex()), {.sweeps = 700, .burn_in = 10, .batches = 7});
  EXPECT_TRUE(std::isnan(r[0].stderr_));
  EXPECT_EQ(r[0].batches, 7);
  EXPECT_THROW(estimate(s, mean_plaquette(b.complex()), {.sweeps = 3, .burn_in = 0, .batches = 8}),
               std::invalid_argument);
}

TEST(Estimate, DoublingSweepsShrinksErrorBySqrt2) {
  BoxLattice b(2, 2);
  const auto& cx = b.complex();
  const auto q = wilson_density<U1>(1.0);
  double se1 = 0.0, se2 = 0.0;
  for (int seed = 0; seed < 6; ++seed) {
    ChainState<U1> a(cx, q, 100 + seed), c(cx, q, 200 + seed);
    se1 += estimate(a, mean_plaquette(cx), {.sweeps = 8000, .burn_in = 100})[0].stderr_;
    se2 += estimate(c, mean_plaquette(cx), {.sweeps = 16000, .burn_in = 100})[0].stderr_;
  }
  EXPECT_NEAR(se1 / se2, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(Estimate, PooledChainsAndCsv) {
  BoxLattice b(2, 1);
  const auto q = wilson_density<U1>(1.0);
  std::vector<std::vector<EstimatorReport>> runs;
  for (int c = 0; c < 3; ++c) {
    ChainState<U1> s(b.complex(), q, 17, c);
    runs.push_back(estimate(s, mean_plaquette(b.complex()), {.sweeps = 800, .burn_in = 10, .batches = 8}));
  }
  const auto pooled = pool_chains(runs);
  EXPECT_EQ(pooled[0].batches, 24);
  EXPECT_NEAR(pooled[0].estimate, (runs[0][0].estimate + runs[1][0].estimate + runs[2][0].estimate) / 3, 1e-14);
  std::ostringstream os;
  write_reports_csv(os, pooled);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "observable,estimate,stderr,batches,tau_int,seed");
}

TEST(Ginibre, MonotoneInCentralCoupling) {
  BoxLattice b(2, 2);
  const int c = central_plaquette(b);
  const auto loop = plaquette_loop(b.complex(), c);
  const std::vector<double> grid{0.5, 1.0, 2.0, 4.0};
  const auto rep = ginibre_experiment(b, c, loop, grid, 1.0, {.sweeps = 4000, .burn_in = 100}, 18);
  EXPECT_TRUE(rep.passed());
  // free boundary: the central loop has law V_{beta_c}, <cos> = exp(-1 / 2 beta_c)
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_LE(std::abs(rep.estimates[i].estimate - std::exp(-0.5 / grid[i])), 4 * rep.estimates[i].stderr_);
  const auto one = ginibre_experiment(b, c, loop, {2.0}, 1.0, {.sweeps = 200, .burn_in = 10}, 19);
  EXPECT_EQ(one.verdict, Monotonicity::Monotone);
  const auto weak = ginibre_experiment(b, c, loop, {0.05}, 1.0, {.sweeps = 4000, .burn_in = 100}, 20);
  EXPECT_LE(std::abs(weak.estimates[0].estimate), 3 * weak.estimates[0].stderr_ + 1e-4);
}

TEST(Ginibre, Verdicts) {
  auto rep = [](double e, double s) {
    EstimatorReport r;
    r.estimate = e;
    r.stderr_ = s;
    return r;
  };
  EXPECT_EQ(judge_monotone({rep(0.1, 0.01), rep(0.5, 0.01)}), Monotonicity::Monotone);
  EXPECT_EQ(judge_monotone({rep(0.1, 0.01), rep(0.11, 0.01)}), Monotonicity::Inconclusive);
  EXPECT_EQ(judge_monotone({rep(0.5, 0.01), rep(0.1, 0.01)}), Monotonicity::Violated);
}

TEST(CarpetEquivalence, ShortU1Run) {
  BoxLattice b(2, 1);
  CarpetGraph cg(b, 2);
  const double beta = 1.0;
  const auto pN = family_member<U1>(ActionKind::Wilson, beta, 2);
  const auto q = convolve_power(pN, 4);
  const auto loop = plaquette_loop(b.complex(), 1);
  ChainState<U1> fine(cg.complex(), pN, 21), coarse(b.complex(), q, 22);
  const auto rf = estimate(fine, projected_loop_observables<U1>(cg, {"p1"}, {loop}), {.sweeps = 20000, .burn_in = 200});
  const auto rc = estimate(coarse, loop_observables<U1>(b.complex(), {"p1"}, {loop}), {.sweeps = 20000, .burn_in = 200});
  EXPECT_LE(std::abs(rf[0].estimate - rc[0].estimate), 3 * std::hypot(rf[0].stderr_, rc[0].stderr_));
  EXPECT_LE(std::abs(rc[0].estimate - q.coeff({1})), 3 * rc[0].stderr_);
}

TEST(RunChains, SingleChainMatchesEstimateAndPoolsMany) {
  BoxLattice b(2, 1);
  const auto q = wilson_density<U1>(1.0);
  const auto loop = plaquette_loop(b.complex(), 0);
  const auto obs = loop_observables<U1>(b.complex(), {"p0"}, {loop});
  const EstimateOptions opt{.sweeps = 3000, .burn_in = 50, .batches = 10};
  ChainState<U1> s(b.complex(), q, 31, 2);
  const auto ref = estimate(s, obs, opt);
  const std::vector<int> assign(b.complex().num_plaquettes(), 0);
  const auto one = run_chains<U1>(b.complex(), {q}, assign, obs, opt, 31, 2, 1);
  EXPECT_EQ(one[0].estimate, ref[0].estimate);
  EXPECT_EQ(one[0].stderr_, ref[0].stderr_);
  const auto many = run_chains<U1>(b.complex(), {q}, assign, obs, opt, 31, 0, 3);
  EXPECT_EQ(many[0].batches, 30);
  EXPECT_EQ(many[0].sweeps, 3000);
  EXPECT_EQ(many[0].batch_means, run_chains<U1>(b.complex(), {q}, assign, obs, opt, 31, 0, 3)[0].batch_means);
}
