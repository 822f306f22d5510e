#pragma once

// Quadrature rules on the space of conjugacy classes (Weyl integration
// formula) plus a Gauss-Legendre generator and pairwise summation.

#include "carpetlab/group.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace carpet {

struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// M-point Gauss-Legendre rule on [a, b] by Newton iteration on P_M.
inline GaussLegendre gauss_legendre(int M, double a, double b) {
  if (M < 1) throw std::invalid_argument("gauss_legendre: M must be positive");
  GaussLegendre r;
  r.nodes.resize(M);
  r.weights.resize(M);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (M + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (M + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= M; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (M == 1) p0 = 1.0;
      dp = M * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= M; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (M == 1) p0 = 1.0;
      dp = M * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = mid - half * x;
    r.nodes[M - 1 - i] = mid + half * x;
    r.weights[i] = r.weights[M - 1 - i] = w * half;
  }
  return r;
}

/// Pairwise (cascade) summation; deterministic for a fixed input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

/// Squared Weyl denominator |Delta|^2 for eigen-angles.
template <class G>
double weyl_density(const typename G::ClassPoint& c) {
  if constexpr (G::id == GroupId::U1) {
    return 1.0;
  } else if constexpr (G::id == GroupId::SU2) {
    const double s = std::sin(c[0]);
    return 4.0 * s * s;
  } else {
    const double t3 = -c[0] - c[1];
    const double a = std::sin(0.5 * (c[0] - c[1]));
    const double b = std::sin(0.5 * (c[0] - t3));
    const double d = std::sin(0.5 * (c[1] - t3));
    return 64.0 * a * a * b * b * d * d;
  }
}

/// Nodes and weights such that sum_k w_k f(x_k) approximates the Haar
/// integral of a class function f (Haar measure normalized to 1).
template <class G>
struct WeylQuadrature {
  using ClassPoint = typename G::ClassPoint;
  int resolution = 0;
  std::vector<ClassPoint> points;
  std::vector<double> weights;
};

template <class G>
WeylQuadrature<G> make_weyl_quadrature(int M) {
  WeylQuadrature<G> q;
  q.resolution = M;
  if constexpr (G::id == GroupId::U1) {
    // Trapezoid rule on the circle.
    q.points.resize(M);
    q.weights.assign(M, 1.0 / M);
    for (int m = 0; m < M; ++m) q.points[m] = {-pi + 2.0 * pi * m / M};
  } else if constexpr (G::id == GroupId::SU2) {
    const auto gl = gauss_legendre(M, 0.0, pi);
    q.points.resize(M);
    q.weights.resize(M);
    for (int m = 0; m < M; ++m) {
      q.points[m] = {gl.nodes[m]};
      q.weights[m] = gl.weights[m] * weyl_density<G>(q.points[m]) / (2.0 * pi);
    }
  } else {
    const auto gl = gauss_legendre(M, -pi, pi);
    q.points.reserve(static_cast<std::size_t>(M) * M);
    q.weights.reserve(static_cast<std::size_t>(M) * M);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        typename G::ClassPoint c{gl.nodes[i], gl.nodes[j]};
        q.points.push_back(c);
        q.weights.push_back(gl.weights[i] * gl.weights[j] * weyl_density<G>(c) /
                            (24.0 * pi * pi));
      }
  }
  return q;
}

/// Cached quadrature rule for resolution M.
template <class G>
std::shared_ptr<const WeylQuadrature<G>> weyl_quadrature(int M) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const WeylQuadrature<G>>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[M];
  if (!slot) slot = std::make_shared<const WeylQuadrature<G>>(make_weyl_quadrature<G>(M));
  return slot;
}

/// Uniform grid over class coordinates used for sup-norms.
///   U(1): M angles on [-pi, pi);  SU(2): M+1 angles on [0, pi];
///   SU(3): M x M grid on [-pi, pi)^2.
template <class G>
std::vector<typename G::ClassPoint> class_grid(int M) {
  std::vector<typename G::ClassPoint> g;
  if constexpr (G::id == GroupId::U1) {
    for (int m = 0; m < M; ++m) g.push_back({-pi + 2.0 * pi * m / M});
  } else if constexpr (G::id == GroupId::SU2) {
    for (int m = 0; m <= M; ++m) g.push_back({pi * m / M});
  } else {
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) g.push_back({-pi + 2.0 * pi * i / M, -pi + 2.0 * pi * j / M});
  }
  return g;
}

/// Default resolutions per group.
template <class G>
constexpr int default_quadrature_resolution() {
  if constexpr (G::id == GroupId::U1) return 4096;
  else if constexpr (G::id == GroupId::SU2) return 512;
  else return 256;
}

template <class G>
constexpr int default_grid_resolution() {
  if constexpr (G::id == GroupId::U1) return 4096;
  else if constexpr (G::id == GroupId::SU2) return 512;
  else return 128;
}

}  // namespace carpet
