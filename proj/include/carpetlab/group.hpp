#pragma once

// Compact structure groups U(1), SU(2), SU(3).
//
// Lie algebras carry the inner product <X,Y> = -Tr(XY).  Every group type
// exposes the same static interface so the rest of the library can be
// written once as templates:
//
//   Element, Algebra, ClassPoint
//   identity(), exp(X), log(g), class_point(g), from_class_point(c),
//   distance(c), trace(c), haar(rng), basis()
//
// A ClassPoint is a set of coordinates on the space of conjugacy classes:
//   U(1):  the angle theta in (-pi, pi]
//   SU(2): alpha in [0, pi], eigenvalues exp(+-i alpha)
//   SU(3): eigen-angles (theta1, theta2); theta3 = -theta1 - theta2 (mod 2pi)

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace carpet {

using cplx = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr double pi = std::numbers::pi;

enum class GroupId { U1, SU2, SU3 };

inline std::string_view group_name(GroupId g) {
  switch (g) {
    case GroupId::U1: return "U1";
    case GroupId::SU2: return "SU2";
    case GroupId::SU3: return "SU3";
  }
  return "?";
}

inline GroupId parse_group(std::string_view s) {
  std::string t(s);
  for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "U1" || t == "U(1)") return GroupId::U1;
  if (t == "SU2" || t == "SU(2)") return GroupId::SU2;
  if (t == "SU3" || t == "SU(3)") return GroupId::SU3;
  throw std::invalid_argument("unknown group '" + std::string(s) + "'");
}

struct GroupInfo {
  int matrix_size;
  int dimension;
  double diameter;
};

inline GroupInfo group_info(GroupId g) {
  switch (g) {
    case GroupId::U1: return {1, 1, pi};
    case GroupId::SU2: return {2, 3, pi * std::numbers::sqrt2};
    case GroupId::SU3: return {3, 8, 2.0 * pi * std::sqrt(6.0) / 3.0};
  }
  throw std::invalid_argument("bad group id");
}

/// Raised by log maps at elements with an eigenvalue at -1.
class CutLocusError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class GroupMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kCutLocusTol = 1e-10;

/// Maps t to (-pi, pi].
inline double wrap_angle(double t) {
  double r = std::remainder(t, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  if (r > pi) r -= 2.0 * pi;
  return r;
}

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
  return std::sin(x) / x;
}

// Traceless lift of three eigen-angles with minimal Euclidean norm.
inline std::array<double, 3> su3_min_norm_angles(double t1, double t2, double t3) {
  std::array<double, 3> a{wrap_angle(t1), wrap_angle(t2), wrap_angle(t3)};
  const double s = a[0] + a[1] + a[2];
  if (s > pi) {
    *std::max_element(a.begin(), a.end()) -= 2.0 * pi;
  } else if (s < -pi) {
    *std::min_element(a.begin(), a.end()) += 2.0 * pi;
  }
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// U(1)

struct U1 {
  static constexpr GroupId id = GroupId::U1;
  static constexpr int n = 1;
  static constexpr int dim = 1;
  static constexpr int rank = 1;

  using Algebra = Eigen::Matrix<double, 1, 1>;
  using ClassPoint = std::array<double, 1>;

  class Element {
   public:
    using group = U1;
    Element() = default;
    explicit Element(double angle) : angle_(wrap_angle(angle)) {}

    double angle() const { return angle_; }
    Element operator*(const Element& o) const { return Element(angle_ + o.angle_); }
    Element inverse() const { return Element(-angle_); }
    cplx trace() const { return std::polar(1.0, angle_); }
    double unitarity_defect() const { return 0.0; }
    double distance_to(const Element& o) const {
      return std::abs(trace() - o.trace());
    }

   private:
    double angle_ = 0.0;
  };

  static Element identity() { return Element(); }

  static Element exp(const Algebra& x) { return Element(x(0)); }

  static Algebra log(const Element& g) {
    Algebra x;
    x(0) = g.angle();
    return x;
  }

  static ClassPoint class_point(const Element& g) { return {g.angle()}; }
  static Element from_class_point(const ClassPoint& c) { return Element(c[0]); }
  static double distance(const ClassPoint& c) { return std::abs(wrap_angle(c[0])); }
  static cplx trace(const ClassPoint& c) { return std::polar(1.0, c[0]); }
  static double re_trace(const ClassPoint& c) { return std::cos(c[0]); }

  static Element haar(Rng& rng) {
    std::uniform_real_distribution<double> u(-pi, pi);
    return Element(u(rng));
  }

  static std::array<Eigen::Matrix<cplx, 1, 1>, 1> basis() {
    Eigen::Matrix<cplx, 1, 1> t;
    t(0, 0) = cplx(0.0, 1.0);
    return {t};
  }
};

// ---------------------------------------------------------------------------
// SU(N), N = 2, 3

template <int N>
struct SU {
  static_assert(N == 2 || N == 3, "only SU(2) and SU(3) are supported");

  static constexpr GroupId id = N == 2 ? GroupId::SU2 : GroupId::SU3;
  static constexpr int n = N;
  static constexpr int dim = N * N - 1;
  static constexpr int rank = N - 1;

  using Matrix = Eigen::Matrix<cplx, N, N>;
  using Algebra = Eigen::Matrix<double, dim, 1>;
  using ClassPoint = std::array<double, rank>;

  /// Products since the last projection back onto the group.
  static constexpr int kReunitarizeEvery = 64;
  static constexpr double kDefectTol = 1e-12;

  class Element {
   public:
    using group = SU;
    Element() : m_(Matrix::Identity()) {}
    explicit Element(const Matrix& m) : m_(m) {}

    const Matrix& matrix() const { return m_; }
    cplx trace() const { return m_.trace(); }

    Element operator*(const Element& o) const {
      Element r(m_ * o.m_);
      r.products_ = std::max(products_, o.products_) + 1;
      if (r.products_ >= kReunitarizeEvery) r.reunitarize();
      return r;
    }

    Element inverse() const {
      Element r(m_.adjoint());
      r.products_ = products_;
      return r;
    }

    double unitarity_defect() const {
      return (m_ * m_.adjoint() - Matrix::Identity()).norm();
    }

    double distance_to(const Element& o) const { return (m_ - o.m_).norm(); }

    /// Polar projection onto U(N) followed by a determinant phase fix.
    void reunitarize() {
      Eigen::JacobiSVD<Matrix> svd(m_, Eigen::ComputeFullU | Eigen::ComputeFullV);
      m_ = svd.matrixU() * svd.matrixV().adjoint();
      const cplx d = m_.determinant();
      m_ *= std::pow(d, -1.0 / N);
      products_ = 0;
    }

    void reunitarize_if_drifted() {
      if (unitarity_defect() > kDefectTol) reunitarize();
    }

   private:
    Matrix m_;
    int products_ = 0;
  };

  static Element identity() { return Element(); }

  /// T^a = i lambda_a / sqrt(2) with lambda the Pauli or Gell-Mann matrices.
  static const std::array<Matrix, dim>& basis() {
    static const std::array<Matrix, dim> b = [] {
      std::array<Matrix, dim> t{};
      const cplx I(0.0, 1.0);
      const double s = 1.0 / std::numbers::sqrt2;
      for (auto& m : t) m.setZero();
      if constexpr (N == 2) {
        t[0](0, 1) = 1.0; t[0](1, 0) = 1.0;
        t[1](0, 1) = -I;  t[1](1, 0) = I;
        t[2](0, 0) = 1.0; t[2](1, 1) = -1.0;
      } else {
        t[0](0, 1) = 1.0; t[0](1, 0) = 1.0;
        t[1](0, 1) = -I;  t[1](1, 0) = I;
        t[2](0, 0) = 1.0; t[2](1, 1) = -1.0;
        t[3](0, 2) = 1.0; t[3](2, 0) = 1.0;
        t[4](0, 2) = -I;  t[4](2, 0) = I;
        t[5](1, 2) = 1.0; t[5](2, 1) = 1.0;
        t[6](1, 2) = -I;  t[6](2, 1) = I;
        const double r3 = 1.0 / std::sqrt(3.0);
        t[7](0, 0) = r3; t[7](1, 1) = r3; t[7](2, 2) = -2.0 * r3;
      }
      for (auto& m : t) m *= I * s;
      for (int a = 0; a < dim; ++a)
        for (int c = 0; c < dim; ++c) {
          const double g = -(t[a] * t[c]).trace().real();
          if (std::abs(g - (a == c ? 1.0 : 0.0)) > 1e-12)
            throw std::logic_error("Lie algebra basis is not orthonormal");
        }
      return t;
    }();
    return b;
  }

  static Matrix algebra_matrix(const Algebra& x) {
    Matrix m = Matrix::Zero();
    const auto& t = basis();
    for (int a = 0; a < dim; ++a) m += x(a) * t[a];
    return m;
  }

  static Algebra algebra_coords(const Matrix& x) {
    Algebra c;
    const auto& t = basis();
    for (int a = 0; a < dim; ++a) c(a) = -(x * t[a]).trace().real();
    return c;
  }

  static Element exp(const Algebra& x) {
    if constexpr (N == 2) {
      // X = i v.sigma with v = x / sqrt(2)
      const double s = 1.0 / std::numbers::sqrt2;
      const double v1 = x(0) * s, v2 = x(1) * s, v3 = x(2) * s;
      const double phi = std::sqrt(v1 * v1 + v2 * v2 + v3 * v3);
      const double c = std::cos(phi), k = detail::sinc(phi);
      Matrix m;
      m(0, 0) = cplx(c, k * v3);
      m(0, 1) = cplx(k * v2, k * v1);
      m(1, 0) = cplx(-k * v2, k * v1);
      m(1, 1) = cplx(c, -k * v3);
      return Element(m);
    } else {
      const Matrix h = algebra_matrix(x) * cplx(0.0, -1.0);
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      Eigen::Matrix<cplx, N, 1> ph;
      for (int k = 0; k < N; ++k) ph(k) = std::polar(1.0, es.eigenvalues()(k));
      return Element(es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint());
    }
  }

  /// Odd logarithm: log(g^-1) == -log(g) holds bitwise.
  static Algebra log(const Element& g) {
    const Algebra a = branch_log(g.matrix());
    const Algebra b = branch_log(g.matrix().adjoint());
    return (a - b) * 0.5;
  }

  static ClassPoint class_point(const Element& g) {
    if constexpr (N == 2) {
      const Matrix& m = g.matrix();
      const double c = 0.5 * (m(0, 0) + m(1, 1)).real();
      const double s1 = 0.5 * (m(0, 1) + m(1, 0)).imag();
      const double s2 = 0.5 * (m(0, 1) - m(1, 0)).real();
      const double s3 = 0.5 * (m(0, 0) - m(1, 1)).imag();
      return {std::atan2(std::sqrt(s1 * s1 + s2 * s2 + s3 * s3), c)};
    } else {
      Eigen::ComplexEigenSolver<Matrix> es(g.matrix(), false);
      const auto& ev = es.eigenvalues();
      return {std::arg(ev(0)), std::arg(ev(1))};
    }
  }

  static Element from_class_point(const ClassPoint& c) {
    Matrix m = Matrix::Zero();
    if constexpr (N == 2) {
      m(0, 0) = std::polar(1.0, c[0]);
      m(1, 1) = std::polar(1.0, -c[0]);
    } else {
      m(0, 0) = std::polar(1.0, c[0]);
      m(1, 1) = std::polar(1.0, c[1]);
      m(2, 2) = std::polar(1.0, -c[0] - c[1]);
    }
    return Element(m);
  }

  /// Eigen-angles of the minimal-norm traceless logarithm.
  static std::array<double, N> lifted_angles(const ClassPoint& c) {
    if constexpr (N == 2) {
      const double a = std::clamp(std::abs(wrap_angle(c[0])), 0.0, pi);
      return {a, -a};
    } else {
      return detail::su3_min_norm_angles(c[0], c[1], -c[0] - c[1]);
    }
  }

  static double distance(const ClassPoint& c) {
    const auto a = lifted_angles(c);
    double s = 0.0;
    for (double t : a) s += t * t;
    return std::sqrt(s);
  }

  static cplx trace(const ClassPoint& c) {
    if constexpr (N == 2) {
      return 2.0 * std::cos(c[0]);
    } else {
      return std::polar(1.0, c[0]) + std::polar(1.0, c[1]) + std::polar(1.0, -c[0] - c[1]);
    }
  }

  static double re_trace(const ClassPoint& c) { return trace(c).real(); }

  static Element haar(Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    if constexpr (N == 2) {
      double a[4];
      double nrm = 0.0;
      do {
        nrm = 0.0;
        for (double& v : a) {
          v = g(rng);
          nrm += v * v;
        }
      } while (nrm < 1e-300);
      nrm = std::sqrt(nrm);
      for (double& v : a) v /= nrm;
      Matrix m;
      m(0, 0) = cplx(a[0], a[3]);
      m(0, 1) = cplx(a[2], a[1]);
      m(1, 0) = cplx(-a[2], a[1]);
      m(1, 1) = cplx(a[0], -a[3]);
      return Element(m);
    } else {
      Matrix z;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) z(i, j) = cplx(g(rng), g(rng));
      Eigen::HouseholderQR<Matrix> qr(z);
      Matrix q = qr.householderQ();
      const Matrix r = qr.matrixQR().template triangularView<Eigen::Upper>();
      for (int k = 0; k < N; ++k) {
        const cplx d = r(k, k);
        q.col(k) *= d / std::abs(d);
      }
      q *= std::pow(q.determinant(), -1.0 / N);
      return Element(q);
    }
  }

 private:
  static Algebra branch_log(const Matrix& m) {
    if constexpr (N == 2) {
      const double c = 0.5 * (m(0, 0) + m(1, 1)).real();
      const double s1 = 0.5 * (m(0, 1) + m(1, 0)).imag();
      const double s2 = 0.5 * (m(0, 1) - m(1, 0)).real();
      const double s3 = 0.5 * (m(0, 0) - m(1, 1)).imag();
      const double s = std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
      const double alpha = std::atan2(s, c);
      if (pi - alpha < kCutLocusTol) throw CutLocusError("SU(2) log at the cut locus");
      const double k = s > 0.0 ? alpha / s : 1.0;
      Algebra x;
      x << std::numbers::sqrt2 * k * s1, std::numbers::sqrt2 * k * s2,
          std::numbers::sqrt2 * k * s3;
      return x;
    } else {
      Eigen::ComplexSchur<Matrix> schur(m);
      const Matrix& t = schur.matrixT();
      std::array<double, N> th{};
      for (int k = 0; k < N; ++k) {
        if (std::abs(t(k, k) + 1.0) < kCutLocusTol)
          throw CutLocusError("SU(3) log at the cut locus");
        th[k] = std::arg(t(k, k));
      }
      const auto lift = detail::su3_min_norm_angles(th[0], th[1], th[2]);
      Eigen::Matrix<cplx, N, 1> d;
      for (int k = 0; k < N; ++k) d(k) = cplx(0.0, lift[k]);
      const Matrix& q = schur.matrixU();
      return algebra_coords(q * d.asDiagonal() * q.adjoint());
    }
  }
};

using SU2 = SU<2>;
using SU3 = SU<3>;

template <class G>
concept StructureGroup = requires {
  typename G::Element;
  typename G::Algebra;
  typename G::ClassPoint;
  { G::dim } -> std::convertible_to<int>;
};

// ---------------------------------------------------------------------------
// Free-function surface

template <class E>
E multiply(const E& a, const E& b) {
  return a * b;
}

template <class E>
E inverse(const E& a) {
  return a.inverse();
}

/// h a h^-1
template <class E>
E conjugate(const E& a, const E& h) {
  return h * a * h.inverse();
}

template <class G>
typename G::Element exp_map(const typename G::Algebra& x) {
  return G::exp(x);
}

template <class E>
auto log_map(const E& g) {
  return E::group::log(g);
}

template <class E>
double geodesic_distance(const E& g) {
  using G = typename E::group;
  return G::distance(G::class_point(g));
}

template <class G>
typename G::Element haar_sample(Rng& rng) {
  return G::haar(rng);
}

/// Haar volume of the open geodesic ball of radius r (Haar normalized to 1).
template <class G>
double ball_volume(double r);

template <>
inline double ball_volume<U1>(double r) {
  return std::clamp(r, 0.0, pi) / pi;
}

template <>
inline double ball_volume<SU2>(double r) {
  const double a = std::clamp(r / std::numbers::sqrt2, 0.0, pi);
  return (a - std::sin(a) * std::cos(a)) / pi;
}

template <>
inline double ball_volume<SU3>(double r) {
  // Weyl integration over the torus restricted to the ball; midpoint rule.
  if (r <= 0.0) return 0.0;
  const double half = std::min(r, pi);
  constexpr int M = 1024;
  const double h = 2.0 * half / M;
  double acc = 0.0;
  for (int i = 0; i < M; ++i) {
    const double t1 = -half + (i + 0.5) * h;
    for (int j = 0; j < M; ++j) {
      const double t2 = -half + (j + 0.5) * h;
      if (SU3::distance({t1, t2}) >= r) continue;
      const double t3 = -t1 - t2;
      const double d = 64.0 * std::pow(std::sin(0.5 * (t1 - t2)), 2) *
                       std::pow(std::sin(0.5 * (t1 - t3)), 2) *
                       std::pow(std::sin(0.5 * (t2 - t3)), 2);
      acc += d;
    }
  }
  return std::min(1.0, acc * h * h / (24.0 * pi * pi));
}

/// Uniform point of the unit ball in R^D.
template <int D>
Eigen::Matrix<double, D, 1> uniform_unit_ball(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Matrix<double, D, 1> v;
  double nrm = 0.0;
  do {
    for (int a = 0; a < D; ++a) v(a) = g(rng);
    nrm = v.norm();
  } while (nrm < 1e-300);
  return v * (std::pow(u(rng), 1.0 / D) / nrm);
}

/// Haar measure restricted to the geodesic ball of radius eps, 0 < eps < pi.
///
/// Samples the Lie-algebra ball uniformly and corrects by the Jacobian of the
/// exponential map, prod over roots of (sin(r/2)/(r/2))^2 <= 1.
template <class G>
typename G::Element word_ball_sample(double eps, Rng& rng, int* tries = nullptr) {
  if (!(eps > 0.0 && eps < pi)) throw std::invalid_argument("word_ball_sample: eps must be in (0, pi)");
  if constexpr (G::id == GroupId::U1) {
    std::uniform_real_distribution<double> u(-eps, eps);
    if (tries) *tries = 1;
    return typename G::Element(u(rng));
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 1;; ++attempt) {
      const typename G::Algebra x = uniform_unit_ball<G::dim>(rng) * eps;
      const typename G::Element g = G::exp(x);
      const auto th = G::lifted_angles(G::class_point(g));
      double jac = 1.0;
      for (int i = 0; i < G::n; ++i)
        for (int j = i + 1; j < G::n; ++j) {
          const double s = detail::sinc(0.5 * (th[i] - th[j]));
          jac *= s * s;
        }
      if (u(rng) < jac) {
        if (tries) *tries = attempt;
        return g;
      }
    }
  }
}

/// Runtime dispatch: calls f.template operator()<G>() for the matching group.
template <class F>
decltype(auto) with_group(GroupId id, F&& f) {
  switch (id) {
    case GroupId::U1: return f.template operator()<U1>();
    case GroupId::SU2: return f.template operator()<SU2>();
    case GroupId::SU3: return f.template operator()<SU3>();
  }
  throw std::invalid_argument("bad group id");
}

}  // namespace carpet
