#pragma once

// Class functions as truncated character series, with convolution,
// distances, normalization and the eps-gradient functional.

#include "carpetlab/irreps.hpp"
#include "carpetlab/quadrature.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace carpet {

class QuadratureUnconverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonMarkovError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class G>
class ClassFunction {
 public:
  using ClassPoint = typename G::ClassPoint;
  using Element = typename G::Element;
  using Pointwise = std::function<double(const ClassPoint&)>;

  ClassFunction() = default;
  ClassFunction(std::shared_ptr<const IrrepTable<G>> table, std::vector<double> coeffs)
      : table_(std::move(table)), coeffs_(std::move(coeffs)) {
    if (!table_ || coeffs_.size() != table_->size())
      throw std::invalid_argument("coefficient count does not match irrep table");
  }

  const IrrepTable<G>& table() const { return *table_; }
  std::shared_ptr<const IrrepTable<G>> table_ptr() const { return table_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }

  double coeff(const IrrepLabel<G>& l) const {
    const auto i = table_->index_of(l);
    return i < 0 ? 0.0 : coeffs_[static_cast<std::size_t>(i)];
  }
  double trivial_coeff() const { return coeffs_[table_->trivial]; }

  /// Closed-form evaluator; preferred over the series when present.
  const Pointwise& pointwise() const { return pointwise_; }
  bool has_pointwise() const { return static_cast<bool>(pointwise_); }
  void set_pointwise(Pointwise f) { pointwise_ = std::move(f); }

  /// Optional unnormalized action S with f = exp(-S) / Z.
  const Pointwise& action() const { return action_; }
  void set_action(Pointwise s) { action_ = std::move(s); }

  double quadrature_error() const { return quad_error_; }
  void set_quadrature_error(double e) { quad_error_ = e; }

  double series(const ClassPoint& c) const { return series_at_trace(G::trace(c)); }

  double series_at_trace(cplx t) const {
    thread_local std::vector<cplx> chi;
    chi.resize(table_->size());
    table_->characters(t, chi);
    double s = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) s += coeffs_[i] * chi[i].real();
    return s;
  }

  double operator()(const ClassPoint& c) const {
    return pointwise_ ? pointwise_(c) : series(c);
  }
  double at(const Element& g) const { return (*this)(G::class_point(g)); }

 private:
  std::shared_ptr<const IrrepTable<G>> table_;
  std::vector<double> coeffs_;
  Pointwise pointwise_;
  Pointwise action_;
  double quad_error_ = 0.0;
};

namespace detail {

template <class G>
std::vector<double> project_at(const std::function<double(const typename G::ClassPoint&)>& f,
                               const IrrepTable<G>& table, int M, double* max_imag) {
  const auto q = weyl_quadrature<G>(M);
  const std::size_t n = table.size();
  const std::size_t npts = q->points.size();
  std::vector<cplx> chi(n);
  // Per-irrep terms are accumulated in blocks and then pairwise summed, which
  // keeps the result independent of any future parallel split.
  constexpr std::size_t kBlock = 256;
  const std::size_t nblocks = (npts + kBlock - 1) / kBlock;
  std::vector<double> re(n * nblocks, 0.0), im(n * nblocks, 0.0);
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = b * kBlock, hi = std::min(npts, lo + kBlock);
    for (std::size_t k = lo; k < hi; ++k) {
      const double fw = f(q->points[k]) * q->weights[k];
      if (fw == 0.0) continue;
      table.characters(G::trace(q->points[k]), chi);
      for (std::size_t i = 0; i < n; ++i) {
        re[i * nblocks + b] += fw * chi[i].real();
        im[i * nblocks + b] -= fw * chi[i].imag();
      }
    }
  }
  std::vector<double> out(n);
  double mi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = pairwise_sum(std::span<const double>(re.data() + i * nblocks, nblocks));
    mi = std::max(mi, std::abs(pairwise_sum(std::span<const double>(im.data() + i * nblocks, nblocks))));
  }
  if (max_imag) *max_imag = mi;
  return out;
}

}  // namespace detail

struct ProjectOptions {
  int resolution = 0;   // 0: group default
  double tol = 1e-9;    // relative to max |f_lambda| / d_lambda
  bool check = true;    // compare against the doubled grid
  int escalate = -1;    // extra doublings tried before giving up; -1: 4 for rank 1, 1 otherwise
};

/// Character coefficients f_lambda = int f conj(chi_lambda) dU.
template <class G>
ClassFunction<G> project(const std::function<double(const typename G::ClassPoint&)>& f,
                         std::shared_ptr<const IrrepTable<G>> table, ProjectOptions opt = {}) {
  int M = opt.resolution > 0 ? opt.resolution : default_quadrature_resolution<G>();
  double imag = 0.0;
  std::vector<double> c = detail::project_at<G>(f, *table, M, &imag);
  double err = 0.0;
  if (opt.check) {
    int left = opt.escalate >= 0 ? opt.escalate : (G::rank == 1 ? 4 : 1);
    double imag2 = 0.0, scale = 0.0;
    std::vector<double> c2;
    for (;;) {
      c2 = detail::project_at<G>(f, *table, 2 * M, &imag2);
      err = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(c2[i] - c[i]));
      scale = std::numeric_limits<double>::min();
      for (std::size_t i = 0; i < c2.size(); ++i) scale = std::max(scale, std::abs(c2[i]) / table->dims[i]);
      if (err <= opt.tol * scale || left-- <= 0) break;
      M *= 2;
      c = c2;
    }
    if (err > opt.tol * scale) {
      std::ostringstream os;
      os << "projection unconverged: grid doubling " << M << "->" << 2 * M << " moved a coefficient by "
         << err << " (tolerance " << opt.tol * scale << ")";
      throw QuadratureUnconverged(os.str());
    }
    c = std::move(c2);
    imag = imag2;
  }
  const double cmax = std::max(1.0, std::abs(c[table->trivial]));
  if (imag > 1e-10 * cmax)
    throw std::domain_error("projected coefficients are not real: input is not a symmetric class function");
  ClassFunction<G> out(std::move(table), std::move(c));
  out.set_quadrature_error(err);
  out.set_pointwise(f);
  return out;
}

template <class G>
ClassFunction<G> project(const std::function<double(const typename G::ClassPoint&)>& f,
                         ProjectOptions opt = {}) {
  return project<G>(f, irrep_table<G>(), opt);
}

/// Class function with the given coefficients and no closed form.
template <class G>
ClassFunction<G> from_coeffs(std::shared_ptr<const IrrepTable<G>> table, std::vector<double> c) {
  return ClassFunction<G>(std::move(table), std::move(c));
}

/// Coefficients d_lambda: the delta mass at the identity, truncated.
template <class G>
ClassFunction<G> delta_approximant(std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>()) {
  std::vector<double> c(table->dims.begin(), table->dims.end());
  return ClassFunction<G>(std::move(table), std::move(c));
}

template <class G>
void require_same_table(const ClassFunction<G>& f, const ClassFunction<G>& g) {
  if (f.table().cutoff != g.table().cutoff)
    throw std::invalid_argument("class functions use different irrep cutoffs");
}

/// (f * g)_lambda = f_lambda g_lambda / d_lambda
template <class G>
ClassFunction<G> convolve(const ClassFunction<G>& f, const ClassFunction<G>& g) {
  require_same_table(f, g);
  const auto& d = f.table().dims;
  std::vector<double> c(f.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = f.coeffs()[i] * g.coeffs()[i] / d[i];
  return ClassFunction<G>(f.table_ptr(), std::move(c));
}

/// p^{*k}, coefficients d_lambda (p_lambda / d_lambda)^k.
template <class G>
ClassFunction<G> convolve_power(const ClassFunction<G>& p, int k) {
  if (k < 1) throw std::invalid_argument("convolve_power: k must be >= 1");
  if (k == 1) return p;
  const auto& d = p.table().dims;
  std::vector<double> c(p.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = p.coeffs()[i] / d[i];
    if (std::abs(r) > 1.0 + 1e-9) {
      std::ostringstream os;
      os << "coefficient ratio " << r << " at irrep " << label_string<G>(p.table().labels[i])
         << " exceeds 1: not a Markov kernel";
      throw NonMarkovError(os.str());
    }
    c[i] = d[i] * std::pow(r, k);
  }
  return ClassFunction<G>(p.table_ptr(), std::move(c));
}

/// Divides by the trivial coefficient so that the Haar integral is 1.
template <class G>
ClassFunction<G> normalize(const ClassFunction<G>& f) {
  const double z = f.trivial_coeff();
  if (!(z > 0.0)) throw std::domain_error("normalize: trivial coefficient is not positive");
  std::vector<double> c(f.coeffs());
  for (double& v : c) v /= z;
  ClassFunction<G> out(f.table_ptr(), std::move(c));
  if (f.has_pointwise()) {
    auto pw = f.pointwise();
    out.set_pointwise([pw, z](const typename G::ClassPoint& x) { return pw(x) / z; });
  }
  if (f.action()) out.set_action(f.action());
  out.set_quadrature_error(f.quadrature_error() / z);
  return out;
}

/// Max of |f - g| over the uniform class grid.
template <class G>
double sup_distance(const ClassFunction<G>& f, const ClassFunction<G>& g,
                    int grid = default_grid_resolution<G>()) {
  double m = 0.0;
  for (const auto& c : class_grid<G>(grid)) m = std::max(m, std::abs(f(c) - g(c)));
  return m;
}

/// 1/2 int |f - g| dU by Weyl quadrature.
template <class G>
double tv_distance(const ClassFunction<G>& f, const ClassFunction<G>& g,
                   int resolution = default_quadrature_resolution<G>()) {
  const auto q = weyl_quadrature<G>(resolution);
  std::vector<double> t(q->points.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    t[k] = q->weights[k] * std::abs(f(q->points[k]) - g(q->points[k]));
  return 0.5 * pairwise_sum(t);
}

/// int f dU by Weyl quadrature of the evaluator.
template <class G>
double haar_integral(const std::function<double(const typename G::ClassPoint&)>& f,
                     int resolution = default_quadrature_resolution<G>()) {
  const auto q = weyl_quadrature<G>(resolution);
  std::vector<double> t(q->points.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = q->weights[k] * f(q->points[k]);
  return pairwise_sum(t);
}

// ---------------------------------------------------------------------------
// eps-gradients

/// Deterministic probes exp(+-r T^a), r = eps (1 - 1e-9) j / radii, j = 1..radii.
template <class G>
std::vector<typename G::Element> ball_probes(double eps, int radii) {
  std::vector<typename G::Element> out;
  const double rmax = eps * (1.0 - 1e-9);
  for (int a = 0; a < G::dim; ++a)
    for (int j = 1; j <= radii; ++j)
      for (double s : {1.0, -1.0}) {
        typename G::Algebra x = G::Algebra::Zero();
        x(a) = s * rmax * j / radii;
        out.push_back(G::exp(x));
      }
  return out;
}

struct GradOptions {
  int radii = 32;
  int trials = 0;
  std::uint64_t seed = 0;
};

/// sup_{y in B_eps} |Q(x) - Q(xy)| over probes and word-ball samples.
/// A lower bound on the true supremum.
template <class G, class F>
double ball_oscillation(const F& Q, double eps, const typename G::Element& x,
                        const std::vector<typename G::Element>& probes, int trials, Rng& rng) {
  const double q0 = Q(G::class_point(x));
  double m = 0.0;
  for (const auto& y : probes) m = std::max(m, std::abs(q0 - Q(G::class_point(x * y))));
  for (int t = 0; t < trials; ++t) {
    const auto y = word_ball_sample<G>(eps, rng);
    m = std::max(m, std::abs(q0 - Q(G::class_point(x * y))));
  }
  return m;
}

/// eps^-1 sup_{y in B_eps} |Q(x) - Q(xy)|, lower-bound estimate.
template <class G>
double grad_eps(const ClassFunction<G>& Q, double eps, const typename G::Element& x, int trials,
                Rng& rng, int radii = 32) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_eps: eps must be positive");
  const auto probes = ball_probes<G>(eps, radii);
  return ball_oscillation<G>(Q, eps, x, probes, trials, rng) / eps;
}

struct GridSup {
  double value = 0.0;   // on the fine grid
  double coarse = 0.0;  // on the half-resolution grid
  int grid = 0;
  double relative_change() const {
    return value > 0.0 ? std::abs(value - coarse) / value : 0.0;
  }
};

/// Max of grad_eps over torus grid points, with the half grid as a check.
template <class G>
GridSup sup_grad_eps(const ClassFunction<G>& Q, double eps, int grid, GradOptions opt = {}) {
  const auto probes = ball_probes<G>(eps, opt.radii);
  Rng rng(opt.seed);
  GridSup r;
  r.grid = grid;
  const auto pts = class_grid<G>(grid);
  const auto coarse = class_grid<G>(std::max(1, grid / 2));
  for (const auto& c : pts)
    r.value = std::max(r.value, ball_oscillation<G>(Q, eps, G::from_class_point(c), probes, opt.trials, rng));
  for (const auto& c : coarse)
    r.coarse = std::max(r.coarse, ball_oscillation<G>(Q, eps, G::from_class_point(c), probes, opt.trials, rng));
  r.value /= eps;
  r.coarse /= eps;
  return r;
}

// ---------------------------------------------------------------------------
// Fast pointwise evaluation for Monte Carlo

/// U(1): periodic linear interpolation on a cached grid unless a closed form
/// exists.  SU(n): closed form or the trimmed character series.
template <class G>
class FastEvaluator {
 public:
  static constexpr int kGrid = 8192;

  FastEvaluator() = default;
  explicit FastEvaluator(const ClassFunction<G>& f) : f_(std::make_shared<ClassFunction<G>>(f)) {
    if (f.has_pointwise()) return;
    if constexpr (G::id == GroupId::U1) {
      grid_.resize(kGrid + 1);
      for (int m = 0; m <= kGrid; ++m) grid_[m] = f.series({-pi + 2.0 * pi * m / kGrid});
    } else {
      // Drop trailing coefficients that cannot affect the sum at double precision.
      const auto& c = f.coeffs();
      const auto& d = f.table().dims;
      double total = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) total += std::abs(c[i]) * d[i];
      std::size_t last = 0;
      for (std::size_t i = 0; i < c.size(); ++i)
        if (std::abs(c[i]) * d[i] > 1e-17 * total) last = i;
      int keep = 0;
      for (std::size_t i = 0; i <= last; ++i) keep = std::max(keep, irrep_size<G>(f.table().labels[i]));
      trimmed_ = std::make_shared<ClassFunction<G>>(trim(f, keep));
    }
  }

  double operator()(const typename G::ClassPoint& c) const {
    if (f_->has_pointwise()) return f_->pointwise()(c);
    if constexpr (G::id == GroupId::U1) {
      const double u = (wrap_angle(c[0]) + pi) / (2.0 * pi) * kGrid;
      const int i = std::min(kGrid - 1, static_cast<int>(u));
      const double t = u - i;
      return (1.0 - t) * grid_[i] + t * grid_[i + 1];
    } else {
      return trimmed_->series(c);
    }
  }

  double at(const typename G::Element& g) const { return (*this)(G::class_point(g)); }

  /// For U(1) this avoids the class-point round trip.
  double at_angle(double theta) const { return (*this)(typename G::ClassPoint{theta}); }

  const ClassFunction<G>& function() const { return *f_; }

 private:
  static ClassFunction<G> trim(const ClassFunction<G>& f, int keep) {
    auto t = irrep_table<G>(keep);
    std::vector<double> c(t->size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = f.coeff(t->labels[i]);
    return ClassFunction<G>(t, std::move(c));
  }

  std::shared_ptr<ClassFunction<G>> f_;
  std::shared_ptr<ClassFunction<G>> trimmed_;
  std::vector<double> grid_;
};

// ---------------------------------------------------------------------------
// CSV

template <class G>
void write_csv(std::ostream& os, const ClassFunction<G>& f) {
  os << "lambda,dim,casimir,coeff\n";
  const auto& t = f.table();
  char buf[64];
  for (std::size_t i = 0; i < f.size(); ++i) {
    os << label_string<G>(t.labels[i]) << ',' << t.dims[i] << ',';
    std::snprintf(buf, sizeof buf, "%.17g", t.casimirs[i]);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", f.coeffs()[i]);
    os << buf << '\n';
  }
}

/// Reads `lambda,dim,casimir,coeff`; the irrep table is sized to the largest
/// label present and missing labels get coefficient 0.
template <class G>
ClassFunction<G> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("lambda,dim,casimir,coeff", 0) != 0)
    throw std::invalid_argument("class function CSV: missing header");
  std::vector<std::pair<IrrepLabel<G>, double>> rows;
  int cutoff = 0;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string lab, dim, cas, coeff;
    if (!std::getline(ss, lab, ',') || !std::getline(ss, dim, ',') || !std::getline(ss, cas, ',') ||
        !std::getline(ss, coeff))
      throw std::invalid_argument("class function CSV: malformed line " + std::to_string(lineno));
    const auto l = parse_label<G>(lab);
    if (std::stoi(dim) != irrep_dimension<G>(l))
      throw std::invalid_argument("class function CSV: wrong dimension on line " + std::to_string(lineno));
    cutoff = std::max(cutoff, irrep_size<G>(l));
    rows.emplace_back(l, std::stod(coeff));
  }
  auto t = irrep_table<G>(cutoff);
  std::vector<double> c(t->size(), 0.0);
  for (const auto& [l, v] : rows) {
    const auto i = t->index_of(l);
    if (i < 0) throw std::invalid_argument("class function CSV: label outside table");
    c[static_cast<std::size_t>(i)] = v;
  }
  return ClassFunction<G>(t, std::move(c));
}

}  // namespace carpet
