#pragma once

// Wilson, Manton and Villain plaquette densities as normalized class
// functions, the two-sided quadratic action bound check, and the sign
// pattern of U(1) log-density Fourier coefficients.

#include "carpetlab/class_function.hpp"

namespace carpet {

enum class ActionKind { Wilson, Manton, Villain };

inline std::string_view action_name(ActionKind k) {
  switch (k) {
    case ActionKind::Wilson: return "wilson";
    case ActionKind::Manton: return "manton";
    case ActionKind::Villain: return "villain";
  }
  return "?";
}

inline ActionKind parse_action(std::string_view s) {
  std::string t(s);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "wilson") return ActionKind::Wilson;
  if (t == "manton") return ActionKind::Manton;
  if (t == "villain" || t == "heat-kernel") return ActionKind::Villain;
  throw std::invalid_argument("unknown action '" + std::string(s) + "'");
}

namespace detail {
inline void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("coupling beta must be positive and finite");
}
}  // namespace detail

/// exp(-beta ReTr(1 - x)), normalized.
template <class G>
ClassFunction<G> wilson_density(double beta, std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>(),
                                ProjectOptions opt = {}) {
  detail::require_beta(beta);
  auto S = [beta](const typename G::ClassPoint& c) { return beta * (G::n - G::re_trace(c)); };
  auto f = project<G>([S](const typename G::ClassPoint& c) { return std::exp(-S(c)); }, std::move(table), opt);
  f.set_action(S);
  return normalize(f);
}

/// exp(-beta rho(x)^2), normalized.
template <class G>
ClassFunction<G> manton_density(double beta, std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>(),
                                ProjectOptions opt = {}) {
  detail::require_beta(beta);
  auto S = [beta](const typename G::ClassPoint& c) {
    const double r = G::distance(c);
    return beta * r * r;
  };
  auto f = project<G>([S](const typename G::ClassPoint& c) { return std::exp(-S(c)); }, std::move(table), opt);
  f.set_action(S);
  return normalize(f);
}

/// Bound on sup |V - V_truncated| <= sum over omitted irreps of d^2 exp(-c2 / 2 beta).
/// Omitted Casimirs use the closed forms; only shells beyond the cutoff enter.
template <class G>
double villain_tail_bound(double beta, int cutoff) {
  double tail = 0.0;
  for (int s = cutoff + 1; s <= cutoff + 4096; ++s) {
    double shell = 0.0;
    if constexpr (G::id == GroupId::U1) {
      for (int n : {s, -s}) shell += std::exp(-closed_form_casimir<G>({n}) / (2.0 * beta));
    } else if constexpr (G::id == GroupId::SU2) {
      const double d = s + 1.0;
      shell = d * d * std::exp(-closed_form_casimir<G>({s}) / (2.0 * beta));
    } else {
      for (int q = 0; q <= s; ++q) {
        const IrrepLabel<G> l{s - q, q};
        const double d = irrep_dimension<G>(l);
        shell += d * d * std::exp(-closed_form_casimir<G>(l) / (2.0 * beta));
      }
    }
    tail += shell;
    if (shell < 1e-30 * std::max(tail, 1e-300) || shell < 1e-300) break;
  }
  return tail;
}

namespace detail {
// -log of the wrapped Gaussian sum_m exp(-(beta/2)(theta + 2 pi m)^2), up to a constant.
inline double wrapped_gaussian_action(double beta, double theta) {
  const double t = wrap_angle(theta);
  double lo = std::numeric_limits<double>::infinity();
  std::array<double, 41> e{};
  for (int m = -20; m <= 20; ++m) {
    const double u = t + 2.0 * pi * m;
    e[m + 20] = 0.5 * beta * u * u;
    lo = std::min(lo, e[m + 20]);
  }
  double s = 0.0;
  for (double v : e) s += std::exp(lo - v);
  return lo - std::log(s);
}
}  // namespace detail

/// Heat kernel e^{Delta / 2 beta}: coefficients d exp(-c2 / 2 beta).
template <class G>
ClassFunction<G> villain_density(double beta, std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>()) {
  detail::require_beta(beta);
  const double tail = villain_tail_bound<G>(beta, table->cutoff);
  if (tail > 1e-9) {
    std::ostringstream os;
    os << "Villain series at beta=" << beta << " truncated at cutoff " << table->cutoff
       << " leaves tail " << tail;
    throw TruncationError(os.str());
  }
  std::vector<double> c(table->size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = table->dims[i] * std::exp(-table->casimirs[i] / (2.0 * beta));
  ClassFunction<G> v(std::move(table), std::move(c));
  if constexpr (G::id == GroupId::U1) {
    v.set_action([beta](const typename G::ClassPoint& x) {
      return detail::wrapped_gaussian_action(beta, x[0]) - detail::wrapped_gaussian_action(beta, 0.0);
    });
  } else {
    const double v1 = v.series(G::class_point(G::identity()));
    auto vp = std::make_shared<ClassFunction<G>>(v);
    v.set_action([vp, v1](const typename G::ClassPoint& x) {
      const double r = vp->series(x) / v1;
      return r > 1e-12 ? -std::log(r) : std::numeric_limits<double>::quiet_NaN();
    });
  }
  return v;
}

template <class G>
ClassFunction<G> action_density(ActionKind kind, double beta,
                                std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>()) {
  switch (kind) {
    case ActionKind::Wilson: return wilson_density<G>(beta, std::move(table));
    case ActionKind::Manton: return manton_density<G>(beta, std::move(table));
    case ActionKind::Villain: return villain_density<G>(beta, std::move(table));
  }
  throw std::invalid_argument("bad action kind");
}

/// Coupling at which `kind` has quadratic part (beta/2) rho^2 near 1: beta for
/// Wilson and Villain, beta/2 for Manton.
inline double villain_matched_coupling(ActionKind kind, double beta) {
  return kind == ActionKind::Manton ? 0.5 * beta : beta;
}

/// p_N = kind at coupling N^2 beta (Manton: N^2 beta / 2), so p_N^{*N^2} -> V_beta.
template <class G>
ClassFunction<G> family_member(ActionKind kind, double beta, int N,
                               std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>()) {
  if (N < 1) throw std::invalid_argument("family index N must be >= 1");
  return action_density<G>(kind, static_cast<double>(N) * N * villain_matched_coupling(kind, beta),
                           std::move(table));
}

// ---------------------------------------------------------------------------
// Quadratic bounds on the action

class ViolationFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AssumptionRow {
  int N = 0;
  double lower_margin = 0.0;  // min over G of S/(N^2 rho^2) - theta_low
  double upper_margin = 0.0;  // min over B_{r/N} of Theta_high - S/(N^2 rho^2)
  std::array<double, 2> worst_lower_point{};
  std::array<double, 2> worst_upper_point{};
  int unresolved = 0;  // grid points where S could not be evaluated
};

struct AssumptionReport {
  double r = 0.0, theta_low = 0.0, theta_high = 0.0, tol = 0.0;
  std::vector<AssumptionRow> rows;

  bool ok() const {
    for (const auto& w : rows)
      if (w.lower_margin < -tol || w.upper_margin < -tol) return false;
    return true;
  }

  void require() const {
    std::ostringstream os;
    bool bad = false;
    for (const auto& w : rows) {
      if (w.lower_margin < -tol) {
        os << "lower bound fails at N=" << w.N << " x=(" << w.worst_lower_point[0] << ","
           << w.worst_lower_point[1] << ") margin " << w.lower_margin << "; ";
        bad = true;
      }
      if (w.upper_margin < -tol) {
        os << "upper bound fails at N=" << w.N << " x=(" << w.worst_upper_point[0] << ","
           << w.worst_upper_point[1] << ") margin " << w.upper_margin << "; ";
        bad = true;
      }
    }
    if (bad) throw ViolationFound(os.str());
  }
};

template <class G>
constexpr int default_assumption_grid() {
  if constexpr (G::rank == 1) return 4096;
  else return 256;
}

/// Checks theta_low N^2 rho^2 <= S_N on G and S_N <= Theta_high N^2 rho^2 on
/// B_{r/N}, with S_N(1) = 0, on a finite grid.  The ball grid is the class
/// grid rescaled into the ball.
template <class G>
AssumptionReport check_assumption_b(const std::function<ClassFunction<G>(int)>& family,
                                    const std::vector<int>& Ns, double r, double theta_low,
                                    double theta_high, int grid = default_assumption_grid<G>(),
                                    double tol = 1e-9) {
  if (!(r > 0.0 && r < pi)) throw std::invalid_argument("r must lie in (0, pi)");
  AssumptionReport rep{r, theta_low, theta_high, tol, {}};
  const auto global = class_grid<G>(grid);
  for (int N : Ns) {
    const auto p = family(N);
    if (!p.action()) throw std::invalid_argument("family member has no action evaluator");
    const auto& S = p.action();
    const double s0 = S(G::class_point(G::identity()));
    const double n2 = static_cast<double>(N) * N;
    AssumptionRow row;
    row.N = N;
    row.lower_margin = row.upper_margin = std::numeric_limits<double>::infinity();
    auto visit = [&](const typename G::ClassPoint& c, bool upper) {
      const double rho = G::distance(c);
      if (rho < 1e-9) return;
      const double s = S(c) - s0;
      if (!std::isfinite(s)) {
        ++row.unresolved;
        return;
      }
      const double ratio = s / (n2 * rho * rho);
      std::array<double, 2> pt{c[0], G::rank > 1 ? c[G::rank - 1] : 0.0};
      if (upper) {
        if (rho >= r / N) return;
        if (theta_high - ratio < row.upper_margin) {
          row.upper_margin = theta_high - ratio;
          row.worst_upper_point = pt;
        }
      } else if (ratio - theta_low < row.lower_margin) {
        row.lower_margin = ratio - theta_low;
        row.worst_lower_point = pt;
      }
    };
    for (const auto& c : global) visit(c, false);
    const double scale = (r / N) / pi;
    for (const auto& c : global) {
      auto d = c;
      for (auto& v : d) v *= scale;
      visit(d, true);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Positive definiteness of -U where f = exp(-U)

struct PositiveDefiniteReport {
  std::vector<double> coeffs;  // coeffs[k-1] = Fourier coefficient of log f at k = 1..K
  double min_coeff = 0.0;
  int argmin = 0;
  bool positive_definite = true;
};

/// Fourier coefficients (1/2pi) int log f(theta) e^{-ik theta} of a U(1) class
/// function, k = 1..K, by the trapezoid rule.
inline PositiveDefiniteReport check_positive_definite(const ClassFunction<U1>& f, int K = 64,
                                                      int M = 4096, double tol = 1e-8) {
  std::vector<double> logf(M);
  for (int m = 0; m < M; ++m) {
    const U1::ClassPoint c{-pi + 2.0 * pi * m / M};
    if (f.action()) {
      logf[m] = -f.action()(c);
    } else {
      const double v = f(c);
      if (!(v > 0.0)) throw std::domain_error("check_positive_definite: density is not strictly positive");
      logf[m] = std::log(v);
    }
  }
  PositiveDefiniteReport rep;
  rep.min_coeff = std::numeric_limits<double>::infinity();
  std::vector<double> t(M);
  for (int k = 1; k <= K; ++k) {
    for (int m = 0; m < M; ++m) t[m] = logf[m] * std::cos(k * (-pi + 2.0 * pi * m / M));
    const double ck = pairwise_sum(t) / M;
    rep.coeffs.push_back(ck);
    if (ck < rep.min_coeff) {
      rep.min_coeff = ck;
      rep.argmin = k;
    }
  }
  rep.positive_definite = rep.min_coeff >= -tol;
  return rep;
}

}  // namespace carpet
