#pragma once

// Irreducible representations, characters and Casimir eigenvalues.
//
// Labels:  U(1)  n in [-K, K]           dim 1
//          SU(2) k = 2j in [0, K]       dim k+1
//          SU(3) (p, q) with p+q <= K   dim (p+1)(q+1)(p+q+2)/2
//
// Characters are evaluated from the trace alone:
//   U(1):  chi_n = exp(i n theta)
//   SU(2): chi_k = U_k(Tr/2), Chebyshev polynomials of the second kind
//   SU(3): chi_(p,q) = h_{p+q} h_q - h_{p+q+1} h_{q-1} (Jacobi-Trudi) with
//          h_k = t h_{k-1} - conj(t) h_{k-2} + h_{k-3},  t = Tr U.
//
// The Casimir c2 of each irrep is defined as the eigenvalue of -Delta on its
// character, Delta = sum_a T^a T^a, and is measured by a Richardson-
// extrapolated central difference Laplacian at generic group elements.

#include "carpetlab/group.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace carpet {

template <class G>
using IrrepLabel = std::array<int, G::rank>;

template <class G>
int irrep_dimension(const IrrepLabel<G>& l) {
  if constexpr (G::id == GroupId::U1) return 1;
  else if constexpr (G::id == GroupId::SU2) return l[0] + 1;
  else return (l[0] + 1) * (l[1] + 1) * (l[0] + l[1] + 2) / 2;
}

/// Highest-weight size used to pick finite-difference steps.
template <class G>
int irrep_size(const IrrepLabel<G>& l) {
  if constexpr (G::id == GroupId::U1) return std::abs(l[0]);
  else if constexpr (G::id == GroupId::SU2) return l[0];
  else return l[0] + l[1];
}

/// Closed-form Casimirs under <X,Y> = -Tr(XY); cross-checks only.
template <class G>
double closed_form_casimir(const IrrepLabel<G>& l) {
  if constexpr (G::id == GroupId::U1) {
    return static_cast<double>(l[0]) * l[0];
  } else if constexpr (G::id == GroupId::SU2) {
    const double j = 0.5 * l[0];
    return 2.0 * j * (j + 1.0);
  } else {
    const double p = l[0], q = l[1];
    return 2.0 * (p * p + q * q + p * q + 3.0 * p + 3.0 * q) / 3.0;
  }
}

template <class G>
std::string label_string(const IrrepLabel<G>& l) {
  if constexpr (G::id == GroupId::U1) {
    return std::to_string(l[0]);
  } else if constexpr (G::id == GroupId::SU2) {
    return l[0] % 2 == 0 ? std::to_string(l[0] / 2) : std::to_string(l[0]) + "/2";
  } else {
    return std::to_string(l[0]) + ":" + std::to_string(l[1]);
  }
}

template <class G>
IrrepLabel<G> parse_label(const std::string& s) {
  try {
    if constexpr (G::id == GroupId::U1) {
      return {std::stoi(s)};
    } else if constexpr (G::id == GroupId::SU2) {
      const auto slash = s.find('/');
      if (slash == std::string::npos) return {2 * std::stoi(s)};
      if (s.substr(slash + 1) != "2") throw std::invalid_argument(s);
      return {std::stoi(s.substr(0, slash))};
    } else {
      const auto colon = s.find(':');
      if (colon == std::string::npos) throw std::invalid_argument(s);
      return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad irrep label '" + s + "' for " +
                                std::string(group_name(G::id)));
  }
}

/// Characters of every irrep with size <= cutoff, in table order, as a
/// function of the trace.  `out` must hold table().size() values.
template <class G>
void characters_from_trace(cplx t, int cutoff, std::span<cplx> out) {
  if constexpr (G::id == GroupId::U1) {
    // out[n + K] = t^n, |t| = 1
    const double th = std::arg(t);
    for (int n = -cutoff; n <= cutoff; ++n) out[n + cutoff] = std::polar(1.0, n * th);
  } else if constexpr (G::id == GroupId::SU2) {
    const double x = 0.5 * t.real();
    double u0 = 1.0, u1 = 2.0 * x;
    out[0] = u0;
    if (cutoff >= 1) out[1] = u1;
    for (int k = 2; k <= cutoff; ++k) {
      const double u2 = 2.0 * x * u1 - u0;
      out[k] = u2;
      u0 = u1;
      u1 = u2;
    }
  } else {
    std::vector<cplx> h(cutoff + 3);
    // h[k + 1] holds h_k, h_{-1} = 0
    h[0] = 0.0;
    h[1] = 1.0;
    const cplx tc = std::conj(t);
    for (int k = 1; k <= cutoff + 1; ++k) {
      cplx v = t * h[k] - tc * h[k - 1];
      if (k >= 2) v += h[k - 2];
      h[k + 1] = v;
    }
    std::size_t idx = 0;
    for (int s = 0; s <= cutoff; ++s)
      for (int q = 0; q <= s; ++q) {
        const int p = s - q;
        out[idx++] = h[p + q + 1] * h[q + 1] - h[p + q + 2] * h[q];
      }
  }
}

template <class G>
struct IrrepTable {
  using group_type = G;
  int cutoff = 0;
  std::vector<IrrepLabel<G>> labels;
  std::vector<int> dims;
  std::vector<double> casimirs;
  std::size_t trivial = 0;

  std::size_t size() const { return labels.size(); }

  std::ptrdiff_t index_of(const IrrepLabel<G>& l) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  void characters(cplx trace, std::span<cplx> out) const {
    characters_from_trace<G>(trace, cutoff, out);
  }
};

template <class G>
constexpr int default_cutoff() {
  if constexpr (G::id == GroupId::U1) return 256;
  else if constexpr (G::id == GroupId::SU2) return 128;
  else return 24;
}

namespace detail {

template <class G>
std::vector<IrrepLabel<G>> enumerate_labels(int K) {
  std::vector<IrrepLabel<G>> v;
  if constexpr (G::id == GroupId::U1) {
    for (int n = -K; n <= K; ++n) v.push_back({n});
  } else if constexpr (G::id == GroupId::SU2) {
    for (int k = 0; k <= K; ++k) v.push_back({k});
  } else {
    for (int s = 0; s <= K; ++s)
      for (int q = 0; q <= s; ++q) v.push_back({s - q, q});
  }
  return v;
}

// Finite-difference Laplacian eigenvalues, one per label.
template <class G>
std::vector<double> measure_casimirs(const std::vector<IrrepLabel<G>>& labels, int K) {
  using E = typename G::Element;
  using A = typename G::Algebra;
  constexpr int kCandidates = 16;

  Rng rng(0x5eedc0ffeeULL);
  std::uniform_real_distribution<double> u(-1.3, 1.3);
  std::vector<E> centers;
  for (int c = 0; c < kCandidates; ++c) {
    A x;
    for (int a = 0; a < G::dim; ++a) x(a) = u(rng);
    centers.push_back(G::exp(x));
  }

  const std::size_t n = labels.size();
  std::vector<double> c2(n, 0.0);
  std::vector<double> best(n, -1.0);
  std::vector<cplx> f0(n), fp(n), fm(n);

  auto chars_at = [&](const E& g, std::vector<cplx>& out) {
    characters_from_trace<G>(g.trace(), K, out);
  };

  for (int s = 0; s <= K; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (irrep_size<G>(labels[i]) == s) members.push_back(i);
    if (members.empty()) continue;
    if (s == 0) {
      for (auto i : members) c2[i] = 0.0;
      continue;
    }
    const double h0 = 0.05 / (s + 1.0);
    for (const E& x : centers) {
      chars_at(x, f0);
      // D(h) for h0, h0/2, h0/4
      std::array<std::vector<cplx>, 3> lap;
      for (int lvl = 0; lvl < 3; ++lvl) {
        const double h = h0 / (1 << lvl);
        lap[lvl].assign(n, 0.0);
        for (int a = 0; a < G::dim; ++a) {
          A step = A::Zero();
          step(a) = h;
          chars_at(x * G::exp(step), fp);
          chars_at(x * G::exp(-step), fm);
          for (auto i : members) lap[lvl][i] += (fp[i] + fm[i] - 2.0 * f0[i]) / (h * h);
        }
      }
      for (auto i : members) {
        const double mag = std::abs(f0[i]);
        if (mag <= best[i]) continue;
        best[i] = mag;
        const cplx r1a = (4.0 * lap[1][i] - lap[0][i]) / 3.0;
        const cplx r1b = (4.0 * lap[2][i] - lap[1][i]) / 3.0;
        const cplx r2 = (16.0 * r1b - r1a) / 15.0;
        c2[i] = -(r2 * std::conj(f0[i])).real() / std::norm(f0[i]);
      }
    }
  }
  return c2;
}

template <class G>
std::shared_ptr<const IrrepTable<G>> build_irrep_table(int K) {
  auto t = std::make_shared<IrrepTable<G>>();
  t->cutoff = K;
  t->labels = enumerate_labels<G>(K);
  for (const auto& l : t->labels) t->dims.push_back(irrep_dimension<G>(l));
  t->casimirs = measure_casimirs<G>(t->labels, K);
  IrrepLabel<G> zero{};
  t->trivial = static_cast<std::size_t>(t->index_of(zero));
  return t;
}

}  // namespace detail

/// Cached irrep table for a given cutoff.
template <class G>
std::shared_ptr<const IrrepTable<G>> irrep_table(int cutoff = default_cutoff<G>()) {
  if (cutoff < 0) throw std::invalid_argument("irrep cutoff must be nonnegative");
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const IrrepTable<G>>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[cutoff];
  if (!slot) slot = detail::build_irrep_table<G>(cutoff);
  return slot;
}

}  // namespace carpet
