#pragma once

// Box lattices, carpet refinements and configurations of group elements.
//
// Plaquette (x, e_i, e_j), i < j, has holonomy
//   U_p = U(x, e_i) U(x + e_i, e_j) U(x + e_j, e_i)^-1 U(x, e_j)^-1,
// stored as four signed edges in that order.

#include "carpetlab/group.hpp"

#include <ostream>
#include <span>
#include <vector>

namespace carpet {

struct SignedEdge {
  int edge = 0;
  int sign = 1;  // +1 along the stored orientation, -1 against
  bool operator==(const SignedEdge&) const = default;
};

enum class EdgeKind { Base, Sub, Interior };

inline std::string_view edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Base: return "base";
    case EdgeKind::Sub: return "sub";
    case EdgeKind::Interior: return "interior";
  }
  return "?";
}

struct Incidence {
  int plaquette;
  int position;  // 0..3 within the plaquette word
};

/// Vertices, oriented edges and four-edge plaquettes with edge incidence.
struct PlaquetteComplex {
  int num_vertices = 0;
  std::vector<std::array<int, 2>> edge_ends;  // from, to
  std::vector<EdgeKind> edge_kind;
  std::vector<std::array<SignedEdge, 4>> plaquettes;
  std::vector<int> inc_offset;  // CSR over edges
  std::vector<Incidence> inc;

  int num_edges() const { return static_cast<int>(edge_ends.size()); }
  int num_plaquettes() const { return static_cast<int>(plaquettes.size()); }

  std::span<const Incidence> incident(int e) const {
    return {inc.data() + inc_offset[e], inc.data() + inc_offset[e + 1]};
  }

  int head(SignedEdge s) const { return edge_ends[s.edge][s.sign > 0 ? 1 : 0]; }
  int tail(SignedEdge s) const { return edge_ends[s.edge][s.sign > 0 ? 0 : 1]; }

  void build_incidence() {
    const int E = num_edges();
    inc_offset.assign(E + 1, 0);
    for (const auto& p : plaquettes)
      for (const auto& s : p) ++inc_offset[s.edge + 1];
    for (int e = 0; e < E; ++e) inc_offset[e + 1] += inc_offset[e];
    inc.assign(inc_offset[E], {});
    std::vector<int> fill(inc_offset.begin(), inc_offset.end() - 1);
    for (int p = 0; p < num_plaquettes(); ++p)
      for (int k = 0; k < 4; ++k) inc[fill[plaquettes[p][k].edge]++] = {p, k};
  }

  /// Each plaquette word is a closed walk.
  void validate() const {
    for (int p = 0; p < num_plaquettes(); ++p)
      for (int k = 0; k < 4; ++k)
        if (head(plaquettes[p][k]) != tail(plaquettes[p][(k + 1) % 4]))
          throw std::logic_error("plaquette " + std::to_string(p) + " is not a closed walk");
  }

  void write_edges_csv(std::ostream& os) const {
    os << "edge_id,from_vertex,to_vertex,kind\n";
    for (int e = 0; e < num_edges(); ++e)
      os << e << ',' << edge_ends[e][0] << ',' << edge_ends[e][1] << ',' << edge_kind_name(edge_kind[e]) << '\n';
  }

  void write_plaquettes_csv(std::ostream& os) const {
    os << "plaq_id,e1,e2,e3,e4,s1,s2,s3,s4\n";
    for (int p = 0; p < num_plaquettes(); ++p) {
      const auto& w = plaquettes[p];
      os << p;
      for (const auto& s : w) os << ',' << s.edge;
      for (const auto& s : w) os << ',' << s.sign;
      os << '\n';
    }
  }
};

class SizeGuardExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr long kMaxPlaquettes = 10'000'000;

// ---------------------------------------------------------------------------

/// {x in Z^d : |x|_inf <= L} with free boundary.
class BoxLattice {
 public:
  BoxLattice(int d, int L) : d_(d), L_(L) {
    if (d < 2) throw std::invalid_argument("lattice dimension must be >= 2");
    if (L < 1) throw std::invalid_argument("lattice half-side must be >= 1");
    const long side = 2L * L + 1;
    long nv = 1;
    for (int k = 0; k < d; ++k) {
      nv *= side;
      if (nv > kMaxPlaquettes) throw SizeGuardExceeded("box lattice too large");
    }
    cx_.num_vertices = static_cast<int>(nv);
    edge_id_.assign(static_cast<std::size_t>(nv) * d, -1);
    for (int v = 0; v < nv; ++v)
      for (int j = 0; j < d; ++j) {
        const auto x = coords(v);
        if (x[j] + 1 > L) continue;
        edge_id_[static_cast<std::size_t>(v) * d + j] = cx_.num_edges();
        cx_.edge_ends.push_back({v, shift(v, j)});
        cx_.edge_kind.push_back(EdgeKind::Base);
        edge_dir_.push_back({v, j});
      }
    for (int v = 0; v < nv; ++v) {
      const auto x = coords(v);
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
          if (x[i] + 1 > L || x[j] + 1 > L) continue;
          cx_.plaquettes.push_back({SignedEdge{edge(v, i), 1}, SignedEdge{edge(shift(v, i), j), 1},
                                    SignedEdge{edge(shift(v, j), i), -1}, SignedEdge{edge(v, j), -1}});
          plaq_frame_.push_back({v, i, j});
          if (static_cast<long>(cx_.plaquettes.size()) > kMaxPlaquettes)
            throw SizeGuardExceeded("box lattice too large");
        }
    }
    cx_.build_incidence();
    cx_.validate();
  }

  int dim() const { return d_; }
  int half_side() const { return L_; }
  const PlaquetteComplex& complex() const { return cx_; }

  std::vector<int> coords(int v) const {
    std::vector<int> x(d_);
    for (int k = 0; k < d_; ++k) {
      x[k] = v % (2 * L_ + 1) - L_;
      v /= 2 * L_ + 1;
    }
    return x;
  }

  int vertex(const std::vector<int>& x) const {
    int v = 0;
    for (int k = d_ - 1; k >= 0; --k) {
      if (std::abs(x[k]) > L_) return -1;
      v = v * (2 * L_ + 1) + (x[k] + L_);
    }
    return v;
  }

  /// Edge (x, e_j) or -1 if it leaves the box.
  int edge(int v, int j) const { return edge_id_[static_cast<std::size_t>(v) * d_ + j]; }

  /// (base vertex, i, j) of plaquette p.
  const std::array<int, 3>& plaquette_frame(int p) const { return plaq_frame_[p]; }
  const std::array<int, 2>& edge_direction(int e) const { return edge_dir_[e]; }

  /// Plaquette (x, e_i, e_j) or -1.
  int plaquette(int v, int i, int j) const {
    for (int p = 0; p < cx_.num_plaquettes(); ++p)
      if (plaq_frame_[p] == std::array<int, 3>{v, i, j}) return p;
    return -1;
  }

 private:
  int shift(int v, int j) const {
    int stride = 1;
    for (int k = 0; k < j; ++k) stride *= 2 * L_ + 1;
    return v + stride;
  }

  int d_, L_;
  PlaquetteComplex cx_;
  std::vector<int> edge_id_;
  std::vector<std::array<int, 2>> edge_dir_;
  std::vector<std::array<int, 3>> plaq_frame_;
};

// ---------------------------------------------------------------------------

/// Every base plaquette tiled by an N x N grid; grids share only the
/// subdivided base edges.
///
/// Ids:  sub-edge k of base edge e        e N + k
///       interior edges of plaquette p    |E| N + p 2N(N-1) + local
///       micro-plaquette (a, b) of p      p N^2 + b N + a
class CarpetGraph {
 public:
  CarpetGraph(const BoxLattice& base, int N) : base_(base), N_(N) {
    if (N < 1) throw std::invalid_argument("carpet refinement N must be >= 1");
    const long np = static_cast<long>(base.complex().num_plaquettes()) * N * N;
    if (np > kMaxPlaquettes) throw SizeGuardExceeded("carpet graph exceeds 1e7 plaquettes");
    const auto& bc = base.complex();
    const int V = bc.num_vertices, E = bc.num_edges(), P = bc.num_plaquettes();
    cx_.num_vertices = V + E * (N - 1) + P * (N - 1) * (N - 1);
    for (int e = 0; e < E; ++e)
      for (int k = 0; k < N; ++k) {
        cx_.edge_ends.push_back({sub_vertex(e, k), sub_vertex(e, k + 1)});
        cx_.edge_kind.push_back(N == 1 ? EdgeKind::Base : EdgeKind::Sub);
      }
    for (int p = 0; p < P; ++p) {
      for (int b = 1; b < N; ++b)
        for (int a = 0; a < N; ++a) {
          cx_.edge_ends.push_back({grid_vertex(p, a, b), grid_vertex(p, a + 1, b)});
          cx_.edge_kind.push_back(EdgeKind::Interior);
        }
      for (int a = 1; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          cx_.edge_ends.push_back({grid_vertex(p, a, b), grid_vertex(p, a, b + 1)});
          cx_.edge_kind.push_back(EdgeKind::Interior);
        }
    }
    for (int p = 0; p < P; ++p)
      for (int b = 0; b < N; ++b)
        for (int a = 0; a < N; ++a)
          cx_.plaquettes.push_back({SignedEdge{h_edge(p, a, b), 1}, SignedEdge{v_edge(p, a + 1, b), 1},
                                    SignedEdge{h_edge(p, a, b + 1), -1}, SignedEdge{v_edge(p, a, b), -1}});
    cx_.build_incidence();
    cx_.validate();
  }

  const BoxLattice& base() const { return base_; }
  int refinement() const { return N_; }
  double eps() const { return 1.0 / N_; }
  const PlaquetteComplex& complex() const { return cx_; }

  int sub_edge(int e, int k) const { return e * N_ + k; }
  int micro_plaquette(int p, int a, int b) const { return p * N_ * N_ + b * N_ + a; }

  /// Horizontal micro-edge from grid point (a, b) to (a+1, b), along e_i.
  int h_edge(int p, int a, int b) const {
    const auto& w = base_.complex().plaquettes[p];
    if (b == 0) return sub_edge(w[0].edge, a);
    if (b == N_) return sub_edge(w[2].edge, a);
    return interior_offset(p) + (b - 1) * N_ + a;
  }

  /// Vertical micro-edge from grid point (a, b) to (a, b+1), along e_j.
  int v_edge(int p, int a, int b) const {
    const auto& w = base_.complex().plaquettes[p];
    if (a == 0) return sub_edge(w[3].edge, b);
    if (a == N_) return sub_edge(w[1].edge, b);
    return interior_offset(p) + N_ * (N_ - 1) + (a - 1) * N_ + b;
  }

  int grid_vertex(int p, int a, int b) const {
    const auto& w = base_.complex().plaquettes[p];
    if (b == 0) return sub_vertex(w[0].edge, a);
    if (b == N_) return sub_vertex(w[2].edge, a);
    if (a == 0) return sub_vertex(w[3].edge, b);
    if (a == N_) return sub_vertex(w[1].edge, b);
    const auto& bc = base_.complex();
    return bc.num_vertices + bc.num_edges() * (N_ - 1) + p * (N_ - 1) * (N_ - 1) + (b - 1) * (N_ - 1) + (a - 1);
  }

 private:
  int sub_vertex(int e, int k) const {
    const auto& bc = base_.complex();
    if (k == 0) return bc.edge_ends[e][0];
    if (k == N_) return bc.edge_ends[e][1];
    return bc.num_vertices + e * (N_ - 1) + (k - 1);
  }

  int interior_offset(int p) const {
    return base_.complex().num_edges() * N_ + p * 2 * N_ * (N_ - 1);
  }

  BoxLattice base_;
  int N_;
  PlaquetteComplex cx_;
};

// ---------------------------------------------------------------------------

template <class G>
class Configuration {
 public:
  using Element = typename G::Element;

  Configuration() = default;
  explicit Configuration(int num_edges) : u_(num_edges, G::identity()) {}
  explicit Configuration(std::vector<Element> u) : u_(std::move(u)) {}

  int size() const { return static_cast<int>(u_.size()); }
  const Element& operator[](int e) const { return u_.at(e); }
  Element& operator[](int e) { return u_.at(e); }

  /// U(e) or U(e)^-1 by orientation.
  Element get(SignedEdge s) const { return s.sign > 0 ? u_.at(s.edge) : u_.at(s.edge).inverse(); }

  static Configuration haar(int num_edges, Rng& rng) {
    std::vector<Element> u;
    u.reserve(num_edges);
    for (int e = 0; e < num_edges; ++e) u.push_back(G::haar(rng));
    return Configuration(std::move(u));
  }

  const std::vector<Element>& values() const { return u_; }

 private:
  std::vector<Element> u_;
};

template <class G>
typename G::Element holonomy(const Configuration<G>& c, const PlaquetteComplex& cx, int p) {
  if (p < 0 || p >= cx.num_plaquettes()) throw std::out_of_range("plaquette id out of range");
  const auto& w = cx.plaquettes[p];
  for (const auto& s : w)
    if (s.edge >= c.size()) throw std::out_of_range("configuration is missing edge " + std::to_string(s.edge));
  return c.get(w[0]) * c.get(w[1]) * c.get(w[2]) * c.get(w[3]);
}

/// Base configuration of ordered products along each subdivided edge.
template <class G>
Configuration<G> project_pi(const Configuration<G>& fine, const CarpetGraph& cg) {
  const int E = cg.base().complex().num_edges(), N = cg.refinement();
  if (fine.size() != cg.complex().num_edges()) throw std::invalid_argument("configuration does not match carpet");
  Configuration<G> out(E);
  for (int e = 0; e < E; ++e) {
    auto g = fine[cg.sub_edge(e, 0)];
    for (int k = 1; k < N; ++k) g = g * fine[cg.sub_edge(e, k)];
    out[e] = g;
  }
  return out;
}

class LoopNotClosed : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_closed_walk(const PlaquetteComplex& cx, const std::vector<SignedEdge>& loop) {
  if (loop.empty()) throw LoopNotClosed("empty loop");
  for (std::size_t k = 0; k < loop.size(); ++k) {
    if (loop[k].edge < 0 || loop[k].edge >= cx.num_edges())
      throw std::out_of_range("loop edge id out of range");
    if (cx.head(loop[k]) != cx.tail(loop[(k + 1) % loop.size()]))
      throw LoopNotClosed("loop is not a closed walk at step " + std::to_string(k));
  }
}

template <class G>
typename G::Element loop_holonomy(const Configuration<G>& c, const PlaquetteComplex& cx,
                                  const std::vector<SignedEdge>& loop) {
  require_closed_walk(cx, loop);
  auto g = c.get(loop[0]);
  for (std::size_t k = 1; k < loop.size(); ++k) g = g * c.get(loop[k]);
  return g;
}

/// Re Tr / n of the loop holonomy.
template <class G>
double wilson_loop(const Configuration<G>& c, const PlaquetteComplex& cx, const std::vector<SignedEdge>& loop) {
  return loop_holonomy(c, cx, loop).trace().real() / G::n;
}

inline std::vector<SignedEdge> reverse_loop(const std::vector<SignedEdge>& loop) {
  std::vector<SignedEdge> r;
  for (auto it = loop.rbegin(); it != loop.rend(); ++it) r.push_back({it->edge, -it->sign});
  return r;
}

inline std::vector<SignedEdge> plaquette_loop(const PlaquetteComplex& cx, int p) {
  const auto& w = cx.plaquettes.at(p);
  return {w.begin(), w.end()};
}

/// U_e -> g_from U_e g_to^-1.
template <class G>
Configuration<G> gauge_transform(const Configuration<G>& c, const PlaquetteComplex& cx,
                                 const std::vector<typename G::Element>& g) {
  if (static_cast<int>(g.size()) != cx.num_vertices) throw std::invalid_argument("one gauge element per vertex");
  Configuration<G> out(c.size());
  for (int e = 0; e < c.size(); ++e)
    out[e] = g[cx.edge_ends[e][0]] * c[e] * g[cx.edge_ends[e][1]].inverse();
  return out;
}

}  // namespace carpet
