#pragma once

// Planar gauge graphs with per-face class-function weights.  The partition
// function integrates out internal edges; repeated face merging turns it into
// a single convolution evaluated at the inverse outer-face holonomy.
//
// Text format, one directive per line ('#' starts a comment):
//   face <id>: <signed edge ids, clockwise>
//   face inf: <signed edge ids>                 outer face
//   boundary <edge>=<element>                   U(1): angle; SU(n): n*n complex
//                                               entries row-major, "identity", or a
//                                               single angle t for diag(e^it, e^-it, 1..)
//   weight <face id>=<wilson|manton|villain>:<beta>

#include "carpetlab/actions.hpp"
#include "carpetlab/lattice.hpp"

#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>

namespace carpet {

class GraphFormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MergeStuck : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct FaceWord {
  std::string id;
  std::vector<SignedEdge> word;
};

struct WeightSpec {
  ActionKind kind = ActionKind::Wilson;
  double beta = 1.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// "a", "a+bi", "a-bi", "bi", "-i"
inline cplx parse_complex(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty complex number");
  if (s.back() != 'i') return {std::stod(s), 0.0};
  std::string body = s.substr(0, s.size() - 1);
  std::size_t split = std::string::npos;
  for (std::size_t k = body.size(); k-- > 1;)
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  auto imag_of = [](const std::string& t) {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    return std::stod(t);
  };
  if (split == std::string::npos) return {0.0, imag_of(body)};
  return {std::stod(body.substr(0, split)), imag_of(body.substr(split))};
}

template <class G>
typename G::Element parse_element(const std::string& text) {
  const std::string t = trim(text);
  if (t == "identity" || t == "1") {
    if constexpr (G::id == GroupId::U1) {
      if (t == "1") return typename G::Element(1.0);
    }
    return G::identity();
  }
  if constexpr (G::id == GroupId::U1) {
    return typename G::Element(std::stod(t));
  } else {
    const auto tok = split_tokens(t);
    if (tok.size() == 1) {
      typename G::Matrix m = G::Matrix::Identity();
      m(0, 0) = std::polar(1.0, std::stod(tok[0]));
      m(1, 1) = std::polar(1.0, -std::stod(tok[0]));
      return typename G::Element(m);
    }
    if (static_cast<int>(tok.size()) != G::n * G::n)
      throw std::invalid_argument("expected " + std::to_string(G::n * G::n) + " matrix entries");
    typename G::Matrix m;
    for (int i = 0; i < G::n; ++i)
      for (int j = 0; j < G::n; ++j) m(i, j) = parse_complex(tok[i * G::n + j]);
    typename G::Element g(m);
    if (g.unitarity_defect() > 1e-6 || std::abs(m.determinant() - cplx(1.0)) > 1e-6)
      throw std::invalid_argument("boundary matrix is not special unitary");
    g.reunitarize();
    return g;
  }
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// Cancels adjacent e e^-1 pairs, cyclically.
inline std::vector<SignedEdge> free_reduce(std::vector<SignedEdge> w) {
  std::vector<SignedEdge> st;
  for (const auto& s : w) {
    if (!st.empty() && st.back().edge == s.edge && st.back().sign == -s.sign) st.pop_back();
    else st.push_back(s);
  }
  std::size_t lo = 0, hi = st.size();
  while (hi - lo >= 2 && st[lo].edge == st[hi - 1].edge && st[lo].sign == -st[hi - 1].sign) {
    ++lo;
    --hi;
  }
  return {st.begin() + static_cast<std::ptrdiff_t>(lo), st.begin() + static_cast<std::ptrdiff_t>(hi)};
}

}  // namespace detail

template <class G>
class PlanarGaugeGraph {
 public:
  using Element = typename G::Element;

  PlanarGaugeGraph() = default;

  PlanarGaugeGraph(std::vector<FaceWord> faces, std::vector<SignedEdge> outer, std::map<int, Element> boundary = {})
      : faces_(std::move(faces)), outer_(std::move(outer)), boundary_(std::move(boundary)) {
    validate();
  }

  static PlanarGaugeGraph parse(std::istream& is) {
    PlanarGaugeGraph g;
    std::string raw;
    int lineno = 0;
    bool have_outer = false;
    std::map<std::string, WeightSpec> weights;
    std::map<int, std::string> boundary_text;
    auto fail = [&](const std::string& msg) {
      throw GraphFormatError("line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, raw)) {
      ++lineno;
      std::string line = raw.substr(0, raw.find('#'));
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto sp = line.find_first_of(" \t");
      const std::string head = line.substr(0, sp);
      const std::string rest = sp == std::string::npos ? "" : detail::trim(line.substr(sp));
      try {
        if (head == "face") {
          const auto colon = rest.find(':');
          if (colon == std::string::npos) fail("face line needs ':'");
          const std::string id = detail::trim(rest.substr(0, colon));
          std::vector<SignedEdge> word;
          for (const auto& tok : detail::split_tokens(rest.substr(colon + 1))) {
            const int v = std::stoi(tok);
            if (v == 0) fail("edge id 0 is reserved");
            word.push_back({std::abs(v), v > 0 ? 1 : -1});
          }
          if (word.empty()) fail("empty face word");
          if (id == "inf") {
            if (have_outer) fail("duplicate outer face");
            g.outer_ = std::move(word);
            have_outer = true;
          } else {
            for (const auto& f : g.faces_)
              if (f.id == id) fail("duplicate face id " + id);
            g.faces_.push_back({id, std::move(word)});
          }
        } else if (head == "boundary") {
          const auto eq = rest.find('=');
          if (eq == std::string::npos) fail("boundary line needs '='");
          const int e = std::stoi(rest.substr(0, eq));
          if (boundary_text.count(e)) fail("duplicate boundary value for edge " + std::to_string(e));
          boundary_text[e] = rest.substr(eq + 1);
        } else if (head == "weight") {
          const auto eq = rest.find('=');
          const auto colon = rest.find(':', eq == std::string::npos ? 0 : eq);
          if (eq == std::string::npos || colon == std::string::npos) fail("weight line needs <face>=<kind>:<beta>");
          weights[detail::trim(rest.substr(0, eq))] = {parse_action(detail::trim(rest.substr(eq + 1, colon - eq - 1))),
                                                       std::stod(rest.substr(colon + 1))};
        } else {
          fail("unknown directive '" + head + "'");
        }
      } catch (const GraphFormatError&) {
        throw;
      } catch (const std::exception& ex) {
        fail(ex.what());
      }
    }
    if (!have_outer) throw GraphFormatError("missing 'face inf:' line");
    for (const auto& [e, text] : boundary_text) {
      try {
        g.boundary_[e] = detail::parse_element<G>(text);
      } catch (const std::exception& ex) {
        throw GraphFormatError("boundary value for edge " + std::to_string(e) + ": " + ex.what());
      }
    }
    for (const auto& [id, w] : weights) {
      bool found = false;
      for (const auto& f : g.faces_) found |= f.id == id;
      if (!found) throw GraphFormatError("weight for unknown face " + id);
    }
    g.weight_specs_ = std::move(weights);
    g.validate();
    return g;
  }

  const std::vector<FaceWord>& faces() const { return faces_; }
  const std::vector<SignedEdge>& outer() const { return outer_; }
  const std::set<int>& internal_edges() const { return internal_; }
  const std::set<int>& boundary_edges() const { return boundary_edges_; }
  int num_vertices() const { return V_; }
  int num_edges() const { return static_cast<int>(internal_.size() + boundary_edges_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()) + 1; }

  const Element& boundary_value(int e) const {
    static const Element one = G::identity();
    const auto it = boundary_.find(e);
    return it == boundary_.end() ? one : it->second;
  }
  void set_boundary(int e, const Element& g) {
    if (!boundary_edges_.count(e)) throw std::invalid_argument("edge " + std::to_string(e) + " is not a boundary edge");
    boundary_[e] = g;
  }

  std::optional<WeightSpec> weight_spec(const std::string& face) const {
    const auto it = weight_specs_.find(face);
    if (it == weight_specs_.end()) return std::nullopt;
    return it->second;
  }

  /// Per-face weights from the file, falling back to `fallback`.
  std::vector<ClassFunction<G>> weights(std::optional<WeightSpec> fallback = std::nullopt,
                                        std::shared_ptr<const IrrepTable<G>> table = irrep_table<G>()) const {
    std::vector<ClassFunction<G>> out;
    std::map<std::pair<int, double>, ClassFunction<G>> cache;
    for (const auto& f : faces_) {
      auto spec = weight_spec(f.id);
      if (!spec) spec = fallback;
      if (!spec) throw std::invalid_argument("no weight for face " + f.id);
      const auto key = std::make_pair(static_cast<int>(spec->kind), spec->beta);
      auto it = cache.find(key);
      if (it == cache.end()) it = cache.emplace(key, action_density<G>(spec->kind, spec->beta, table)).first;
      out.push_back(it->second);
    }
    return out;
  }

  /// Holonomy along a word with internal values from `internal`.
  Element word_holonomy(const std::vector<SignedEdge>& word, const std::map<int, Element>& internal) const {
    Element g = G::identity();
    for (const auto& s : word) {
      Element u;
      if (internal_.count(s.edge)) {
        const auto it = internal.find(s.edge);
        if (it == internal.end()) throw std::invalid_argument("internal edge " + std::to_string(s.edge) + " unassigned");
        u = it->second;
      } else {
        u = boundary_value(s.edge);
      }
      g = g * (s.sign > 0 ? u : u.inverse());
    }
    return g;
  }

  Element outer_holonomy() const { return word_holonomy(outer_, {}); }

 private:
  void validate() {
    if (faces_.empty()) throw GraphFormatError("graph has no internal faces");
    std::map<int, std::array<int, 2>> count;  // edge -> (#plus, #minus)
    auto tally = [&](const std::vector<SignedEdge>& w) {
      for (const auto& s : w) ++count[s.edge][s.sign > 0 ? 0 : 1];
    };
    for (const auto& f : faces_) tally(f.word);
    tally(outer_);
    for (const auto& [e, c] : count)
      if (c[0] != 1 || c[1] != 1)
        throw GraphFormatError("edge " + std::to_string(e) + " must appear once with each orientation");
    internal_.clear();
    boundary_edges_.clear();
    for (const auto& s : outer_) boundary_edges_.insert(s.edge);
    for (const auto& [e, c] : count)
      if (!boundary_edges_.count(e)) internal_.insert(e);
    for (const auto& [e, g] : boundary_)
      if (!boundary_edges_.count(e))
        throw GraphFormatError("boundary value given for non-boundary edge " + std::to_string(e));

    // Vertices: endpoints glued along every face walk.
    std::map<int, int> slot;
    for (const auto& [e, c] : count) slot[e] = static_cast<int>(slot.size());
    detail::UnionFind uf(2 * static_cast<int>(slot.size()));
    auto tail = [&](SignedEdge s) { return 2 * slot[s.edge] + (s.sign > 0 ? 0 : 1); };
    auto head = [&](SignedEdge s) { return 2 * slot[s.edge] + (s.sign > 0 ? 1 : 0); };
    auto glue = [&](const std::vector<SignedEdge>& w) {
      for (std::size_t k = 0; k < w.size(); ++k) uf.unite(head(w[k]), tail(w[(k + 1) % w.size()]));
    };
    for (const auto& f : faces_) glue(f.word);
    glue(outer_);
    std::set<int> roots;
    for (int v = 0; v < 2 * static_cast<int>(slot.size()); ++v) roots.insert(uf.find(v));
    V_ = static_cast<int>(roots.size());
    if (V_ - num_edges() + num_faces() != 2)
      throw GraphFormatError("Euler characteristic V - E + F = " + std::to_string(V_ - num_edges() + num_faces()) +
                             ", expected 2");
  }

  std::vector<FaceWord> faces_;
  std::vector<SignedEdge> outer_;
  std::map<int, Element> boundary_;
  std::map<std::string, WeightSpec> weight_specs_;
  std::set<int> internal_, boundary_edges_;
  int V_ = 0;
};

/// Conjugacy-class representative of U(f), the ordered product along f.
template <class G>
typename G::Element face_holonomy_class(const PlanarGaugeGraph<G>& g, const std::map<int, typename G::Element>& internal,
                                        const std::string& face) {
  if (face == "inf") return g.outer_holonomy();
  for (const auto& f : g.faces())
    if (f.id == face) return g.word_holonomy(f.word, internal);
  throw std::invalid_argument("unknown face " + face);
}

enum class MergeOrder { LowestEdge, HighestEdge };

template <class G>
struct ReduceResult {
  ClassFunction<G> pF;
  std::vector<SignedEdge> final_word;  // freely reduced, boundary edges only
  int merges = 0;
};

/// Face merging: p_F = p_f1 * ... * p_fn.
template <class G>
ReduceResult<G> reduce(const PlanarGaugeGraph<G>& g, const std::vector<ClassFunction<G>>& weights,
                       MergeOrder order = MergeOrder::LowestEdge) {
  if (weights.size() != g.faces().size()) throw std::invalid_argument("one weight per internal face");
  std::vector<std::vector<SignedEdge>> words;
  std::vector<ClassFunction<G>> w = weights;
  for (const auto& f : g.faces()) words.push_back(f.word);
  const auto& internal = g.internal_edges();
  int merges = 0;
  while (words.size() > 1) {
    // locate each internal edge's (+) and (-) faces
    std::map<int, std::array<int, 2>> where;
    for (int f = 0; f < static_cast<int>(words.size()); ++f)
      for (const auto& s : words[f])
        if (internal.count(s.edge)) {
          auto& slot = where.try_emplace(s.edge, std::array<int, 2>{-1, -1}).first->second;
          slot[s.sign > 0 ? 0 : 1] = f;
        }
    int pick = -1;
    for (const auto& [e, fs] : where) {
      if (fs[0] < 0 || fs[1] < 0 || fs[0] == fs[1]) continue;
      if (pick < 0 || order == MergeOrder::HighestEdge) pick = e;
      if (order == MergeOrder::LowestEdge) break;
    }
    if (pick < 0) throw MergeStuck("no internal edge borders two distinct faces while " +
                                   std::to_string(words.size()) + " faces remain");
    const int fa = where[pick][0], fb = where[pick][1];
    // rotate fa to [e, P] and fb to [P', e^-1]; merged word P' P
    auto rot_a = words[fa];
    auto ia = std::find(rot_a.begin(), rot_a.end(), SignedEdge{pick, 1});
    std::rotate(rot_a.begin(), ia, rot_a.end());
    auto rot_b = words[fb];
    auto ib = std::find(rot_b.begin(), rot_b.end(), SignedEdge{pick, -1});
    std::rotate(rot_b.begin(), ib + 1, rot_b.end());
    std::vector<SignedEdge> merged(rot_b.begin(), rot_b.end() - 1);
    merged.insert(merged.end(), rot_a.begin() + 1, rot_a.end());
    auto pw = convolve(w[fa], w[fb]);
    const int lo = std::min(fa, fb), hi = std::max(fa, fb);
    words.erase(words.begin() + hi);
    w.erase(w.begin() + hi);
    words[lo] = detail::free_reduce(std::move(merged));
    w[lo] = std::move(pw);
    ++merges;
  }
  auto last = detail::free_reduce(words[0]);
  for (const auto& s : last)
    if (internal.count(s.edge))
      throw MergeStuck("internal edge " + std::to_string(s.edge) + " survives in the last face");
  return {std::move(w[0]), std::move(last), merges};
}

/// p_F(dU(f_inf)^-1).
template <class G>
double evaluate_Z(const PlanarGaugeGraph<G>& g, const std::vector<ClassFunction<G>>& weights,
                  MergeOrder order = MergeOrder::LowestEdge) {
  const auto r = reduce(g, weights, order);
  return r.pF(G::class_point(g.outer_holonomy().inverse()));
}

// ---------------------------------------------------------------------------
// Brute-force quadrature over the internal edges

struct BruteForceOptions {
  int u1_points = 64;                    // trapezoid points per U(1) edge
  std::array<int, 3> su2_points{16, 12, 24};  // (chi, theta, phi) per SU(2) edge
};

/// int prod_f p_f(U(f)) prod_{e internal} dU_e by tensor-product quadrature.
template <class G>
double brute_force_Z(const PlanarGaugeGraph<G>& g, const std::vector<ClassFunction<G>>& weights,
                     BruteForceOptions opt = {}) {
  const std::vector<int> edges(g.internal_edges().begin(), g.internal_edges().end());
  const int E = static_cast<int>(edges.size());
  const int F = static_cast<int>(g.faces().size());
  if constexpr (G::id == GroupId::U1) {
    // Face angles are c_f + sum_e s_fe theta_e with theta_e on the grid, so each
    // weight is needed only at M shifted grid angles.
    const int M = opt.u1_points;
    std::vector<std::vector<int>> coef(F, std::vector<int>(E, 0));
    std::vector<std::vector<double>> table(F, std::vector<double>(M));
    for (int f = 0; f < F; ++f) {
      double c = 0.0;
      for (const auto& s : g.faces()[f].word) {
        const auto it = std::find(edges.begin(), edges.end(), s.edge);
        if (it != edges.end()) coef[f][it - edges.begin()] += s.sign;
        else c += s.sign * g.boundary_value(s.edge).angle();
      }
      for (int k = 0; k < M; ++k) table[f][k] = weights[f]({c + 2.0 * pi * k / M});
    }
    long total = 1;
    for (int e = 0; e < E; ++e) {
      total *= M;
      if (total > 400'000'000L) throw std::invalid_argument("brute force grid too large");
    }
    std::vector<int> idx(E, 0);
    std::vector<double> partial(static_cast<std::size_t>(total));
    for (long n = 0; n < total; ++n) {
      long t = n;
      for (int e = 0; e < E; ++e) {
        idx[e] = static_cast<int>(t % M);
        t /= M;
      }
      double prod = 1.0;
      for (int f = 0; f < F; ++f) {
        int k = 0;
        for (int e = 0; e < E; ++e) k += coef[f][e] * idx[e];
        k %= M;
        if (k < 0) k += M;
        prod *= table[f][k];
      }
      partial[static_cast<std::size_t>(n)] = prod;
    }
    return pairwise_sum(partial) / static_cast<double>(total);
  } else if constexpr (G::id == GroupId::SU2) {
    // Unit quaternions (cos chi, sin chi cos th, sin chi sin th cos ph, sin chi sin th sin ph),
    // Haar density sin^2 chi sin th / (2 pi^2).
    const auto gc = gauss_legendre(opt.su2_points[0], 0.0, pi);
    const auto gt = gauss_legendre(opt.su2_points[1], 0.0, pi);
    const int np = opt.su2_points[2];
    std::vector<typename G::Element> nodes;
    std::vector<double> wts;
    for (int i = 0; i < opt.su2_points[0]; ++i)
      for (int j = 0; j < opt.su2_points[1]; ++j)
        for (int k = 0; k < np; ++k) {
          const double chi = gc.nodes[i], th = gt.nodes[j], ph = 2.0 * pi * k / np;
          const double a0 = std::cos(chi), a1 = std::sin(chi) * std::cos(th),
                       a2 = std::sin(chi) * std::sin(th) * std::cos(ph), a3 = std::sin(chi) * std::sin(th) * std::sin(ph);
          typename G::Matrix m;
          m << cplx(a0, a3), cplx(a2, a1), cplx(-a2, a1), cplx(a0, -a3);
          nodes.emplace_back(m);
          wts.push_back(gc.weights[i] * gt.weights[j] * (2.0 * pi / np) * std::pow(std::sin(chi), 2) *
                        std::sin(th) / (2.0 * pi * pi));
        }
    const long K = static_cast<long>(nodes.size());
    long total = 1;
    for (int e = 0; e < E; ++e) {
      total *= K;
      if (total > 200'000'000L) throw std::invalid_argument("brute force grid too large");
    }
    std::vector<FastEvaluator<G>> fe;
    for (const auto& w : weights) fe.emplace_back(w);
    std::map<int, typename G::Element> assign;
    std::vector<double> partial(static_cast<std::size_t>(total));
    for (long n = 0; n < total; ++n) {
      long t = n;
      double wt = 1.0;
      for (int e = 0; e < E; ++e) {
        const long k = t % K;
        t /= K;
        assign[edges[e]] = nodes[k];
        wt *= wts[k];
      }
      double prod = wt;
      for (int f = 0; f < F; ++f) prod *= fe[f](G::class_point(g.word_holonomy(g.faces()[f].word, assign)));
      partial[static_cast<std::size_t>(n)] = prod;
    }
    return pairwise_sum(partial);
  } else {
    throw std::invalid_argument("brute-force quadrature is implemented for U(1) and SU(2) only");
  }
}

// ---------------------------------------------------------------------------

/// The N x N grid of base plaquette p as a planar graph; edge ids are carpet ids.
template <class G>
PlanarGaugeGraph<G> carpet_plaquette_graph(const CarpetGraph& cg, int p) {
  const int N = cg.refinement();
  std::vector<FaceWord> faces;
  const auto& cx = cg.complex();
  for (int b = 0; b < N; ++b)
    for (int a = 0; a < N; ++a) {
      const int mp = cg.micro_plaquette(p, a, b);
      const auto& w = cx.plaquettes[mp];
      faces.push_back({std::to_string(mp), {w.begin(), w.end()}});
    }
  // outer face: inverse of the base plaquette boundary walk
  std::vector<SignedEdge> outer;
  for (int b = 0; b < N; ++b) outer.push_back({cg.v_edge(p, 0, b), 1});
  for (int a = 0; a < N; ++a) outer.push_back({cg.h_edge(p, a, N), 1});
  for (int b = N - 1; b >= 0; --b) outer.push_back({cg.v_edge(p, N, b), -1});
  for (int a = N - 1; a >= 0; --a) outer.push_back({cg.h_edge(p, a, 0), -1});
  return PlanarGaugeGraph<G>(std::move(faces), std::move(outer));
}

/// Reduces the carpet of base plaquette p with every micro-plaquette weighted
/// by q and checks the result against q^{*N^2}.
template <class G>
ClassFunction<G> carpet_face_reduce(const CarpetGraph& cg, int p, const ClassFunction<G>& q, double tol = 1e-10) {
  const auto g = carpet_plaquette_graph<G>(cg, p);
  const int N = cg.refinement();
  auto r = reduce(g, std::vector<ClassFunction<G>>(g.faces().size(), q));
  const auto ref = convolve_power(q, N * N);
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    scale = std::max(scale, std::abs(ref.coeffs()[i]));
    diff = std::max(diff, std::abs(ref.coeffs()[i] - r.pF.coeffs()[i]));
  }
  if (diff > tol * std::max(1.0, scale))
    throw std::logic_error("carpet face reduction disagrees with convolve_power by " + std::to_string(diff));
  if (N == 1 && q.has_pointwise()) r.pF.set_pointwise(q.pointwise());
  return r.pF;
}

}  // namespace carpet
