#include "carpetlab/planar.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace carpet;

namespace {

template <class G>
PlanarGaugeGraph<G> load(const std::string& name) {
  std::ifstream is(std::string(CARPETLAB_MANIFESTS) + "/graphs/" + name);
  if (!is) throw std::runtime_error("missing graph file " + name);
  return PlanarGaugeGraph<G>::parse(is);
}

template <class G>
PlanarGaugeGraph<G> parse_text(const std::string& s) {
  std::istringstream is(s);
  return PlanarGaugeGraph<G>::parse(is);
}

const std::vector<std::string> kCorpus = {"fig2.txt", "triangle.txt", "split_square.txt", "dangling.txt",
                                          "grid2x2.txt"};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(PlanarParse, Fig2Counts) {
  const auto g = load<U1>("fig2.txt");
  EXPECT_EQ(g.num_vertices(), 6);
  EXPECT_EQ(g.num_edges(), 8);
  EXPECT_EQ(g.num_faces(), 4);
  EXPECT_EQ(g.boundary_edges(), (std::set<int>{1, 2, 3, 5, 9}));
  EXPECT_EQ(g.internal_edges(), (std::set<int>{4, 8, 10}));
  EXPECT_NEAR(g.boundary_value(5).angle(), 2.0, 1e-15);
}

TEST(PlanarParse, CorpusSatisfiesEuler) {
  for (const auto& name : kCorpus) {
    const auto g = load<U1>(name);
    EXPECT_EQ(g.num_vertices() - g.num_edges() + g.num_faces(), 2) << name;
  }
  EXPECT_EQ(load<U1>("grid2x2.txt").num_vertices(), 9);
}

TEST(PlanarParse, Errors) {
  // same orientation twice
  EXPECT_THROW(parse_text<U1>("face 1: 1 2 3\nface inf: 3 -2 -1\n"), GraphFormatError);
  // torus-like word: V - E + F = 0
  EXPECT_THROW(parse_text<U1>("face 1: 1 2 -1 -2 3\nface inf: -3\n"), GraphFormatError);
  EXPECT_THROW(parse_text<U1>("face 1: 1 2 3\n"), GraphFormatError);
  EXPECT_THROW(parse_text<U1>("face 1: 1 2 3\nface inf: -3 -2 -1\nboundary 7=0.1\n"), GraphFormatError);
  try {
    parse_text<U1>("face 1: 1 2 3\n\nbogus 3\n");
    FAIL();
  } catch (const GraphFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(PlanarParse, SU2BoundaryMatrices) {
  const auto g = parse_text<SU2>(
      "face 1: 1 2 3\nface inf: -3 -2 -1\n"
      "boundary 1=0+1i, 0, 0, 0-1i\nboundary 2=identity\nboundary 3=0.6, 0.8, -0.8, 0.6\n");
  EXPECT_NEAR(g.boundary_value(1).trace().real(), 0.0, 1e-15);
  EXPECT_NEAR(g.boundary_value(3).trace().real(), 1.2, 1e-15);
  const auto d = parse_text<SU2>("face 1: 1 2 3\nface inf: -3 -2 -1\nboundary 1=0.5\n");
  EXPECT_NEAR(d.boundary_value(1).trace().real(), 2.0 * std::cos(0.5), 1e-15);
  EXPECT_THROW(parse_text<SU2>("face 1: 1 2 3\nface inf: -3 -2 -1\nboundary 1=2, 0, 0, 1\n"), GraphFormatError);
}

TEST(PlanarParse, WeightsFromFile) {
  const auto g = parse_text<U1>("face a: 1 -2\nface b: 2 -3\nface inf: 3 -1\nweight a=villain:2\n");
  ASSERT_TRUE(g.weight_spec("a").has_value());
  EXPECT_EQ(g.weight_spec("a")->kind, ActionKind::Villain);
  EXPECT_FALSE(g.weight_spec("b").has_value());
  EXPECT_THROW(g.weights(), std::invalid_argument);
  const auto w = g.weights(WeightSpec{ActionKind::Wilson, 1.0});
  EXPECT_NEAR(w[0].coeffs()[w[0].table().index_of({1})], std::exp(-1.0 / 4.0), 1e-12);
}

TEST(FaceHolonomy, DanglingEdgeDropsOut) {
  const auto g = load<SU2>("fig2.txt");
  Rng rng(11);
  std::map<int, SU2::Element> a{{4, SU2::haar(rng)}, {8, SU2::haar(rng)}, {10, SU2::haar(rng)}};
  const auto h1 = face_holonomy_class(g, a, "1");
  a[10] = SU2::haar(rng);
  EXPECT_LT(h1.distance_to(face_holonomy_class(g, a, "1")), 1e-12);
  EXPECT_THROW(face_holonomy_class(g, a, "nope"), std::invalid_argument);
}

TEST(Reduce, FinalWordIsInverseOuterClass) {
  Rng rng(12);
  for (const auto& name : kCorpus) {
    auto g = load<SU2>(name);
    for (int e : g.boundary_edges()) g.set_boundary(e, SU2::haar(rng));
    const auto w = g.weights(WeightSpec{ActionKind::Wilson, 1.0});
    const auto r = reduce(g, w);
    EXPECT_EQ(r.merges, static_cast<int>(g.faces().size()) - 1);
    const auto h = g.word_holonomy(r.final_word, {});
    EXPECT_NEAR(h.trace().real(), g.outer_holonomy().inverse().trace().real(), 1e-12) << name;
  }
}

TEST(Reduce, MergeOrderInvariance) {
  for (const auto& name : kCorpus) {
    const auto g = load<U1>(name);
    for (auto kind : {ActionKind::Wilson, ActionKind::Villain}) {
      const auto w = g.weights(WeightSpec{kind, 1.0});
      const double lo = evaluate_Z(g, w, MergeOrder::LowestEdge);
      const double hi = evaluate_Z(g, w, MergeOrder::HighestEdge);
      EXPECT_LE(rel(lo, hi), 1e-12) << name;
    }
  }
}

TEST(Reduce, MatchesBruteForceU1) {
  for (const auto& name : kCorpus) {
    const auto g = load<U1>(name);
    for (auto kind : {ActionKind::Wilson, ActionKind::Villain}) {
      const auto w = g.weights(WeightSpec{kind, 1.0});
      const double z = evaluate_Z(g, w);
      const double b = brute_force_Z(g, w, {.u1_points = 32});
      EXPECT_LE(rel(z, b), 1e-6) << name << " " << action_name(kind);
    }
  }
}

TEST(Reduce, MatchesBruteForceSU2) {
  Rng rng(13);
  for (const auto& name : {"triangle.txt", "split_square.txt", "dangling.txt"}) {
    auto g = load<SU2>(name);
    for (int e : g.boundary_edges()) g.set_boundary(e, SU2::haar(rng));
    for (auto kind : {ActionKind::Wilson, ActionKind::Villain}) {
      const auto w = g.weights(WeightSpec{kind, 1.0});
      EXPECT_LE(rel(evaluate_Z(g, w), brute_force_Z(g, w)), 1e-6) << name << " " << action_name(kind);
    }
  }
}

TEST(Reduce, SingleFaceNeedsNoMerge) {
  const auto g = load<U1>("triangle.txt");
  const auto w = g.weights(WeightSpec{ActionKind::Wilson, 2.0});
  const double t = g.outer_holonomy().inverse().angle();
  EXPECT_NEAR(evaluate_Z(g, w), w[0].pointwise()({t}), 1e-13);
}

TEST(CarpetFaceReduce, MatchesConvolvePower) {
  BoxLattice b(2, 1);
  for (int N : {1, 2, 3, 4}) {
    CarpetGraph cg(b, N);
    const auto q = wilson_density<SU2>(static_cast<double>(N * N));
    const auto pF = carpet_face_reduce(cg, 2, q);
    const auto ref = convolve_power(q, N * N);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(pF.coeffs()[i], ref.coeffs()[i], 1e-10);
  }
}

TEST(CarpetFaceReduce, GraphShape) {
  CarpetGraph cg(BoxLattice(3, 1), 3);
  const auto g = carpet_plaquette_graph<U1>(cg, 7);
  EXPECT_EQ(g.num_vertices(), 16);
  EXPECT_EQ(g.num_edges(), 24);
  EXPECT_EQ(g.num_faces(), 10);
  EXPECT_EQ(g.internal_edges().size(), 12u);
}
