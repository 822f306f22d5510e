#include "carpetlab/lattice.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace carpet;

namespace {

// Enumeration oracle: count unit edges and unit squares inside the box.
std::pair<int, int> enumerate_box(int d, int L) {
  const int side = 2 * L + 1;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= side;
  int edges = 0, plaqs = 0;
  for (int v = 0; v < total; ++v) {
    std::vector<int> x(d);
    int t = v;
    for (int k = 0; k < d; ++k) {
      x[k] = t % side - L;
      t /= side;
    }
    for (int i = 0; i < d; ++i) {
      if (x[i] < L) ++edges;
      for (int j = i + 1; j < d; ++j)
        if (x[i] < L && x[j] < L) ++plaqs;
    }
  }
  return {edges, plaqs};
}

template <class G>
Configuration<G> random_config(int n, Rng& rng) {
  return Configuration<G>::haar(n, rng);
}

}  // namespace

TEST(BoxLattice, CountsMatchEnumeration) {
  for (int d : {2, 3})
    for (int L : {1, 2}) {
      BoxLattice b(d, L);
      const auto [e, p] = enumerate_box(d, L);
      EXPECT_EQ(b.complex().num_edges(), e);
      EXPECT_EQ(b.complex().num_plaquettes(), p);
    }
  EXPECT_EQ(BoxLattice(2, 1).complex().num_edges(), 12);
  EXPECT_EQ(BoxLattice(2, 1).complex().num_plaquettes(), 4);
  EXPECT_EQ(BoxLattice(3, 1).complex().num_plaquettes(), 36);
  EXPECT_EQ(BoxLattice(2, 3).complex().num_edges(), 2 * 7 * 6);
  EXPECT_EQ(BoxLattice(2, 3).complex().num_plaquettes(), 36);
}

TEST(BoxLattice, RejectsBadArguments) {
  EXPECT_THROW(BoxLattice(1, 1), std::invalid_argument);
  EXPECT_THROW(BoxLattice(2, 0), std::invalid_argument);
}

TEST(Carpet, CountsAndSharing) {
  for (int d : {2, 3})
    for (int L : {1, 2})
      for (int N : {1, 2, 3}) {
        BoxLattice b(d, L);
        CarpetGraph c(b, N);
        const auto& bc = b.complex();
        const auto& cc = c.complex();
        EXPECT_EQ(cc.num_plaquettes(), N * N * bc.num_plaquettes());
        EXPECT_EQ(cc.num_edges(), N * bc.num_edges() + 2 * N * (N - 1) * bc.num_plaquettes());
        EXPECT_EQ(cc.num_vertices,
                  bc.num_vertices + (N - 1) * bc.num_edges() + (N - 1) * (N - 1) * bc.num_plaquettes());
        // each sub-edge borders exactly as many micro-plaquettes as its base edge has plaquettes
        for (int e = 0; e < bc.num_edges(); ++e)
          for (int k = 0; k < N; ++k)
            EXPECT_EQ(cc.incident(c.sub_edge(e, k)).size(), bc.incident(e).size());
        for (int e = N * bc.num_edges(); e < cc.num_edges(); ++e) EXPECT_EQ(cc.incident(e).size(), 2u);
      }
}

TEST(Carpet, SizeGuard) {
  BoxLattice b(2, 1);
  EXPECT_THROW(CarpetGraph(b, 2000), SizeGuardExceeded);
}

TEST(Carpet, NEqualsOneReproducesBase) {
  BoxLattice b(3, 1);
  CarpetGraph c(b, 1);
  const auto& bc = b.complex();
  const auto& cc = c.complex();
  ASSERT_EQ(bc.num_edges(), cc.num_edges());
  ASSERT_EQ(bc.num_plaquettes(), cc.num_plaquettes());
  EXPECT_EQ(bc.num_vertices, cc.num_vertices);
  for (int e = 0; e < bc.num_edges(); ++e) EXPECT_EQ(bc.edge_ends[e], cc.edge_ends[e]);
  for (int p = 0; p < bc.num_plaquettes(); ++p) EXPECT_EQ(bc.plaquettes[p], cc.plaquettes[p]);
}

TEST(Holonomy, IdentityConfiguration) {
  BoxLattice b(2, 1);
  Configuration<SU2> c(b.complex().num_edges());
  for (int p = 0; p < 4; ++p) EXPECT_LT(holonomy(c, b.complex(), p).distance_to(SU2::identity()), 1e-15);
  EXPECT_NEAR(wilson_loop(c, b.complex(), plaquette_loop(b.complex(), 0)), 1.0, 1e-15);
}

TEST(Holonomy, U1AnglesAdd) {
  BoxLattice b(2, 1);
  Rng rng(1);
  auto c = random_config<U1>(b.complex().num_edges(), rng);
  for (int p = 0; p < 4; ++p) {
    const auto [v, i, j] = b.plaquette_frame(p);
    const auto x = b.coords(v);
    auto xi = x, xj = x;
    ++xi[i];
    ++xj[j];
    const double t1 = c[b.edge(v, i)].angle(), t2 = c[b.edge(b.vertex(xi), j)].angle();
    const double t3 = c[b.edge(b.vertex(xj), i)].angle(), t4 = c[b.edge(v, j)].angle();
    EXPECT_NEAR(std::abs(holonomy(c, b.complex(), p).trace() - std::polar(1.0, t1 + t2 - t3 - t4)), 0.0, 1e-14);
  }
}

TEST(Holonomy, MissingEdgeRaises) {
  BoxLattice b(2, 1);
  Configuration<U1> c(3);
  EXPECT_THROW(holonomy(c, b.complex(), 3), std::out_of_range);
}

TEST(Gauge, PlaquetteTracesInvariant) {
  BoxLattice b(3, 1);
  Rng rng(2);
  const auto& cx = b.complex();
  auto c = random_config<SU3>(cx.num_edges(), rng);
  std::vector<SU3::Element> g;
  for (int v = 0; v < cx.num_vertices; ++v) g.push_back(SU3::haar(rng));
  const auto c2 = gauge_transform(c, cx, g);
  for (int p = 0; p < cx.num_plaquettes(); ++p)
    EXPECT_NEAR(holonomy(c, cx, p).trace().real(), holonomy(c2, cx, p).trace().real(), 1e-12);
}

TEST(Loops, ClosureReversalAndPlaquette) {
  BoxLattice b(2, 2);
  const auto& cx = b.complex();
  Rng rng(3);
  auto c = random_config<SU2>(cx.num_edges(), rng);
  const auto loop = plaquette_loop(cx, 5);
  EXPECT_NEAR(wilson_loop(c, cx, loop), holonomy(c, cx, 5).trace().real() / 2, 1e-14);
  EXPECT_NEAR(wilson_loop(c, cx, loop), wilson_loop(c, cx, reverse_loop(loop)), 1e-12);
  // rotated starting edge gives a conjugate holonomy
  std::vector<SignedEdge> rot(loop.begin() + 1, loop.end());
  rot.push_back(loop[0]);
  EXPECT_NEAR(wilson_loop(c, cx, loop), wilson_loop(c, cx, rot), 1e-12);
  std::vector<SignedEdge> open(loop.begin(), loop.begin() + 3);
  EXPECT_THROW(wilson_loop(c, cx, open), LoopNotClosed);
}

TEST(ProjectPi, TrivialCases) {
  BoxLattice b(2, 1);
  CarpetGraph cg(b, 3);
  Configuration<SU2> fine(cg.complex().num_edges());
  const auto base = project_pi(fine, cg);
  for (int e = 0; e < base.size(); ++e) EXPECT_LT(base[e].distance_to(SU2::identity()), 1e-15);
  Rng rng(4);
  const auto g = SU2::haar(rng);
  for (int k = 0; k < 3; ++k) fine[cg.sub_edge(5, k)] = g;
  EXPECT_LT(project_pi(fine, cg)[5].distance_to(g * g * g), 1e-14);
  CarpetGraph c1(b, 1);
  auto r = random_config<SU2>(c1.complex().num_edges(), rng);
  const auto p1 = project_pi(r, c1);
  for (int e = 0; e < r.size(); ++e) EXPECT_EQ(p1[e].distance_to(r[e]), 0.0);
}

TEST(ProjectPi, GaugeAtNonBaseVerticesLeavesBaseLoopsInvariant) {
  BoxLattice b(2, 1);
  CarpetGraph cg(b, 3);
  const auto& cx = cg.complex();
  Rng rng(5);
  auto fine = random_config<SU2>(cx.num_edges(), rng);
  std::vector<SU2::Element> g(cx.num_vertices, SU2::identity());
  for (int v = b.complex().num_vertices; v < cx.num_vertices; ++v) g[v] = SU2::haar(rng);
  const auto before = project_pi(fine, cg);
  const auto after = project_pi(gauge_transform(fine, cx, g), cg);
  for (int e = 0; e < before.size(); ++e) EXPECT_LT(before[e].distance_to(after[e]), 1e-12);
  for (int p = 0; p < b.complex().num_plaquettes(); ++p)
    EXPECT_NEAR(wilson_loop(before, b.complex(), plaquette_loop(b.complex(), p)),
                wilson_loop(after, b.complex(), plaquette_loop(b.complex(), p)), 1e-12);
}

TEST(ProjectPi, LassoProductEqualsBaseHolonomy) {
  // 2x2 grid: conjugate each micro-holonomy to the base corner along the grid.
  BoxLattice b(2, 1);
  CarpetGraph cg(b, 2);
  const auto& cx = cg.complex();
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto fine = random_config<SU2>(cx.num_edges(), rng);
    const auto base = project_pi(fine, cg);
    for (int p = 0; p < b.complex().num_plaquettes(); ++p) {
      auto C = [&](int a, int bb) { return holonomy(fine, cx, cg.micro_plaquette(p, a, bb)); };
      const auto h00 = fine[cg.h_edge(p, 0, 0)], v00 = fine[cg.v_edge(p, 0, 0)];
      const auto h01 = fine[cg.h_edge(p, 0, 1)];
      const auto B = (h00 * C(1, 0) * h00.inverse()) * C(0, 0) *
                     (v00 * h01 * C(1, 1) * h01.inverse() * v00.inverse()) * (v00 * C(0, 1) * v00.inverse());
      EXPECT_LT(B.distance_to(holonomy(base, b.complex(), p)), 1e-12);
    }
  }
}

TEST(GraphDump, CsvHeaders) {
  CarpetGraph cg(BoxLattice(2, 1), 2);
  std::stringstream e, p;
  cg.complex().write_edges_csv(e);
  cg.complex().write_plaquettes_csv(p);
  std::string line;
  std::getline(e, line);
  EXPECT_EQ(line, "edge_id,from_vertex,to_vertex,kind");
  std::getline(e, line);
  EXPECT_EQ(line.substr(line.rfind(',') + 1), "sub");
  std::getline(p, line);
  EXPECT_EQ(line, "plaq_id,e1,e2,e3,e4,s1,s2,s3,s4");
  std::set<std::string> kinds;
  while (std::getline(e, line)) kinds.insert(line.substr(line.rfind(',') + 1));
  EXPECT_EQ(kinds, (std::set<std::string>{"sub", "interior"}));
}
