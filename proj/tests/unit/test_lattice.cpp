#include "doctest.h"

#include <set>

#include "gfflab/lattice.hpp"

using namespace gfflab;

namespace {

// Reference boundary: scan every vertex of A and test all 2d neighbours.
VertexSet brute_boundary(const VertexSet &A) {
  std::set<Vertex> in(A.begin(), A.end());
  VertexSet out;
  for (const auto &x : A) {
    bool edge = false;
    for (int a = 0; a < x.dim; ++a)
      for (int s : {-1, 1})
        if (!in.count(x + unit(x.dim, a, s))) edge = true;
    if (edge) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

VertexSet sorted(VertexSet v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("make_box sizes") {
  CHECK(make_box(2, 1).size() == 9);
  CHECK(make_box(3, 0).size() == 1);
  CHECK(make_box(7, 5).size() == 19487171);
  CHECK_THROWS(make_box(0, 1));
  CHECK_THROWS(make_box(2, -1));
  CHECK_THROWS(make_box(9, 1));
}

TEST_CASE("box index and vertex are inverse") {
  for (int d = 1; d <= 4; ++d) {
    const Domain D = make_box(d, 2);
    for (Index i = 0; i < D.size(); ++i) REQUIRE(D.index_of(D.vertex(i)) == i);
    for (const auto &v : D.vertices()) REQUIRE(D.vertex(D.index_of(v)) == v);
    Vertex far = origin(d);
    far[0] = 3;
    CHECK(D.index_of(far) == -1);
  }
}

TEST_CASE("row-major order puts the last axis fastest") {
  const Domain D = make_box(2, 1);
  CHECK(D.vertex(0) == Vertex{-1, -1});
  CHECK(D.vertex(1) == Vertex{-1, 0});
  CHECK(D.vertex(3) == Vertex{0, -1});
  CHECK(D.index_of(origin(2)) == 4);
}

TEST_CASE("explicit domains") {
  const Domain D = Domain::from_vertices(2, {{1, 0}, {0, 0}, {5, 5}});
  CHECK(D.size() == 3);
  CHECK(D.vertex(0) == Vertex{0, 0});
  for (Index i = 0; i < D.size(); ++i) CHECK(D.index_of(D.vertex(i)) == i);
  CHECK(D.neighbor(0, 0, +1) == D.index_of({1, 0}));
  CHECK(D.neighbor(0, 1, +1) == -1);
}

TEST_CASE("boundary examples") {
  const Domain B1 = make_box(2, 1);
  const auto b = boundary(B1, B1.vertices());
  CHECK(b.size() == 8);
  CHECK(std::find(b.begin(), b.end(), origin(2)) == b.end());

  const VertexSet single{{2, 3, 4}};
  CHECK(boundary(make_box(3, 5), single) == single);
  CHECK(boundary(B1, {}).empty());

  const Domain B2 = make_box(3, 2);
  CHECK(sorted(boundary(B2, B2.vertices())) == brute_boundary(B2.vertices()));
}

TEST_CASE("boundary of a box is the outer shell") {
  for (int d = 1; d <= 4; ++d)
    for (int M = 1; M <= 3; ++M) {
      const Domain B = make_box(d, M);
      const auto b = boundary(B, B.vertices());
      CHECK(static_cast<Index>(b.size()) == B.size() - make_box(d, M - 1).size());
      CHECK(sorted(b) == brute_boundary(B.vertices()));
      for (const auto &x : b) CHECK(x.norm_inf() == M);
    }
}

TEST_CASE("boundary of an irregular set matches brute force") {
  const Domain B = make_box(3, 3);
  VertexSet A;
  for (const auto &v : B.vertices())
    if ((v[0] * 7 + v[1] * 3 + v[2] * 5 + 40) % 3 != 0) A.push_back(v);
  CHECK(sorted(boundary(B, A)) == brute_boundary(A));
}

TEST_CASE("interior edges") {
  const auto e1 = interior_edges(make_box(1, 1));
  REQUIRE(e1.size() == 2);
  CHECK(e1[0] == Edge({-1}, {0}));
  CHECK(e1[1] == Edge({0}, {1}));

  // Exhaustive scan: every edge of B(1) in d=2 with an endpoint at the centre.
  const Domain B = make_box(2, 1);
  std::size_t count = 0;
  for (const auto &x : B.vertices())
    for (int a = 0; a < 2; ++a) {
      const Vertex y = x + unit(2, a);
      if (B.contains(y) && (x.norm_inf() == 0 || y.norm_inf() == 0)) ++count;
    }
  CHECK(interior_edges(B).size() == count);
  CHECK(count == 4);
  CHECK(domain_edge_count(B) == 12);
  CHECK(interior_edges(make_box(2, 0)).empty());
}

TEST_CASE("interior edges never join two rim vertices") {
  for (int d = 1; d <= 3; ++d)
    for (int M = 1; M <= 3; ++M)
      for (const auto &e : interior_edges(make_box(d, M))) {
        CHECK((e.x.norm_inf() < M || e.y.norm_inf() < M));
        CHECK(e.x < e.y);
        CHECK((e.x - e.y).norm_l1() == 1);
      }
}

TEST_CASE("edge validation and canonical order") {
  CHECK_THROWS(Edge({0, 0}, {1, 1}));
  CHECK_THROWS(Edge({0, 0}, {0, 0}));
  CHECK(Edge({1, 0}, {0, 0}) == Edge({0, 0}, {1, 0}));
}

TEST_CASE("norms") {
  CHECK(Vertex{0, 0, 0}.norm_inf() == 0);
  CHECK(Vertex{0, 0, 0}.norm_l1() == 0);
  CHECK(Vertex{-3, 2}.norm_inf() == 3);
  CHECK(Vertex{-3, 2}.norm_l1() == 5);
}

TEST_CASE("domain edge enumeration matches neighbour table") {
  const Domain B = make_box(3, 2);
  Index count = 0;
  for_each_domain_edge(B, [&](Index i, Index j) {
    CHECK(i < j);
    CHECK((B.vertex(i) - B.vertex(j)).norm_l1() == 1);
    ++count;
  });
  CHECK(count == 3 * 5 * 5 * 4);
  CHECK(domain_edge_count(B) == count);
}
