#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gfflab {

inline constexpr int kMaxDim = 8;

using Index = std::int64_t;

/// A point of Z^d. Coordinates beyond `dim` are kept at zero so that
/// equality and hashing can compare the whole array.
struct Vertex {
  std::array<std::int32_t, kMaxDim> c{};
  int dim = 0;

  Vertex() = default;
  explicit Vertex(int d) : dim(d) {}
  Vertex(std::initializer_list<std::int32_t> coords);

  std::int32_t &operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  std::int32_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  /// |x| (sup norm)
  std::int32_t norm_inf() const;
  /// |x|_1
  std::int64_t norm_l1() const;

  friend bool operator==(const Vertex &, const Vertex &) = default;
  friend auto operator<=>(const Vertex &, const Vertex &) = default;
};

Vertex origin(int d);
Vertex unit(int d, int axis, int sign = 1);
Vertex operator+(Vertex a, const Vertex &b);
Vertex operator-(Vertex a, const Vertex &b);
std::string to_string(const Vertex &v);

struct VertexHash {
  std::size_t operator()(const Vertex &v) const noexcept;
};

using VertexSet = std::vector<Vertex>;

/// Nearest-neighbour edge with canonical endpoint order (x < y).
struct Edge {
  Vertex x;
  Vertex y;
  Edge(Vertex a, Vertex b);
  friend bool operator==(const Edge &, const Edge &) = default;
};

/// Finite vertex set of Z^d with a fixed index order. Boxes are
/// origin-centred and indexed row-major (last coordinate fastest);
/// explicit sets are indexed in lexicographic order.
class Domain {
public:
  static Domain box(int d, int radius);
  static Domain from_vertices(int d, VertexSet vertices);

  int dim() const { return dim_; }
  Index size() const { return size_; }
  bool is_box() const { return radius_ >= 0; }
  /// Box radius M; -1 for explicit sets.
  int radius() const { return radius_; }
  /// Side length 2M+1 of a box.
  int side() const { return 2 * radius_ + 1; }

  bool contains(const Vertex &v) const { return index_of(v) >= 0; }
  /// Index of v, or -1 if v is not in the domain.
  Index index_of(const Vertex &v) const;
  Vertex vertex(Index i) const;
  VertexSet vertices() const;

  /// Index of the neighbour of vertex i in direction (axis, sign), or -1
  /// when that neighbour lies outside the domain.
  Index neighbor(Index i, int axis, int sign) const;

  template <class F> void for_each_neighbor(Index i, F &&f) const {
    for (int a = 0; a < dim_; ++a) {
      f(neighbor(i, a, -1));
      f(neighbor(i, a, +1));
    }
  }

  /// Box stride of axis a (row-major).
  Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

private:
  Domain() = default;

  int dim_ = 0;
  int radius_ = -1;
  Index size_ = 0;
  std::array<Index, kMaxDim> strides_{};
  // explicit-set storage
  VertexSet verts_;
  std::unordered_map<Vertex, Index, VertexHash> lookup_;
  std::vector<Index> nbr_;  // size_ * 2 * dim_
};

/// Box(M) = {x : |x| <= M}.
Domain make_box(int d, int radius);

/// {x in A : some Z^d-neighbour of x is not in A}.
VertexSet boundary(const Domain &domain, const VertexSet &A);

/// Edges of a box with both endpoints in B(M) and at least one in B(M-1).
std::vector<Edge> interior_edges(const Domain &domain);

/// Every nearest-neighbour edge with both endpoints in the domain, in
/// canonical order: by lower-endpoint index, then axis. Calls f(i, axis, j)
/// with j the +e_axis neighbour of i.
template <class F> void for_each_edge(const Domain &domain, F &&f) {
  const Index n = domain.size();
  const int d = domain.dim();
  if (!domain.is_box()) {
    for (Index i = 0; i < n; ++i)
      for (int a = 0; a < d; ++a) {
        const Index j = domain.neighbor(i, a, +1);
        if (j >= 0) f(i, a, j);
      }
    return;
  }
  const int side = domain.side();
  std::array<int, kMaxDim> c{};
  for (Index i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a)
      if (c[static_cast<std::size_t>(a)] + 1 < side) f(i, a, i + domain.stride(a));
    for (int a = d - 1; a >= 0; --a) {
      if (++c[static_cast<std::size_t>(a)] < side) break;
      c[static_cast<std::size_t>(a)] = 0;
    }
  }
}

template <class F> void for_each_domain_edge(const Domain &domain, F &&f) {
  for_each_edge(domain, [&](Index i, int, Index j) { f(i, j); });
}

/// Number of edges enumerated by for_each_domain_edge.
Index domain_edge_count(const Domain &domain);

}  // namespace gfflab
