#include "gfflab/lattice.hpp"

#include <algorithm>
#include <unordered_set>

namespace gfflab {

Vertex::Vertex(std::initializer_list<std::int32_t> coords) : dim(static_cast<int>(coords.size())) {
  if (dim > kMaxDim) throw std::invalid_argument("Vertex: dimension exceeds kMaxDim");
  std::copy(coords.begin(), coords.end(), c.begin());
}

std::int32_t Vertex::norm_inf() const {
  std::int32_t m = 0;
  for (int i = 0; i < dim; ++i) m = std::max(m, std::abs((*this)[i]));
  return m;
}

std::int64_t Vertex::norm_l1() const {
  std::int64_t s = 0;
  for (int i = 0; i < dim; ++i) s += std::abs((*this)[i]);
  return s;
}

Vertex origin(int d) { return Vertex(d); }

Vertex unit(int d, int axis, int sign) {
  Vertex v(d);
  v[axis] = sign;
  return v;
}

Vertex operator+(Vertex a, const Vertex &b) {
  for (int i = 0; i < a.dim; ++i) a[i] += b[i];
  return a;
}

Vertex operator-(Vertex a, const Vertex &b) {
  for (int i = 0; i < a.dim; ++i) a[i] -= b[i];
  return a;
}

std::string to_string(const Vertex &v) {
  std::string s = "(";
  for (int i = 0; i < v.dim; ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + ")";
}

std::size_t VertexHash::operator()(const Vertex &v) const noexcept {
  std::uint64_t h = 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(v.dim);
  for (int i = 0; i < v.dim; ++i) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v[i])) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

Edge::Edge(Vertex a, Vertex b) : x(std::move(a)), y(std::move(b)) {
  if (x.dim != y.dim) throw std::invalid_argument("Edge: dimension mismatch");
  if ((x - y).norm_l1() != 1) throw std::invalid_argument("Edge: endpoints are not nearest neighbours");
  if (y < x) std::swap(x, y);
}

Domain Domain::box(int d, int radius) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("make_box: dimension must be in [1, 8]");
  if (radius < 0) throw std::invalid_argument("make_box: radius must be nonnegative");
  Domain D;
  D.dim_ = d;
  D.radius_ = radius;
  const Index n = 2 * static_cast<Index>(radius) + 1;
  Index s = 1;
  for (int a = d - 1; a >= 0; --a) {
    D.strides_[static_cast<std::size_t>(a)] = s;
    s *= n;
  }
  D.size_ = s;
  return D;
}

Domain Domain::from_vertices(int d, VertexSet vertices) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("Domain: dimension must be in [1, 8]");
  for (const auto &v : vertices)
    if (v.dim != d) throw std::invalid_argument("Domain: vertex dimension mismatch");
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
  Domain D;
  D.dim_ = d;
  D.size_ = static_cast<Index>(vertices.size());
  D.verts_ = std::move(vertices);
  D.lookup_.reserve(D.verts_.size());
  for (std::size_t i = 0; i < D.verts_.size(); ++i) D.lookup_.emplace(D.verts_[i], static_cast<Index>(i));
  D.nbr_.assign(static_cast<std::size_t>(D.size_ * 2 * d), -1);
  for (Index i = 0; i < D.size_; ++i)
    for (int a = 0; a < d; ++a)
      for (int s = 0; s < 2; ++s) {
        Vertex w = D.verts_[static_cast<std::size_t>(i)];
        w[a] += s ? 1 : -1;
        auto it = D.lookup_.find(w);
        D.nbr_[static_cast<std::size_t>((i * d + a) * 2 + s)] = it == D.lookup_.end() ? -1 : it->second;
      }
  return D;
}

Index Domain::index_of(const Vertex &v) const {
  if (v.dim != dim_) return -1;
  if (is_box()) {
    Index idx = 0;
    for (int a = 0; a < dim_; ++a) {
      if (std::abs(v[a]) > radius_) return -1;
      idx += static_cast<Index>(v[a] + radius_) * strides_[static_cast<std::size_t>(a)];
    }
    return idx;
  }
  auto it = lookup_.find(v);
  return it == lookup_.end() ? -1 : it->second;
}

Vertex Domain::vertex(Index i) const {
  if (i < 0 || i >= size_) throw std::out_of_range("Domain::vertex: index out of range");
  if (!is_box()) return verts_[static_cast<std::size_t>(i)];
  Vertex v(dim_);
  const Index n = side();
  for (int a = dim_ - 1; a >= 0; --a) {
    v[a] = static_cast<std::int32_t>(i % n) - radius_;
    i /= n;
  }
  return v;
}

VertexSet Domain::vertices() const {
  if (!is_box()) return verts_;
  VertexSet out;
  out.reserve(static_cast<std::size_t>(size_));
  for (Index i = 0; i < size_; ++i) out.push_back(vertex(i));
  return out;
}

Index Domain::neighbor(Index i, int axis, int sign) const {
  if (!is_box()) return nbr_[static_cast<std::size_t>((i * dim_ + axis) * 2 + (sign > 0 ? 1 : 0))];
  const Index st = strides_[static_cast<std::size_t>(axis)];
  const Index coord = (i / st) % side();
  if (sign > 0) return coord + 1 < side() ? i + st : -1;
  return coord > 0 ? i - st : -1;
}

Domain make_box(int d, int radius) { return Domain::box(d, radius); }

VertexSet boundary(const Domain &domain, const VertexSet &A) {
  std::unordered_set<Vertex, VertexHash> in(A.begin(), A.end());
  VertexSet out;
  for (const auto &x : A) {
    if (!domain.contains(x)) throw std::invalid_argument("boundary: A is not a subset of the domain");
    bool edge = false;
    for (int a = 0; a < x.dim && !edge; ++a)
      for (int s : {-1, 1}) {
        Vertex y = x;
        y[a] += s;
        if (!in.count(y)) {
          edge = true;
          break;
        }
      }
    if (edge) out.push_back(x);
  }
  return out;
}

std::vector<Edge> interior_edges(const Domain &domain) {
  if (!domain.is_box()) throw std::invalid_argument("interior_edges: domain must be a box");
  const int M = domain.radius();
  std::vector<Edge> out;
  for_each_domain_edge(domain, [&](Index i, Index j) {
    Vertex x = domain.vertex(i), y = domain.vertex(j);
    if (x.norm_inf() <= M - 1 || y.norm_inf() <= M - 1) out.emplace_back(x, y);
  });
  return out;
}

Index domain_edge_count(const Domain &domain) {
  if (domain.is_box()) {
    const Index n = domain.side();
    return domain.size() / n * (n - 1) * domain.dim();
  }
  Index count = 0;
  for_each_domain_edge(domain, [&](Index, Index) { ++count; });
  return count;
}

}  // namespace gfflab
