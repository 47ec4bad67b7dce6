#include "gfflab/clusters.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace gfflab {

ClusterLabels::ClusterLabels(std::shared_ptr<const Domain> domain, std::vector<char> open)
    : domain_(std::move(domain)), open_(std::move(open)) {
  const Index n = domain_->size();
  if (static_cast<Index>(open_.size()) != n) throw std::invalid_argument("ClusterLabels: mask size mismatch");
  parent_.resize(static_cast<std::size_t>(n));
  size_.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    parent_[static_cast<std::size_t>(i)] = i;
    if (open_[static_cast<std::size_t>(i)]) {
      size_[static_cast<std::size_t>(i)] = 1;
      ++open_count_;
    }
  }
  components_ = open_count_;
}

Index ClusterLabels::find(Index i) const {
  auto *p = parent_.data();
  while (p[i] != i) {
    p[i] = p[p[i]];
    i = p[i];
  }
  return i;
}

void ClusterLabels::unite(Index i, Index j) {
  Index a = find(i), b = find(j);
  if (a == b) return;
  if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
  parent_[static_cast<std::size_t>(b)] = a;
  size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
  --components_;
}

std::vector<Index> ClusterLabels::component_sizes() const {
  std::vector<Index> out;
  for (Index i = 0; i < domain_->size(); ++i)
    if (is_open(i) && parent_[static_cast<std::size_t>(i)] == i) out.push_back(size_[static_cast<std::size_t>(i)]);
  return out;
}

template <class Scalar>
ClusterLabels build_clusters(const FieldSample<Scalar> &field, const OpenEdges &open, double h) {
  if (field.domain != open.domain &&
      (field.domain->size() != open.domain->size() || field.domain->dim() != open.domain->dim()))
    throw std::invalid_argument("build_clusters: field and edges live on different domains");
  const Domain &D = *field.domain;
  const Index n = D.size();
  std::vector<char> mask(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = field.values(i) > h;
  ClusterLabels labels(field.domain, std::move(mask));
  for_each_edge(D, [&](Index i, int a, Index j) {
    if (open.open(i, a)) labels.unite(i, j);
  });
  return labels;
}

template <class Scalar>
ClusterLabels sign_clusters(const FieldSample<Scalar> &field, std::uint64_t edge_seed, const BridgeLaw &law) {
  const Domain &D = *field.domain;
  const Index n = D.size();
  std::vector<char> mask(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = field.values(i) != Scalar(0);
  ClusterLabels labels(field.domain, std::move(mask));
  const double scale = 2.0 / (law.variance_rate * law.length);
  for_each_edge(D, [&](Index i, int ax, Index j) {
    const double ab = static_cast<double>(field.values(i)) * static_cast<double>(field.values(j));
    if (!(ab > 0.0)) return;
    if (survives(edge_uniform(edge_seed, edge_id(D, i, ax)), scale * ab)) labels.unite(i, j);
  });
  return labels;
}

namespace {

void require_ball(const ClusterLabels &labels, int N) {
  const Domain &D = labels.domain();
  if (N < 0) throw std::invalid_argument("negative radius");
  if (D.is_box()) {
    if (N > D.radius()) throw std::invalid_argument("radius exceeds the domain");
    return;
  }
  for_each_sphere_vertex(D.dim(), N, [&](const Vertex &v) {
    if (!D.contains(v)) throw std::invalid_argument("radius exceeds the domain");
  });
}

}  // namespace

bool one_arm(const ClusterLabels &labels, int N) {
  require_ball(labels, N);
  const Domain &D = labels.domain();
  const Index o = D.index_of(origin(D.dim()));
  if (!labels.is_open(o)) return false;
  const Index root = labels.find(o);
  bool hit = false;
  for_each_sphere_vertex(D.dim(), N, [&](const Vertex &v) {
    if (hit) return;
    const Index i = D.index_of(v);
    if (labels.is_open(i) && labels.find(i) == root) hit = true;
  });
  return hit;
}

bool two_point(const ClusterLabels &labels, const Vertex &x, const Vertex &y) {
  const Index i = labels.domain().index_of(x), j = labels.domain().index_of(y);
  if (i < 0 || j < 0) throw std::invalid_argument("two_point: vertex outside the domain");
  return labels.connected(i, j);
}

Index cluster_volume(const ClusterLabels &labels, const Vertex &x) {
  const Index i = labels.domain().index_of(x);
  if (i < 0) throw std::invalid_argument("cluster_volume: vertex outside the domain");
  return labels.size_of(i);
}

Index boundary_count(const ClusterLabels &labels, int N) {
  require_ball(labels, N);
  const Domain &D = labels.domain();
  const Index o = D.index_of(origin(D.dim()));
  if (!labels.is_open(o)) return 0;
  const Index root = labels.find(o);
  Index count = 0;
  for_each_sphere_vertex(D.dim(), N, [&](const Vertex &v) {
    const Index i = D.index_of(v);
    if (labels.is_open(i) && labels.find(i) == root) ++count;
  });
  return count;
}

Index max_cluster_in_box(const ClusterLabels &labels, int M) {
  require_ball(labels, M);
  const Domain &D = labels.domain();
  std::unordered_map<Index, Index> counts;
  Index best = 0;
  for (int r = 0; r <= M; ++r)
    for_each_sphere_vertex(D.dim(), r, [&](const Vertex &v) {
      const Index i = D.index_of(v);
      if (labels.is_open(i)) best = std::max(best, ++counts[labels.find(i)]);
    });
  return best;
}

GhostEstimate ghost_functional(std::span<const Index> volumes, double h) {
  if (h < 0.0) throw std::invalid_argument("ghost_functional: h must be nonnegative");
  GhostEstimate g;
  g.n = volumes.size();
  if (volumes.empty()) return g;
  double s = 0.0, s2 = 0.0;
  for (Index m : volumes) {
    const double v = -std::expm1(-h * static_cast<double>(m));
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(volumes.size());
  g.mean = s / n;
  g.se = volumes.size() > 1 ? std::sqrt(std::max(0.0, (s2 - n * g.mean * g.mean) / (n - 1.0)) / n) : 0.0;
  return g;
}

template ClusterLabels build_clusters(const FieldSample<double> &, const OpenEdges &, double);
template ClusterLabels build_clusters(const FieldSample<float> &, const OpenEdges &, double);
template ClusterLabels sign_clusters(const FieldSample<double> &, std::uint64_t, const BridgeLaw &);
template ClusterLabels sign_clusters(const FieldSample<float> &, std::uint64_t, const BridgeLaw &);

}  // namespace gfflab
