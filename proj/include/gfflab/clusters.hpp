#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/metric_graph.hpp"

namespace gfflab {

/// Disjoint-set forest over the open vertices of a domain (path halving,
/// union by size). Closed vertices have no cluster.
class ClusterLabels {
public:
  ClusterLabels(std::shared_ptr<const Domain> domain, std::vector<char> open);

  const Domain &domain() const { return *domain_; }
  bool is_open(Index i) const { return open_[static_cast<std::size_t>(i)] != 0; }
  /// Root of i; i must be open.
  Index find(Index i) const;
  void unite(Index i, Index j);
  bool connected(Index i, Index j) const { return is_open(i) && is_open(j) && find(i) == find(j); }
  /// |C(i)|, or 0 when i is closed.
  Index size_of(Index i) const { return is_open(i) ? size_[static_cast<std::size_t>(find(i))] : 0; }

  Index open_count() const { return open_count_; }
  Index component_count() const { return components_; }
  /// Component sizes in order of their roots.
  std::vector<Index> component_sizes() const;

private:
  std::shared_ptr<const Domain> domain_;
  std::vector<char> open_;
  mutable std::vector<Index> parent_;
  std::vector<Index> size_;
  Index open_count_ = 0;
  Index components_ = 0;
};

/// Clusters of {phi > h} joined by the open edges.
template <class Scalar>
ClusterLabels build_clusters(const FieldSample<Scalar> &field, const OpenEdges &open, double h);

/// Sign clusters: vertices with phi != 0, an edge joins two vertices of equal
/// sign when its bridge keeps that sign (survival at |a|, |b| above 0). With
/// the same edge seed this is the union of the level-set clusters of phi
/// and of -phi at level 0.
template <class Scalar>
ClusterLabels sign_clusters(const FieldSample<Scalar> &field, std::uint64_t edge_seed, const BridgeLaw &law);

/// Calls f(v) for every v with |v| = N (the boundary of B(N)).
template <class F> void for_each_sphere_vertex(int d, int N, F &&f) {
  Vertex v(d);
  for (int a = 0; a < d; ++a) v[a] = -N;
  if (N == 0) {
    f(v);
    return;
  }
  for (;;) {
    bool on = false;
    for (int a = 0; a + 1 < d; ++a)
      if (v[a] == -N || v[a] == N) on = true;
    if (on) {
      for (int c = -N; c <= N; ++c) {
        v[d - 1] = c;
        f(v);
      }
    } else {
      v[d - 1] = -N;
      f(v);
      v[d - 1] = N;
      f(v);
    }
    int a = d - 2;
    for (; a >= 0; --a) {
      if (++v[a] <= N) break;
      v[a] = -N;
    }
    if (a < 0) break;
  }
}

/// Origin open and connected to some vertex of the boundary of B(N).
bool one_arm(const ClusterLabels &labels, int N);
/// x and y both open and in the same cluster.
bool two_point(const ClusterLabels &labels, const Vertex &x, const Vertex &y);
/// |C(x)|; 0 for a closed vertex.
Index cluster_volume(const ClusterLabels &labels, const Vertex &x);
/// Number of boundary vertices of B(N) connected to the origin.
Index boundary_count(const ClusterLabels &labels, int N);
/// max over clusters C of |C ∩ B(M)|.
Index max_cluster_in_box(const ClusterLabels &labels, int M);

/// Breadth-first exploration of a single cluster with edges decided on
/// demand from the counter-based edge uniforms. For the same field, level
/// and edge seed it reproduces exactly the cluster found by build_clusters
/// (level mode) or sign_clusters (sign mode), while touching only the
/// explored vertices. The visited marks are kept between calls and reset in
/// O(1) by an epoch counter.
class ClusterExplorer {
public:
  enum class Mode { level, sign };

  explicit ClusterExplorer(std::shared_ptr<const Domain> domain)
      : domain_(std::move(domain)), stamp_(static_cast<std::size_t>(domain_->size()), 0) {}

  const Domain &domain() const { return *domain_; }
  bool visited(Index i) const { return stamp_[static_cast<std::size_t>(i)] == epoch_; }
  /// Vertices reached by the last exploration, in BFS order.
  const std::vector<Index> &order() const { return queue_; }

  /// Explores the cluster of `start`. visit(i) is called on every vertex
  /// as it is reached and may return false to stop early. Returns the
  /// number of vertices reached (0 when start is closed).
  template <class Scalar, class Visit>
  Index explore(const FieldSample<Scalar> &field, Index start, double h, Mode mode, std::uint64_t edge_seed,
                const BridgeLaw &law, Visit &&visit) {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
    queue_.clear();
    const auto &v = field.values;
    double sign = 1.0;
    if (mode == Mode::sign) {
      h = 0.0;
      if (v(start) == Scalar(0)) return 0;
      sign = v(start) > Scalar(0) ? 1.0 : -1.0;
    }
    if (!(sign * v(start) > h)) return 0;
    const Domain &D = *domain_;
    const double scale = 2.0 / (law.variance_rate * law.length);
    stamp_[static_cast<std::size_t>(start)] = epoch_;
    queue_.push_back(start);
    if (!visit(start)) return 1;
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      const Index i = queue_[head];
      const double a = sign * v(i) - h;
      for (int ax = 0; ax < D.dim(); ++ax)
        for (int s : {-1, 1}) {
          const Index j = D.neighbor(i, ax, s);
          if (j < 0 || stamp_[static_cast<std::size_t>(j)] == epoch_) continue;
          const double b = sign * v(j) - h;
          if (!(b > 0.0)) continue;
          const Index e = edge_id(D, s > 0 ? i : j, ax);
          if (!survives(edge_uniform(edge_seed, e), scale * a * b)) continue;
          stamp_[static_cast<std::size_t>(j)] = epoch_;
          queue_.push_back(j);
          if (!visit(j)) return static_cast<Index>(queue_.size());
        }
    }
    return static_cast<Index>(queue_.size());
  }

private:
  std::shared_ptr<const Domain> domain_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<Index> queue_;
};

struct GhostEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error of 1 - exp(-h m) over volume draws m.
GhostEstimate ghost_functional(std::span<const Index> volumes, double h);

extern template ClusterLabels build_clusters(const FieldSample<double> &, const OpenEdges &, double);
extern template ClusterLabels build_clusters(const FieldSample<float> &, const OpenEdges &, double);
extern template ClusterLabels sign_clusters(const FieldSample<double> &, std::uint64_t, const BridgeLaw &);
extern template ClusterLabels sign_clusters(const FieldSample<float> &, std::uint64_t, const BridgeLaw &);

}  // namespace gfflab
