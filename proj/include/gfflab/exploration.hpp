#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/green.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/metric_graph.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

/// When to stop growing the origin cluster.
struct ExplorationRule {
  /// Only vertices with |x| <= restrict_radius are explored.
  int restrict_radius = 0;
  /// Stop as soon as a cluster vertex with |x| >= stop_radius is found.
  int stop_radius = 0;
};

struct ExplorationResult {
  Index volume = 0;           // cluster vertices found (the full |C(0)| unless stopped)
  bool stopped = false;       // reached stop_radius
  Index revealed = 0;         // field values drawn
  bool completed_field = false;
  int max_norm = -1;          // largest |x| over the cluster
  std::uint64_t edge_seed = 0;
};

struct ExplorerOptions {
  double level = 0.0;
  /// Revealed-set size beyond which the rest of the field is completed at
  /// once (spectral sample plus kriging) instead of vertex by vertex.
  Index completion_threshold = 1500;
  std::uint64_t memory_cap = kDefaultMemoryCap;
  BridgeConvention convention = BridgeConvention::standard;
};

/// Exact sampler of the origin's level-set cluster of the Dirichlet GFF on
/// an ambient box, without drawing the whole field. Field values are
/// revealed only where the breadth-first exploration needs them, each
/// block drawn from its exact conditional law given everything revealed so
/// far (incremental Cholesky factor of G_RR, entries from BoxGreenKernel).
/// Edge states come from the same counter-based uniforms as percolate, so
/// the law of the cluster is that of build_clusters on a full sample.
///
/// If the revealed set outgrows `completion_threshold`, the remaining field
/// is completed exactly: psi ~ GFF (spectral, single precision), then
/// phi = psi + G_{.R} G_RR^{-1} (phi_R - psi_R), with G applied spectrally.
class OriginClusterSampler {
public:
  OriginClusterSampler(int d, int ambient_radius, ExplorerOptions options = {});

  const Domain &ambient() const { return *box_; }
  const BoxGreenKernel &kernel() const { return kernel_; }
  /// Bytes needed by the completion step.
  std::uint64_t completion_bytes() const;

  ExplorationResult explore(Rng &rng, const ExplorationRule &rule);

  /// Value at domain index i after the last exploration, if it was drawn.
  bool revealed(Index i) const { return pos_.count(i) != 0 || completed_; }
  double value(Index i) const;
  /// The full field after a completed exploration.
  FieldSample<float> completed_sample() const;

private:
  double reveal_value(Index i) const;
  void reveal_block(const std::vector<Index> &block, Rng &rng);
  void complete_field(Rng &rng);

  std::shared_ptr<const Domain> box_;
  BoxGreenKernel kernel_;
  ExplorerOptions options_;
  BridgeLaw law_;

  // revealed set R, in reveal order
  std::unordered_map<Index, Index> pos_;
  std::vector<std::int32_t> offsets_;  // k * d
  std::vector<Index> order_;
  Eigen::VectorXd phi_;                // values of R
  Eigen::VectorXd z_;                  // whitened values, phi_R = L z
  Eigen::MatrixXd L_;                  // Cholesky factor of G_RR (leading k x k block)
  Index k_ = 0;

  bool completed_ = false;
  std::unique_ptr<SpectralSampler<float>> spectral_;
  Eigen::VectorXf field_;
};

}  // namespace gfflab
