#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

/// How "variance 2 at time 1" is read for the bridge on an edge of length d.
///   standard:  the motion has variance rate 2, so the bridge dips below the
///              level with probability exp(-(a-h)(b-h)/d).
///   rival:     the bridge itself has variance 2 at time 1, which amounts to
///              a rate of 2d/(d-1) and a dip probability exp(-(a-h)(b-h)(d-1)/d^2).
enum class BridgeConvention { standard, rival };

/// Brownian bridge law on one edge interval.
struct BridgeLaw {
  int d = 3;
  double length = 3.0;
  double variance_rate = 2.0;

  static BridgeLaw make(int d, BridgeConvention convention = BridgeConvention::standard);
};

/// P(bridge from a to b stays above h) = 1 - exp(-2(a-h)(b-h) / (rate * length)),
/// and 0 when an endpoint is at or below the level.
double bridge_survival(const BridgeLaw &law, double a, double b, double h);
double bridge_survival(double a, double b, double h, int d);

/// Counter-based edge uniform: reproducible from (edge seed, edge id) in any
/// evaluation order.
inline double edge_uniform(std::uint64_t edge_seed, Index edge_id) {
  return static_cast<double>(mix64(edge_seed, static_cast<std::uint64_t>(edge_id)) >> 11) * 0x1.0p-53;
}

/// u < 1 - exp(-x) for x >= 0, using x - x^2/2 <= 1 - exp(-x) <= x to skip
/// the exponential in most calls.
inline bool survives(double u, double x) {
  if (u >= x) return false;
  if (u < x - 0.5 * x * x) return true;
  return u < -std::expm1(-x);
}

/// Edge id of {i, neighbor(i, axis, +1)}.
inline Index edge_id(const Domain &domain, Index lower, int axis) { return lower * domain.dim() + axis; }

/// Open edges of the metric-graph level set restricted to lattice
/// connectivity. Bit edge_id(i, a) refers to the edge between vertex i and
/// its +e_a neighbour; every edge with both endpoints in the domain is
/// eligible.
struct OpenEdges {
  std::shared_ptr<const Domain> domain;
  std::vector<std::uint64_t> bits;
  double level = 0.0;
  std::uint64_t field_seed = 0;
  std::uint64_t edge_seed = 0;

  bool open(Index lower, int axis) const {
    const auto e = static_cast<std::uint64_t>(edge_id(*domain, lower, axis));
    return (bits[e >> 6] >> (e & 63)) & 1u;
  }
  Index count() const;
};

/// Opens each edge with both endpoint values above h independently with
/// probability bridge_survival. One draw from `rng` fixes the edge seed.
template <class Scalar>
OpenEdges percolate(const FieldSample<Scalar> &field, double h, Rng &rng, const BridgeLaw &law);
template <class Scalar> OpenEdges percolate(const FieldSample<Scalar> &field, double h, Rng &rng) {
  return percolate(field, h, rng, BridgeLaw::make(field.domain->dim()));
}
/// Same, with an explicit edge seed.
template <class Scalar>
OpenEdges percolate_with_seed(const FieldSample<Scalar> &field, double h, std::uint64_t edge_seed, const BridgeLaw &law);

/// Minimum of a discretized bridge from a to b over [0, length] with the
/// law's variance rate, sampled on `steps` equal increments.
double simulate_bridge_min(const BridgeLaw &law, double a, double b, int steps, Rng &rng);
double simulate_bridge_min(double a, double b, int d, int steps, Rng &rng);

struct BridgeOracle {
  double fine = 0.0;          // survival frequency at `steps`
  double coarse = 0.0;        // same paths observed on every fourth point
  double extrapolated = 0.0;  // 2 fine - coarse (error ~ steps^(-1/2) removed)
  double stderr_extrapolated = 0.0;
  std::uint64_t bridges = 0;
  int steps = 0;
};

/// Discretized-bridge estimate of bridge_survival with Richardson
/// extrapolation in 1/sqrt(steps). `steps` must be a multiple of 4.
BridgeOracle bridge_survival_oracle(const BridgeLaw &law, double a, double b, double h, std::uint64_t bridges,
                                    int steps, Rng &rng);

extern template OpenEdges percolate(const FieldSample<double> &, double, Rng &, const BridgeLaw &);
extern template OpenEdges percolate(const FieldSample<float> &, double, Rng &, const BridgeLaw &);
extern template OpenEdges percolate_with_seed(const FieldSample<double> &, double, std::uint64_t, const BridgeLaw &);
extern template OpenEdges percolate_with_seed(const FieldSample<float> &, double, std::uint64_t, const BridgeLaw &);

}  // namespace gfflab
