#include "gfflab/metric_graph.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace gfflab {

BridgeLaw BridgeLaw::make(int d, BridgeConvention convention) {
  if (d < 1) throw std::invalid_argument("bridge law: d must be at least 1");
  BridgeLaw law;
  law.d = d;
  law.length = d;
  if (convention == BridgeConvention::standard) {
    law.variance_rate = 2.0;
  } else {
    if (d < 2) throw std::invalid_argument("bridge law: the rival convention needs d >= 2");
    law.variance_rate = 2.0 * d / (d - 1.0);
  }
  return law;
}

double bridge_survival(const BridgeLaw &law, double a, double b, double h) {
  if (law.d < 1) throw std::invalid_argument("bridge_survival: d must be at least 1");
  if (a <= h || b <= h) return 0.0;
  return -std::expm1(-2.0 * (a - h) * (b - h) / (law.variance_rate * law.length));
}

double bridge_survival(double a, double b, double h, int d) { return bridge_survival(BridgeLaw::make(d), a, b, h); }

Index OpenEdges::count() const {
  Index c = 0;
  for (auto w : bits) c += std::popcount(w);
  return c;
}

template <class Scalar>
OpenEdges percolate_with_seed(const FieldSample<Scalar> &field, double h, std::uint64_t edge_seed,
                              const BridgeLaw &law) {
  const Domain &D = *field.domain;
  OpenEdges out;
  out.domain = field.domain;
  out.level = h;
  out.field_seed = field.seed;
  out.edge_seed = edge_seed;
  const Index n = D.size();
  const int d = D.dim();
  out.bits.assign(static_cast<std::size_t>((n * d + 63) / 64), 0);
  const double scale = 2.0 / (law.variance_rate * law.length);
  for_each_edge(D, [&](Index i, int ax, Index j) {
    const double a = field.values(i), b = field.values(j);
    if (!(a > h && b > h)) return;
    const Index e = edge_id(D, i, ax);
    if (survives(edge_uniform(edge_seed, e), scale * (a - h) * (b - h)))
      out.bits[static_cast<std::size_t>(e >> 6)] |= std::uint64_t{1} << (e & 63);
  });
  return out;
}

template <class Scalar>
OpenEdges percolate(const FieldSample<Scalar> &field, double h, Rng &rng, const BridgeLaw &law) {
  return percolate_with_seed(field, h, rng(), law);
}

double simulate_bridge_min(const BridgeLaw &law, double a, double b, int steps, Rng &rng) {
  if (steps < 2) throw std::invalid_argument("simulate_bridge_min: steps must be at least 2");
  const double sd = std::sqrt(law.variance_rate * law.length / steps);
  // Random walk W, then B_k = a + W_k - (k/n)(W_n - (b - a)).
  std::vector<double> w(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int k = 1; k <= steps; ++k) w[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k) - 1] + sd * rng.normal();
  const double drift = w.back() - (b - a);
  double m = std::min(a, b);
  for (int k = 1; k < steps; ++k) m = std::min(m, a + w[static_cast<std::size_t>(k)] - drift * k / steps);
  return m;
}

double simulate_bridge_min(double a, double b, int d, int steps, Rng &rng) {
  return simulate_bridge_min(BridgeLaw::make(d), a, b, steps, rng);
}

BridgeOracle bridge_survival_oracle(const BridgeLaw &law, double a, double b, double h, std::uint64_t bridges,
                                    int steps, Rng &rng) {
  if (steps < 8 || steps % 4 != 0) throw std::invalid_argument("bridge oracle: steps must be a multiple of 4");
  const double sd = std::sqrt(law.variance_rate * law.length / steps);
  BridgeOracle r;
  r.bridges = bridges;
  r.steps = steps;
  double sf = 0.0, sc = 0.0, sy = 0.0, sy2 = 0.0;
  std::vector<double> w(static_cast<std::size_t>(steps) + 1);
  for (std::uint64_t n = 0; n < bridges; ++n) {
    w[0] = 0.0;
    for (int k = 1; k <= steps; ++k) w[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k) - 1] + sd * rng.normal();
    const double drift = (w.back() - (b - a)) / steps;
    double mf = std::min(a, b), mc = mf;
    for (int k = 1; k < steps; ++k) {
      const double v = a + w[static_cast<std::size_t>(k)] - drift * k;
      mf = std::min(mf, v);
      if (k % 4 == 0) mc = std::min(mc, v);
    }
    const double f = mf > h ? 1.0 : 0.0, c = mc > h ? 1.0 : 0.0;
    const double y = 2.0 * f - c;
    sf += f;
    sc += c;
    sy += y;
    sy2 += y * y;
  }
  const double N = static_cast<double>(bridges);
  r.fine = sf / N;
  r.coarse = sc / N;
  r.extrapolated = sy / N;
  r.stderr_extrapolated = std::sqrt(std::max(0.0, sy2 / N - r.extrapolated * r.extrapolated) / (N - 1.0));
  return r;
}

template OpenEdges percolate(const FieldSample<double> &, double, Rng &, const BridgeLaw &);
template OpenEdges percolate(const FieldSample<float> &, double, Rng &, const BridgeLaw &);
template OpenEdges percolate_with_seed(const FieldSample<double> &, double, std::uint64_t, const BridgeLaw &);
template OpenEdges percolate_with_seed(const FieldSample<float> &, double, std::uint64_t, const BridgeLaw &);

}  // namespace gfflab
