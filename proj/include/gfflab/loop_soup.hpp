#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfflab/green.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

/// Largest domain accepted by the soup sampler.
inline constexpr Index kSoupVertexLimit = 4096;
/// Longest loop accepted by enumerate_loops.
inline constexpr int kEnumerationMaxLength = 14;

/// A loop of the rate-1 continuous-time walk on a domain: the cyclic jump
/// sequence x_0, ..., x_{k-1} (x_k = x_0 implied) of domain indices, and the
/// Exp(1) holding time spent at each position.
struct DiscreteLoop {
  std::vector<Index> cycle;
  std::vector<double> holding;

  int jumps() const { return cycle.size() <= 1 ? 0 : static_cast<int>(cycle.size()); }
};

/// Multiplicity J of a cycle: k divided by its rotation period.
int cycle_multiplicity(std::span<const Index> cycle);

/// Unrooted class measure J^{-1} (2d)^{-k} of a cycle with k >= 2 jumps,
/// given either with or without the closing repeat of x_0.
double loop_class_measure(std::span<const Vertex> cycle, int d);

struct SoupSample {
  std::vector<DiscreteLoop> loops;   // loops with at least two jumps
  std::vector<double> point_layer;   // local time of point loops per vertex
  std::vector<double> occupation;    // total local time per vertex
};

/// Loop soup at intensity alpha on a killed domain, sampled exactly by the
/// minimal-vertex decomposition. With vertices ordered by domain index and
/// D_i = {i, ..., n-1}, loops whose smallest vertex is i live in D_i and
/// visit i a NegBin(alpha, r_i) number of times, r_i being the jump-chain
/// return probability to i in D_i. The visits split into excursions from i
/// (the walk conditioned to return, by a Doob transform with
/// h_i = G_{D_i}(., i) / G_{D_i}(i, i)), grouped into loops by a Chinese
/// restaurant process with parameter alpha. Point loops add an independent
/// Gamma(alpha, 1) local time at every vertex.
class LoopSoupSampler {
public:
  explicit LoopSoupSampler(const Domain &domain, double alpha = 0.5);

  const Domain &domain() const { return domain_; }
  double alpha() const { return alpha_; }
  /// r_i = 1 - 1 / G_{D_i}(i, i).
  double return_probability(Index i) const { return r_[static_cast<std::size_t>(i)]; }

  SoupSample sample(Rng &rng) const;

private:
  std::vector<Index> excursion(Index i, Rng &rng) const;
  double h(Index i, Index y) const { return h_[static_cast<std::size_t>(i)][static_cast<std::size_t>(y - i)]; }

  Domain domain_;
  double alpha_;
  std::vector<double> r_;
  std::vector<std::vector<double>> h_;  // h_[i][y - i] for y >= i
};

SoupSample sample_soup(const Domain &domain, Rng &rng);

struct VertexIsomorphism {
  Index vertex = 0;
  double green_diagonal = 0.0;
  KsResult ks;
  double mean = 0.0, mean_se = 0.0;          // target G(x,x)/2
  double variance = 0.0, variance_se = 0.0;  // target G(x,x)^2/2
};

inline constexpr std::size_t kIsomorphismMinSamples = 10000;

/// Compares each vertex's occupation against Gamma(1/2, G_D(x,x)), the law
/// of phi_x^2 / 2. `occupations[s][x]` is the local time at x in sample s.
std::vector<VertexIsomorphism> isomorphism_test(const std::vector<std::vector<double>> &occupations,
                                                const DirichletGreen &green);

struct LoopClass {
  std::vector<Index> cycle;  // canonical rotation, starting at the smallest index
  int multiplicity = 1;
  double measure = 0.0;
};

/// All rotation classes of closed jump-chain paths with 2..max_len jumps
/// inside the domain, with their exact measures. Throws std::length_error
/// once more than `budget` search steps are needed.
std::vector<LoopClass> enumerate_loops(const Domain &domain, int max_len, std::uint64_t budget = 200'000'000);

/// Number of crossings kappa: passages from A1 to A2 and back, counted
/// around the cycle. `a1` and `a2` are domain-indexed membership masks.
int crossing_count(std::span<const Index> cycle, const std::vector<char> &a1, const std::vector<char> &a2);

/// -log det(I - P_D) minus the enumerated part up to max_len: the measure of
/// all loops longer than max_len, which bounds any truncated subtotal.
double loop_tail_measure(const Domain &domain, int max_len);

}  // namespace gfflab
