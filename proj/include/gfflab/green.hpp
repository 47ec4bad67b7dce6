#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "gfflab/lattice.hpp"

namespace gfflab {

/// Dense factorization limit for Green's matrices and direct solves.
inline constexpr Index kDenseLimit = 20000;
/// Relative residual target of the conjugate-gradient path.
inline constexpr double kIterativeTolerance = 1e-10;

/// Solver for (I - P) restricted to a set of free vertices of a domain;
/// every other vertex, and everything outside the domain, kills the walk.
/// P is the jump chain of the simple random walk on Z^d, so each entry is
/// 1/(2d) regardless of the domain shape.
class KilledSolver {
public:
  KilledSolver(const Domain &domain, std::vector<char> free_mask);

  const Domain &domain() const { return domain_; }
  Index free_count() const { return static_cast<Index>(free_to_domain_.size()); }
  /// Free-set position of domain index i, or -1.
  Index local(Index i) const { return domain_to_free_[static_cast<std::size_t>(i)]; }
  Index global(Index k) const { return free_to_domain_[static_cast<std::size_t>(k)]; }
  bool iterative() const { return !direct_; }

  /// Solves (I - P_FF) u = b for a right-hand side indexed by free position.
  Eigen::VectorXd solve(const Eigen::VectorXd &b) const;

  const Eigen::SparseMatrix<double> &matrix() const { return A_; }

private:
  Domain domain_;
  std::vector<Index> domain_to_free_;
  std::vector<Index> free_to_domain_;
  Eigen::SparseMatrix<double> A_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> direct_;
};

/// (I - P_D) as a sparse matrix in the domain's index order.
Eigen::SparseMatrix<double> killed_generator(const Domain &domain);

/// G_D = (I - P_D)^{-1}: expected occupation times of the rate-1
/// continuous-time walk killed on leaving the domain. Stored dense up to
/// kDenseLimit vertices; larger domains solve (and cache) columns lazily.
class DirichletGreen {
public:
  explicit DirichletGreen(Domain domain);

  const Domain &domain() const { return domain_; }
  bool is_dense() const { return dense_.has_value(); }
  const Eigen::MatrixXd &matrix() const;

  double operator()(Index i, Index j) const;
  double operator()(const Vertex &x, const Vertex &y) const;
  const Eigen::VectorXd &column(Index j) const;

private:
  Domain domain_;
  std::optional<Eigen::MatrixXd> dense_;
  mutable std::unique_ptr<KilledSolver> solver_;
  mutable std::map<Index, Eigen::VectorXd> columns_;
};

DirichletGreen dirichlet_green(const Domain &domain);

/// Entry-wise G_D on a box from the product structure of the killed heat
/// kernel: the rate-1 walk in d dimensions is d independent 1-D walks of
/// rate 1/d, so
///   G_D(x, y) = d * int_0^inf prod_i K_s(x_i, y_i) ds,
/// with K_s the 1-D killed kernel on {-M..M} (a finite sine sum). The
/// integral is evaluated by the trapezoid rule after s = exp(pi/2 sinh t).
class BoxGreenKernel {
public:
  BoxGreenKernel(int d, int radius, double tolerance = 1e-12);

  int dim() const { return d_; }
  int radius() const { return radius_; }
  std::size_t nodes() const { return weights_.size(); }

  double operator()(const Vertex &x, const Vertex &y) const;
  /// Same, with coordinates given as offsets in [0, 2M] (x_i + M).
  double from_offsets(const std::int32_t *x, const std::int32_t *y) const;

private:
  int d_;
  int radius_;
  int side_;
  std::vector<double> weights_;
  std::vector<double> table_;  // [(a * side + b) * nodes + j]
};

struct HittingMatrix {
  VertexSet from;
  VertexSet to;
  /// H(i, j) = P_{from[i]}(walk enters `to` before being killed, and does so at to[j]).
  Eigen::MatrixXd H;
};

/// Hitting distribution on `to`, killed on `kill` and on leaving the domain.
/// Solves one linear system per target column, or per source row when
/// there are fewer sources than targets.
HittingMatrix hitting_matrix(const Domain &domain, const VertexSet &kill, const VertexSet &from, const VertexSet &to);

struct EscapeResult {
  std::vector<double> value;  // extrapolated esc_A(x), aligned with A
  std::vector<double> error;  // extrapolation error estimate
  std::vector<int> radii;
  std::vector<std::vector<double>> truncated;  // [radius][x]
  double capacity = 0.0;        // sum of the extrapolated values
  double capacity_error = 0.0;
};

/// esc_A(x) = P_x(tau_A^+ = infinity) for d >= 3, from truncated escape
/// probabilities P_x(leave B(R) before returning to A) and Richardson
/// extrapolation in R^(2-d). Empty `radii` selects a default ladder of
/// four radii.
EscapeResult escape_probability(const VertexSet &A, int d, std::vector<int> radii = {});

struct CapacityResult {
  double value = 0.0;
  double error = 0.0;
};

CapacityResult capacity(const VertexSet &A, int d, std::vector<int> radii = {});

struct RoundTrip {
  VertexSet sites;  // boundary of A1
  Eigen::MatrixXd R;
  double spectral_radius = 0.0;
};

/// R = H(bd A1 -> A2) * H(A2 -> A1): walk from x in bd A1 reaches A2 and then
/// first re-enters A1 at x'. Leaving the ambient domain stands in for
/// escaping to infinity.
RoundTrip round_trip(const VertexSet &A1, const VertexSet &A2, const Domain &ambient);

double spectral_radius(const Eigen::MatrixXd &M);

/// Loop measure of loops crossing j times between A1 and A2: trace(R^j) / j.
double crossing_measure(const RoundTrip &rt, int j);

struct TotalCrossing {
  double value = 0.0;       // -log det(I - R)
  double partial = 0.0;     // sum_{j <= terms} mu_j
  double tail_bound = 0.0;  // bound on the omitted terms
  int terms = 64;
};

TotalCrossing total_crossing_measure(const RoundTrip &rt, int terms = 64);

}  // namespace gfflab
