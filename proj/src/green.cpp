#include "gfflab/green.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace gfflab {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

std::unordered_set<Vertex, VertexHash> as_set(const VertexSet &s) { return {s.begin(), s.end()}; }

}  // namespace

KilledSolver::KilledSolver(const Domain &domain, std::vector<char> free_mask) : domain_(domain) {
  if (static_cast<Index>(free_mask.size()) != domain.size())
    throw std::invalid_argument("KilledSolver: mask size mismatch");
  domain_to_free_.assign(free_mask.size(), -1);
  for (Index i = 0; i < domain.size(); ++i)
    if (free_mask[static_cast<std::size_t>(i)]) {
      domain_to_free_[static_cast<std::size_t>(i)] = static_cast<Index>(free_to_domain_.size());
      free_to_domain_.push_back(i);
    }
  const Index n = free_count();
  const double p = 1.0 / (2.0 * domain.dim());
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(n * (2 * domain.dim() + 1)));
  for (Index k = 0; k < n; ++k) {
    trip.emplace_back(k, k, 1.0);
    domain.for_each_neighbor(free_to_domain_[static_cast<std::size_t>(k)], [&](Index j) {
      if (j < 0) return;
      const Index l = domain_to_free_[static_cast<std::size_t>(j)];
      if (l >= 0) trip.emplace_back(k, l, -p);
    });
  }
  A_.resize(n, n);
  A_.setFromTriplets(trip.begin(), trip.end());
  A_.makeCompressed();
  if (n > 0 && n <= kDenseLimit) {
    direct_ = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(A_);
    if (direct_->info() != Eigen::Success) throw std::runtime_error("KilledSolver: factorization failed");
  }
}

Eigen::VectorXd KilledSolver::solve(const Eigen::VectorXd &b) const {
  if (b.size() != free_count()) throw std::invalid_argument("KilledSolver::solve: rhs size mismatch");
  if (free_count() == 0) return {};
  if (direct_) return direct_->solve(b);
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(kIterativeTolerance);
  cg.setMaxIterations(100000);
  cg.compute(A_);
  Eigen::VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success) throw std::runtime_error("KilledSolver: conjugate gradient did not converge");
  return x;
}

Eigen::SparseMatrix<double> killed_generator(const Domain &domain) {
  KilledSolver s(domain, std::vector<char>(static_cast<std::size_t>(domain.size()), 1));
  return s.matrix();
}

// ---------------------------------------------------------------------------

DirichletGreen::DirichletGreen(Domain domain) : domain_(std::move(domain)) {
  if (domain_.size() == 0) throw std::invalid_argument("dirichlet_green: empty domain");
  if (domain_.size() <= kDenseLimit) {
    const Eigen::MatrixXd Q(killed_generator(domain_));
    Eigen::LLT<Eigen::MatrixXd> llt(Q);
    if (llt.info() != Eigen::Success) throw std::runtime_error("dirichlet_green: singular generator");
    Eigen::MatrixXd G = llt.solve(Eigen::MatrixXd::Identity(Q.rows(), Q.cols()));
    dense_ = 0.5 * (G + G.transpose());
  }
}

const Eigen::MatrixXd &DirichletGreen::matrix() const {
  if (!dense_) throw std::logic_error("DirichletGreen: matrix() on an iterative instance");
  return *dense_;
}

const Eigen::VectorXd &DirichletGreen::column(Index j) const {
  auto it = columns_.find(j);
  if (it != columns_.end()) return it->second;
  Eigen::VectorXd col;
  if (dense_) {
    col = dense_->col(j);
  } else {
    if (!solver_) solver_ = std::make_unique<KilledSolver>(domain_, std::vector<char>(static_cast<std::size_t>(domain_.size()), 1));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(domain_.size());
    e(j) = 1.0;
    col = solver_->solve(e);
  }
  return columns_.emplace(j, std::move(col)).first->second;
}

double DirichletGreen::operator()(Index i, Index j) const {
  if (dense_) return (*dense_)(i, j);
  if (columns_.count(j) || !columns_.count(i)) return column(j)(i);
  return column(i)(j);
}

double DirichletGreen::operator()(const Vertex &x, const Vertex &y) const {
  const Index i = domain_.index_of(x), j = domain_.index_of(y);
  if (i < 0 || j < 0) return 0.0;
  return (*this)(i, j);
}

DirichletGreen dirichlet_green(const Domain &domain) { return DirichletGreen(domain); }

// ---------------------------------------------------------------------------

BoxGreenKernel::BoxGreenKernel(int d, int radius, double tolerance) : d_(d), radius_(radius), side_(2 * radius + 1) {
  if (d < 1 || d > kMaxDim || radius < 0) throw std::invalid_argument("BoxGreenKernel: bad box");
  const int n = side_;
  const double L = n + 1.0;
  const double mu1 = 1.0 - std::cos(std::numbers::pi / L);
  // Lower cut: the neglected head is at most d * s_min.
  const double u_min = std::log(tolerance / d);
  // Upper cut: prod_i K_s <= exp(-s d mu1), so the tail is below exp(-s d mu1)/mu1.
  const double s_max = std::log(1.0 / (mu1 * tolerance)) / (d * mu1);
  const double u_max = std::log(std::max(s_max, 1.0));
  // s = exp(pi/2 sinh t): the trapezoid rule in t converges
  // double-exponentially and needs few nodes near s = 0.
  const double h = d >= 5 ? 0.1 : 0.05;
  const double t_min = -std::asinh(-2.0 * u_min / std::numbers::pi);
  const double t_max = std::asinh(2.0 * u_max / std::numbers::pi);
  const auto nodes = static_cast<std::size_t>(std::ceil((t_max - t_min) / h)) + 1;
  std::vector<double> s(nodes);
  weights_.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double t = t_min + h * static_cast<double>(j);
    s[j] = std::exp(0.5 * std::numbers::pi * std::sinh(t));
    weights_[j] = h * s[j] * 0.5 * std::numbers::pi * std::cosh(t) * d;
  }
  std::vector<double> lam(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) lam[static_cast<std::size_t>(k - 1)] = 1.0 - std::cos(std::numbers::pi * k / L);
  table_.assign(static_cast<std::size_t>(n * n) * nodes, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double *row = &table_[(static_cast<std::size_t>(a) * n + b) * nodes];
      for (int k = 1; k <= n; ++k) {
        const double c = 2.0 / L * std::sin(std::numbers::pi * k * (a + 1) / L) * std::sin(std::numbers::pi * k * (b + 1) / L);
        const double l = lam[static_cast<std::size_t>(k - 1)];
        for (std::size_t j = 0; j < nodes; ++j) row[j] += c * std::exp(-s[j] * l);
      }
    }
}

double BoxGreenKernel::from_offsets(const std::int32_t *x, const std::int32_t *y) const {
  const std::size_t J = weights_.size();
  constexpr std::size_t kMaxNodes = 1024;
  if (J > kMaxNodes) throw std::logic_error("BoxGreenKernel: too many nodes");
  double prod[kMaxNodes];
  const double *r0 = &table_[(static_cast<std::size_t>(x[0]) * side_ + y[0]) * J];
  for (std::size_t j = 0; j < J; ++j) prod[j] = r0[j] * weights_[j];
  for (int i = 1; i < d_; ++i) {
    const double *r = &table_[(static_cast<std::size_t>(x[i]) * side_ + y[i]) * J];
    for (std::size_t j = 0; j < J; ++j) prod[j] *= r[j];
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < J; ++j) sum += prod[j];
  return sum;
}

double BoxGreenKernel::operator()(const Vertex &x, const Vertex &y) const {
  if (x.dim != d_ || y.dim != d_) throw std::invalid_argument("BoxGreenKernel: dimension mismatch");
  if (x.norm_inf() > radius_ || y.norm_inf() > radius_) return 0.0;
  std::int32_t xo[kMaxDim], yo[kMaxDim];
  for (int i = 0; i < d_; ++i) {
    xo[i] = x[i] + radius_;
    yo[i] = y[i] + radius_;
  }
  return from_offsets(xo, yo);
}

// ---------------------------------------------------------------------------

HittingMatrix hitting_matrix(const Domain &domain, const VertexSet &kill, const VertexSet &from, const VertexSet &to) {
  const auto kill_set = as_set(kill);
  for (const auto &y : to)
    if (kill_set.count(y)) throw std::invalid_argument("hitting_matrix: kill and target sets overlap");
  for (const auto &x : from)
    if (!domain.contains(x)) throw std::invalid_argument("hitting_matrix: source outside the domain");

  HittingMatrix out{from, to, Eigen::MatrixXd::Zero(static_cast<Index>(from.size()), static_cast<Index>(to.size()))};
  std::vector<char> free(static_cast<std::size_t>(domain.size()), 1);
  std::vector<Index> target_col(static_cast<std::size_t>(domain.size()), -1);
  for (const auto &v : kill)
    if (Index i = domain.index_of(v); i >= 0) free[static_cast<std::size_t>(i)] = 0;
  for (std::size_t j = 0; j < to.size(); ++j)
    if (Index i = domain.index_of(to[j]); i >= 0) {
      free[static_cast<std::size_t>(i)] = 0;
      target_col[static_cast<std::size_t>(i)] = static_cast<Index>(j);
    }

  // Sources already on a target are absorbed at time zero.
  std::vector<std::pair<std::size_t, Index>> live;  // (row, domain index)
  for (std::size_t r = 0; r < from.size(); ++r) {
    const Index i = domain.index_of(from[r]);
    if (target_col[static_cast<std::size_t>(i)] >= 0)
      out.H(static_cast<Index>(r), target_col[static_cast<std::size_t>(i)]) = 1.0;
    else if (free[static_cast<std::size_t>(i)])
      live.emplace_back(r, i);
  }
  if (live.empty()) return out;

  KilledSolver solver(domain, free);
  const double p = 1.0 / (2.0 * domain.dim());
  if (live.size() < to.size()) {
    // Row mode: g = G_F(x, .), H(x, y) = sum_{z in F, z ~ y} g(z) / 2d.
    for (auto [r, i] : live) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(solver.free_count());
      e(solver.local(i)) = 1.0;
      const Eigen::VectorXd g = solver.solve(e);
      for (std::size_t j = 0; j < to.size(); ++j) {
        const Index t = domain.index_of(to[j]);
        if (t < 0) continue;
        double acc = 0.0;
        domain.for_each_neighbor(t, [&](Index z) {
          if (z >= 0 && solver.local(z) >= 0) acc += g(solver.local(z));
        });
        out.H(static_cast<Index>(r), static_cast<Index>(j)) = p * acc;
      }
    }
  } else {
    // Column mode: u solves (I - P_FF) u = P_{F,y}.
    for (std::size_t j = 0; j < to.size(); ++j) {
      const Index t = domain.index_of(to[j]);
      if (t < 0) continue;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(solver.free_count());
      bool reachable = false;
      domain.for_each_neighbor(t, [&](Index z) {
        if (z >= 0 && solver.local(z) >= 0) {
          b(solver.local(z)) += p;
          reachable = true;
        }
      });
      if (!reachable) continue;
      const Eigen::VectorXd u = solver.solve(b);
      for (auto [r, i] : live) out.H(static_cast<Index>(r), static_cast<Index>(j)) = u(solver.local(i));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> truncated_escape(const VertexSet &A, int d, int R) {
  const Domain box = make_box(d, R);
  std::vector<char> free(static_cast<std::size_t>(box.size()), 1);
  std::vector<Index> idx;
  for (const auto &x : A) {
    const Index i = box.index_of(x);
    if (i < 0) throw std::invalid_argument("escape_probability: truncation radius does not contain A");
    free[static_cast<std::size_t>(i)] = 0;
    idx.push_back(i);
  }
  KilledSolver solver(box, free);
  const double p = 1.0 / (2.0 * d);
  // u(z) = P_z(leave the box before hitting A)
  Eigen::VectorXd b = Eigen::VectorXd::Zero(solver.free_count());
  for (Index k = 0; k < solver.free_count(); ++k)
    box.for_each_neighbor(solver.global(k), [&](Index z) {
      if (z < 0) b(k) += p;
    });
  const Eigen::VectorXd u = solver.solve(b);
  std::vector<double> esc;
  for (Index i : idx) {
    double e = 0.0;
    box.for_each_neighbor(i, [&](Index z) {
      if (z < 0)
        e += p;
      else if (solver.local(z) >= 0)
        e += p * u(solver.local(z));
    });
    esc.push_back(e);
  }
  return esc;
}

// Polynomial extrapolation to t = 0 through (t_k, v_k) (Neville).
double extrapolate_zero(std::vector<double> t, std::vector<double> v) {
  const std::size_t n = t.size();
  for (std::size_t m = 1; m < n; ++m)
    for (std::size_t i = 0; i + m < n; ++i)
      v[i] = (t[i + m] * v[i] - t[i] * v[i + 1]) / (t[i + m] - t[i]);
  return v[0];
}

}  // namespace

namespace {

// Extrapolation of the truncated values in t = R^(2-d). 1/cap_R is close to
// affine in t (condenser between A and the truncation box), so the total is
// extrapolated through its reciprocal and the per-point shares
// esc_R(x)/cap_R, which converge quickly, are extrapolated directly.
void extrapolate_escape(const std::vector<double> &t, const std::vector<std::vector<double>> &trunc,
                        std::vector<double> &esc, double &cap) {
  const std::size_t K = t.size(), n = trunc.front().size();
  std::vector<double> inv(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (double e : trunc[k]) s += e;
    inv[k] = 1.0 / s;
  }
  cap = K >= 2 ? 1.0 / extrapolate_zero(t, inv) : 1.0 / inv[0];
  esc.assign(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> share(K);
    for (std::size_t k = 0; k < K; ++k) share[k] = trunc[k][a] * inv[k];
    esc[a] = cap * (K >= 2 ? extrapolate_zero(t, share) : share[0]);
  }
}

}  // namespace

EscapeResult escape_probability(const VertexSet &A, int d, std::vector<int> radii) {
  if (d <= 2) throw std::invalid_argument("escape_probability: requires d >= 3 (the walk is recurrent otherwise)");
  if (A.empty()) throw std::invalid_argument("escape_probability: empty set");
  int r0 = 0;
  for (const auto &x : A) {
    if (x.dim != d) throw std::invalid_argument("escape_probability: dimension mismatch");
    r0 = std::max(r0, x.norm_inf());
  }
  if (radii.empty()) radii = {2 * r0 + 8, 3 * r0 + 10, 4 * r0 + 12, 6 * r0 + 16};
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  if (radii.size() < 2) throw std::invalid_argument("escape_probability: need at least two truncation radii");

  EscapeResult res;
  res.radii = radii;
  for (int R : radii) res.truncated.push_back(truncated_escape(A, d, R));
  const std::size_t K = radii.size();
  std::vector<double> t(K);
  for (std::size_t k = 0; k < K; ++k) t[k] = std::pow(static_cast<double>(radii[k]), 2.0 - d);

  std::vector<double> coarse;
  double coarse_cap = 0.0;
  extrapolate_escape(t, res.truncated, res.value, res.capacity);
  // error: compare with the extrapolation that drops the smallest radius
  extrapolate_escape(std::vector<double>(t.begin() + 1, t.end()),
                     std::vector<std::vector<double>>(res.truncated.begin() + 1, res.truncated.end()), coarse,
                     coarse_cap);
  res.capacity_error = std::fabs(res.capacity - coarse_cap);
  for (std::size_t a = 0; a < A.size(); ++a) {
    res.error.push_back(std::fabs(res.value[a] - coarse[a]));
    res.value[a] = std::clamp(res.value[a], 0.0, 1.0);
  }
  return res;
}

CapacityResult capacity(const VertexSet &A, int d, std::vector<int> radii) {
  const EscapeResult e = escape_probability(A, d, std::move(radii));
  return {e.capacity, e.capacity_error};
}

// ---------------------------------------------------------------------------

double spectral_radius(const Eigen::MatrixXd &M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

RoundTrip round_trip(const VertexSet &A1, const VertexSet &A2, const Domain &ambient) {
  const auto s1 = as_set(A1);
  for (const auto &y : A2)
    if (s1.count(y)) throw std::invalid_argument("round_trip: A1 and A2 overlap");
  RoundTrip rt;
  rt.sites = boundary(ambient, A1);
  const HittingMatrix out = hitting_matrix(ambient, {}, rt.sites, A2);
  const HittingMatrix back = hitting_matrix(ambient, {}, A2, rt.sites);
  // Re-entry into A1 from outside happens on its boundary, so targeting
  // bd A1 is the same as targeting A1.
  rt.R = out.H * back.H;
  rt.spectral_radius = spectral_radius(rt.R);
  return rt;
}

double crossing_measure(const RoundTrip &rt, int j) {
  if (j < 1) throw std::invalid_argument("crossing_measure: j must be positive");
  if (rt.R.size() == 0) return 0.0;
  Eigen::MatrixXd P = rt.R;
  for (int k = 1; k < j; ++k) P = P * rt.R;
  return P.trace() / j;
}

TotalCrossing total_crossing_measure(const RoundTrip &rt, int terms) {
  if (rt.spectral_radius >= 1.0) throw std::domain_error("total_crossing_measure: spectral radius >= 1");
  TotalCrossing tc;
  tc.terms = terms;
  const Index n = rt.R.rows();
  if (n == 0) return tc;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(I - rt.R);
  const Eigen::MatrixXd U = lu.matrixLU().triangularView<Eigen::Upper>();
  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) logdet += std::log(std::fabs(U(i, i)));
  tc.value = -logdet;
  Eigen::MatrixXd P = rt.R;
  for (int j = 1; j <= terms; ++j) {
    tc.partial += P.trace() / j;
    P = P * rt.R;
  }
  const double rho = rt.spectral_radius;
  tc.tail_bound = static_cast<double>(n) * std::pow(rho, terms + 1) / ((terms + 1) * (1.0 - rho));
  return tc;
}

}  // namespace gfflab
