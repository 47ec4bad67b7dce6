#include "gfflab/loop_soup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gfflab {

namespace {

/// Smallest p >= 1 with s rotated by p equal to s.
template <class T> std::size_t rotation_period(std::span<const T> s) {
  const std::size_t k = s.size();
  for (std::size_t p = 1; p < k; ++p) {
    if (k % p != 0) continue;
    bool same = true;
    for (std::size_t t = 0; t < k && same; ++t) same = s[t] == s[(t + p) % k];
    if (same) return p;
  }
  return k;
}

}  // namespace

int cycle_multiplicity(std::span<const Index> cycle) {
  if (cycle.empty()) throw std::invalid_argument("cycle_multiplicity: empty cycle");
  return static_cast<int>(cycle.size() / rotation_period(cycle));
}

double loop_class_measure(std::span<const Vertex> cycle, int d) {
  if (cycle.size() > 1 && cycle.front() == cycle.back()) cycle = cycle.first(cycle.size() - 1);
  const std::size_t k = cycle.size();
  if (k < 2) throw std::invalid_argument("loop_class_measure: a loop needs at least two jumps");
  for (std::size_t t = 0; t < k; ++t) {
    const Vertex &a = cycle[t], &b = cycle[(t + 1) % k];
    if (a.dim != d || b.dim != d) throw std::invalid_argument("loop_class_measure: dimension mismatch");
    Vertex diff(d);
    for (int i = 0; i < d; ++i) diff[i] = a[i] - b[i];
    if (diff.norm_l1() != 1) throw std::invalid_argument("loop_class_measure: consecutive vertices are not adjacent");
  }
  const double J = static_cast<double>(k / rotation_period(cycle));
  return std::pow(2.0 * d, -static_cast<double>(k)) / J;
}

LoopSoupSampler::LoopSoupSampler(const Domain &domain, double alpha) : domain_(domain), alpha_(alpha) {
  const Index n = domain.size();
  if (n > kSoupVertexLimit) throw std::invalid_argument("sample_soup: domain larger than 4096 vertices");
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_soup: alpha must be positive");
  r_.resize(static_cast<std::size_t>(n));
  h_.resize(static_cast<std::size_t>(n));
  if (n == 0) return;
  // Removing vertex i from the domain is a rank-one downdate of the Green's
  // matrix: G_{D_{i+1}} = G_{D_i} - g g^T / g(i) with g = G_{D_i}(., i).
  Eigen::MatrixXd G = dirichlet_green(domain).matrix();
  for (Index i = 0; i < n; ++i) {
    const Index m = n - i;
    const Eigen::VectorXd g = G.col(i).tail(m);
    const double gii = g(0);
    r_[static_cast<std::size_t>(i)] = std::max(0.0, 1.0 - 1.0 / gii);
    auto &hi = h_[static_cast<std::size_t>(i)];
    hi.resize(static_cast<std::size_t>(m));
    for (Index t = 0; t < m; ++t) hi[static_cast<std::size_t>(t)] = g(t) / gii;
    if (m > 1) G.bottomRightCorner(m - 1, m - 1).noalias() -= g.tail(m - 1) * (g.tail(m - 1).transpose() / gii);
  }
}

std::vector<Index> LoopSoupSampler::excursion(Index i, Rng &rng) const {
  std::vector<Index> path{i};
  Index y = i;
  const int d = domain_.dim();
  Index nb[16];
  double w[16];
  for (;;) {
    int c = 0;
    double total = 0.0;
    for (int a = 0; a < d; ++a)
      for (int s = -1; s <= 1; s += 2) {
        const Index z = domain_.neighbor(y, a, s);
        if (z < i) continue;
        nb[c] = z;
        w[c] = h(i, z);
        total += w[c];
        ++c;
      }
    double u = rng.uniform() * total;
    int pick = 0;
    while (pick + 1 < c && u >= w[pick]) u -= w[pick++];
    y = nb[pick];
    if (y == i) return path;
    path.push_back(y);
  }
}

SoupSample LoopSoupSampler::sample(Rng &rng) const {
  const Index n = domain_.size();
  SoupSample out;
  out.point_layer.resize(static_cast<std::size_t>(n));
  for (auto &p : out.point_layer) p = rng.gamma(alpha_);
  out.occupation = out.point_layer;
  std::vector<std::vector<Index>> exc;
  std::vector<std::size_t> next;
  std::vector<char> done;
  for (Index i = 0; i < n; ++i) {
    const std::uint64_t visits = rng.negative_binomial(alpha_, r_[static_cast<std::size_t>(i)]);
    if (visits == 0) continue;
    exc.clear();
    for (std::uint64_t v = 0; v < visits; ++v) exc.push_back(excursion(i, rng));
    // Chinese restaurant process: customer m opens a new table with
    // probability alpha / (m + alpha), else sits after a uniform earlier one.
    next.assign(visits, 0);
    for (std::size_t m = 0; m < visits; ++m) {
      const double u = rng.uniform() * (static_cast<double>(m) + alpha_);
      if (u < alpha_) {
        next[m] = m;
      } else {
        const auto c = std::min(m - 1, static_cast<std::size_t>(u - alpha_));
        next[m] = next[c];
        next[c] = m;
      }
    }
    done.assign(visits, 0);
    for (std::size_t start = 0; start < visits; ++start) {
      if (done[start]) continue;
      DiscreteLoop loop;
      std::size_t c = start;
      do {
        done[c] = 1;
        loop.cycle.insert(loop.cycle.end(), exc[c].begin(), exc[c].end());
        c = next[c];
      } while (c != start);
      loop.holding.resize(loop.cycle.size());
      for (std::size_t t = 0; t < loop.cycle.size(); ++t) {
        loop.holding[t] = rng.exponential();
        out.occupation[static_cast<std::size_t>(loop.cycle[t])] += loop.holding[t];
      }
      out.loops.push_back(std::move(loop));
    }
  }
  return out;
}

SoupSample sample_soup(const Domain &domain, Rng &rng) { return LoopSoupSampler(domain).sample(rng); }

std::vector<VertexIsomorphism> isomorphism_test(const std::vector<std::vector<double>> &occupations,
                                                const DirichletGreen &green) {
  if (occupations.size() < kIsomorphismMinSamples)
    throw std::invalid_argument("isomorphism_test: at least 10^4 samples are required");
  const Index n = green.domain().size();
  std::vector<VertexIsomorphism> out;
  std::vector<double> col(occupations.size());
  for (Index x = 0; x < n; ++x) {
    RunningStats st;
    for (std::size_t s = 0; s < occupations.size(); ++s) {
      if (static_cast<Index>(occupations[s].size()) != n) throw std::invalid_argument("isomorphism_test: size mismatch");
      col[s] = occupations[s][static_cast<std::size_t>(x)];
      st.push(col[s]);
    }
    VertexIsomorphism v;
    v.vertex = x;
    v.green_diagonal = green(x, x);
    const double theta = v.green_diagonal;
    v.ks = ks_test(col, [theta](double t) { return gamma_half_cdf(t, theta); });
    v.mean = st.mean();
    v.mean_se = st.stderr_mean();
    v.variance = st.variance();
    v.variance_se = st.stderr_variance();
    out.push_back(v);
  }
  return out;
}

std::vector<LoopClass> enumerate_loops(const Domain &domain, int max_len, std::uint64_t budget) {
  if (max_len > kEnumerationMaxLength) throw std::invalid_argument("enumerate_loops: max_len must be at most 14");
  std::vector<LoopClass> out;
  const Index n = domain.size();
  const int d = domain.dim();
  if (max_len < 2 || n == 0) return out;
  std::vector<Vertex> coords(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = domain.vertex(i);
  std::vector<Index> path(static_cast<std::size_t>(max_len) + 1);
  std::uint64_t steps = 0;
  const double w = 1.0 / (2.0 * d);

  auto dist = [&](Index a, Index b) {
    std::int64_t s = 0;
    for (int t = 0; t < d; ++t) s += std::abs(coords[static_cast<std::size_t>(a)][t] - coords[static_cast<std::size_t>(b)][t]);
    return s;
  };
  // A closed path rooted at its smallest vertex is the canonical
  // representative when no rotation starting at that vertex is smaller.
  auto record = [&](int k) {
    const std::span<const Index> s(path.data(), static_cast<std::size_t>(k));
    for (int p = 1; p < k; ++p) {
      if (s[static_cast<std::size_t>(p)] != s[0]) continue;
      for (int t = 0; t < k; ++t) {
        const Index a = s[static_cast<std::size_t>((p + t) % k)], b = s[static_cast<std::size_t>(t)];
        if (a < b) return;
        if (a > b) break;
      }
    }
    LoopClass c;
    c.cycle.assign(s.begin(), s.end());
    c.multiplicity = static_cast<int>(static_cast<std::size_t>(k) / rotation_period(s));
    c.measure = std::pow(w, k) / c.multiplicity;
    out.push_back(std::move(c));
  };

  for (Index r = 0; r < n; ++r) {
    path[0] = r;
    auto dfs = [&](auto &&self, int depth, Index cur) -> void {
      for (int a = 0; a < d; ++a)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          const Index z = domain.neighbor(cur, a, sgn);
          if (z < r) continue;
          if (++steps > budget) throw std::length_error("enumerate_loops: combinatorial budget exceeded");
          if (dist(z, r) > max_len - depth - 1) continue;
          if (z == r && depth >= 1) record(depth + 1);
          if (depth + 1 < max_len) {
            path[static_cast<std::size_t>(depth) + 1] = z;
            self(self, depth + 1, z);
          }
        }
    };
    dfs(dfs, 0, r);
  }
  return out;
}

int crossing_count(std::span<const Index> cycle, const std::vector<char> &a1, const std::vector<char> &a2) {
  std::vector<int> lab;
  for (Index x : cycle) {
    const auto i = static_cast<std::size_t>(x);
    if (a1[i]) lab.push_back(1);
    else if (a2[i]) lab.push_back(2);
  }
  int kappa = 0;
  for (std::size_t t = 0; t < lab.size(); ++t)
    if (lab[t] == 1 && lab[(t + 1) % lab.size()] == 2) ++kappa;
  return kappa;
}

double loop_tail_measure(const Domain &domain, int max_len) {
  const Eigen::MatrixXd Q(killed_generator(domain));
  const Index n = Q.rows();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - Q;
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues();
  double total = 0.0, partial = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double l = ev(i);
    total -= std::log1p(-l);
    double pk = 1.0;
    for (int k = 1; k <= max_len; ++k) {
      pk *= l;
      partial += pk / k;
    }
  }
  return std::max(0.0, total - partial);
}

}  // namespace gfflab
