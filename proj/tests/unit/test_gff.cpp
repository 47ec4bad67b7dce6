#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "gfflab/gff.hpp"
#include "gfflab/stats.hpp"

using namespace gfflab;

namespace {

// n * sum_{i<=j} (C_ij - I_ij)^2 / (1 + I_ij) for whitened samples is
// asymptotically chi-square with k(k+1)/2 degrees of freedom.
double whitened_covariance_pvalue(const std::vector<Eigen::VectorXd> &z) {
  const Index k = z.front().size();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(k, k);
  for (const auto &v : z) C += v * v.transpose();
  C /= static_cast<double>(z.size());
  double stat = 0.0;
  for (Index i = 0; i < k; ++i)
    for (Index j = i; j < k; ++j) {
      const double diff = C(i, j) - (i == j ? 1.0 : 0.0);
      stat += diff * diff / (i == j ? 2.0 : 1.0);
    }
  stat *= static_cast<double>(z.size());
  boost::math::chi_squared dist(static_cast<double>(k * (k + 1) / 2));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST_CASE("factorized sampler on a single vertex has unit variance") {
  const auto G = dirichlet_green(Domain::from_vertices(1, {{0}}));
  FactorizedSampler<double> s(G);
  Rng rng(1);
  RunningStats st;
  for (int i = 0; i < 100000; ++i) st.push(s.sample(rng).values(0));
  CHECK(st.variance() == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::fabs(st.mean()) < 4 * st.stderr_mean());
}

TEST_CASE("factorized sampler covariance on two vertices") {
  const auto G = dirichlet_green(Domain::from_vertices(1, {{0}, {1}}));
  FactorizedSampler<double> s(G);
  Rng rng(2);
  RunningStats prod;
  for (int i = 0; i < 100000; ++i) {
    const auto f = s.sample(rng);
    prod.push(f.values(0) * f.values(1));
  }
  CHECK(std::fabs(prod.mean() - 2.0 / 3) < 3 * prod.stderr_mean());
}

TEST_CASE("samplers are deterministic in the seed") {
  const Domain B = make_box(3, 3);
  const auto G = dirichlet_green(B);
  FactorizedSampler<double> fs(G);
  SpectralSampler<double> ss(B);
  Rng a(99), b(99);
  const auto f1 = fs.sample(a), f2 = fs.sample(b);
  CHECK((f1.values.array() == f2.values.array()).all());
  const auto s1 = ss.sample(a), s2 = ss.sample(b);
  CHECK((s1.values.array() == s2.values.array()).all());
  CHECK(s1.sampler == SamplerId::spectral);
  CHECK(to_string(SamplerId::factorized) == "factorized");
}

TEST_CASE("spectral covariance equals G_D exactly") {
  for (auto [d, M] : {std::pair{1, 4}, std::pair{2, 3}, std::pair{3, 2}}) {
    const Domain B = make_box(d, M);
    const auto G = dirichlet_green(B);
    SpectralSampler<double> ss(B);
    // Columns of the square-root operator T with T T^T = G.
    Eigen::MatrixXd T(B.size(), B.size());
    for (Index k = 0; k < B.size(); ++k) T.col(k) = ss.from_noise(Eigen::VectorXd::Unit(B.size(), k)).values;
    CHECK((T * T.transpose() - G.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd w = Eigen::VectorXd::Unit(B.size(), 3);
    ss.apply_green(w);
    CHECK((w - G.matrix().col(3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero noise gives the zero field") {
  SpectralSampler<float> ss(make_box(4, 2));
  const auto f = ss.from_noise(Eigen::VectorXd::Zero(625));
  CHECK(f.values.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("single precision spectral sampler agrees with double") {
  const Domain B = make_box(3, 4);
  SpectralSampler<double> sd(B);
  SpectralSampler<float> sf(B);
  Rng r(5);
  Eigen::VectorXd xi(B.size());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = r.normal();
  const auto a = sd.from_noise(xi);
  const auto b = sf.from_noise(xi);
  CHECK((a.values - b.values.cast<double>()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("spectral sampler covariance on B(8) in d=3") {
  const Domain B = make_box(3, 8);
  const auto G = dirichlet_green(B);
  SpectralSampler<double> ss(B);
  Rng pick(11);
  std::vector<std::pair<Index, Index>> pairs;
  for (int p = 0; p < 20; ++p) {
    const Index i = static_cast<Index>(pick() % static_cast<std::uint64_t>(B.size()));
    const Index j = p < 10 ? i : static_cast<Index>(pick() % static_cast<std::uint64_t>(B.size()));
    pairs.emplace_back(i, j);
  }
  std::vector<RunningStats> st(pairs.size());
  Rng rng(12);
  for (int n = 0; n < 100000; ++n) {
    const auto f = ss.sample(rng);
    for (std::size_t p = 0; p < pairs.size(); ++p) st[p].push(f.values(pairs[p].first) * f.values(pairs[p].second));
  }
  for (std::size_t p = 0; p < pairs.size(); ++p)
    CHECK(std::fabs(st[p].mean() - G(pairs[p].first, pairs[p].second)) <= 4 * st[p].stderr_mean());
}

TEST_CASE("spectral and factorized samplers share the covariance structure in d=1") {
  const Domain B = make_box(1, 3);
  const auto G = dirichlet_green(B);
  const Eigen::MatrixXd L = G.matrix().llt().matrixL();
  FactorizedSampler<double> fs(G);
  SpectralSampler<double> ss(B);
  Rng rng(13);
  std::vector<Eigen::VectorXd> zs, zf;
  for (int n = 0; n < 100000; ++n) {
    zs.push_back(L.triangularView<Eigen::Lower>().solve(ss.sample(rng).values));
    zf.push_back(L.triangularView<Eigen::Lower>().solve(fs.sample(rng).values));
  }
  CHECK(whitened_covariance_pvalue(zs) > 0.001);
  CHECK(whitened_covariance_pvalue(zf) > 0.001);
}

TEST_CASE("field marginals are sign symmetric") {
  SpectralSampler<double> ss(make_box(3, 4));
  Rng rng(14);
  std::vector<double> a, b;
  for (int n = 0; n < 40000; ++n) {
    const auto f = ss.sample(rng);
    (n % 2 ? a : b).push_back(n % 2 ? f.values(62) : -f.values(62));
  }
  CHECK(ks_test_two_sample(a, b).p_value > 0.001);
}

TEST_CASE("memory cap fails fast") {
  CHECK_THROWS_AS(SpectralSampler<float>(make_box(7, 7), 1ull << 20), MemoryBudgetExceeded);
  try {
    SpectralSampler<double> s(make_box(3, 10), 1000);
  } catch (const MemoryBudgetExceeded &e) {
    CHECK(e.required_bytes() == 2 * 21 * 21 * 21 * 8);
  }
}

TEST_CASE("dense and FFTW sine transforms agree and are involutions") {
  for (auto [d, n] : {std::pair{1, 9}, std::pair{2, 7}, std::pair{3, 5}, std::pair{4, 6}}) {
    SineTransform<double> dense(d, n, SineTransform<double>::Method::dense);
    SineTransform<double> fft(d, n, SineTransform<double>::Method::fftw);
    CHECK(dense.dense());
    CHECK_FALSE(fft.dense());
    Rng r(3);
    Eigen::VectorXd x(dense.size());
    for (Index i = 0; i < x.size(); ++i) x(i) = r.normal();
    Eigen::VectorXd a = x, b = x;
    dense.apply(a.data());
    fft.apply(b.data());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.norm() == doctest::Approx(x.norm()).epsilon(1e-12));
    dense.apply(a.data());
    CHECK((a - x).cwiseAbs().maxCoeff() < 1e-12);
  }
  SineTransform<float> big(1, 200);
  CHECK_FALSE(big.dense());
}
