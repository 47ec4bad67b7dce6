#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <map>
#include <set>

#include "gfflab/loop_soup.hpp"

using namespace gfflab;

TEST_CASE("loop class measure examples") {
  const Vertex x{0, 0, 0}, y{1, 0, 0};
  const std::vector<Vertex> doubled{x, y, x, y, x};
  CHECK(loop_class_measure(doubled, 3) == doctest::Approx(1.0 / 2592).epsilon(1e-14));
  const std::vector<Vertex> back{x, y, x};
  CHECK(loop_class_measure(back, 3) == doctest::Approx(1.0 / 36).epsilon(1e-14));
  const std::vector<Vertex> open_form{x, y};
  CHECK(loop_class_measure(open_form, 3) == doctest::Approx(1.0 / 36).epsilon(1e-14));
  const std::vector<Vertex> gap{x, Vertex{2, 0, 0}, x};
  CHECK_THROWS_AS(loop_class_measure(gap, 3), std::invalid_argument);
  const std::vector<Vertex> point{x};
  CHECK_THROWS_AS(loop_class_measure(point, 3), std::invalid_argument);
}

TEST_CASE("cycle multiplicity is k over the rotation period") {
  CHECK(cycle_multiplicity(std::vector<Index>{0, 1}) == 1);
  CHECK(cycle_multiplicity(std::vector<Index>{0, 1, 0, 1}) == 2);
  CHECK(cycle_multiplicity(std::vector<Index>{0, 1, 0, 1, 0, 1}) == 3);
  CHECK(cycle_multiplicity(std::vector<Index>{0, 1, 2, 1}) == 1);
}

TEST_CASE("enumerate_loops small cases") {
  const Domain two = Domain::from_vertices(1, {{0}, {1}});
  CHECK(enumerate_loops(two, 1).empty());
  const auto loops = enumerate_loops(two, 4);
  REQUIRE(loops.size() == 2);
  std::map<std::size_t, double> by_len;
  for (const auto &c : loops) by_len[c.cycle.size()] = c.measure;
  CHECK(by_len[2] == doctest::Approx(0.25));
  CHECK(by_len[4] == doctest::Approx(0.5 / 16));
  CHECK_THROWS_AS(enumerate_loops(two, 15), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_loops(make_box(2, 2), 14, 1000), std::length_error);
}

TEST_CASE("enumerated classes are distinct, closed and canonical") {
  const Domain D = make_box(2, 1);
  const auto loops = enumerate_loops(D, 8);
  std::set<std::vector<Index>> seen;
  for (const auto &c : loops) {
    CHECK(seen.insert(c.cycle).second);
    const auto k = c.cycle.size();
    CHECK(k % 2 == 0);
    for (std::size_t t = 0; t < k; ++t) {
      const Vertex a = D.vertex(c.cycle[t]), b = D.vertex(c.cycle[(t + 1) % k]);
      CHECK(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) == 1);
    }
    CHECK(*std::min_element(c.cycle.begin(), c.cycle.end()) == c.cycle.front());
  }
}

TEST_CASE("enumerated loop measures agree with the matrix logarithm") {
  // Loops through x weigh log G(x,x) in total; weighting each by its
  // fraction of visits at x gives the diagonal of -log(I - P).
  const Domain D = make_box(2, 1);
  const int K = 10;
  const auto loops = enumerate_loops(D, K);
  const double tail = loop_tail_measure(D, K);
  const auto G = dirichlet_green(D);
  const Eigen::MatrixXd Q(killed_generator(D));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd::Identity(D.size(), D.size()) - Q);
  const Eigen::MatrixXd logm =
      es.eigenvectors() * (-(1.0 - es.eigenvalues().array()).log()).matrix().asDiagonal() * es.eigenvectors().transpose();
  for (Index x : {Index{0}, Index{4}}) {
    double through = 0.0, weighted = 0.0;
    for (const auto &c : loops) {
      const auto m = std::count(c.cycle.begin(), c.cycle.end(), x);
      if (m == 0) continue;
      through += c.measure;
      weighted += c.measure * static_cast<double>(m) / static_cast<double>(c.cycle.size());
    }
    const double exact_through = std::log(G(x, x));
    CHECK(exact_through - through >= -1e-12);
    CHECK(exact_through - through <= tail + 1e-12);
    CHECK(logm(x, x) - weighted >= -1e-12);
    CHECK(logm(x, x) - weighted <= tail + 1e-12);
  }
}

TEST_CASE("single crossings of enumerated loops match the round-trip trace") {
  const Domain D = make_box(2, 1);
  const VertexSet A1{{-1, -1}, {-1, 0}, {-1, 1}}, A2{{1, -1}, {1, 0}, {1, 1}};
  std::vector<char> a1(static_cast<std::size_t>(D.size()), 0), a2(a1);
  for (const auto &v : A1) a1[static_cast<std::size_t>(D.index_of(v))] = 1;
  for (const auto &v : A2) a2[static_cast<std::size_t>(D.index_of(v))] = 1;
  const int K = 14;
  const auto loops = enumerate_loops(D, K);
  double mu1 = 0.0;
  for (const auto &c : loops)
    if (crossing_count(c.cycle, a1, a2) == 1) mu1 += c.measure;
  const double exact = crossing_measure(round_trip(A1, A2, D), 1);
  const double tail = loop_tail_measure(D, K);
  CHECK(exact - mu1 >= -1e-12);
  CHECK(exact - mu1 <= tail);
  CHECK(std::fabs(exact - mu1) / exact < 0.05);
}

TEST_CASE("crossing count on explicit cycles") {
  std::vector<char> a1{1, 0, 0, 0}, a2{0, 0, 1, 0};
  CHECK(crossing_count(std::vector<Index>{0, 1, 2, 1}, a1, a2) == 1);
  CHECK(crossing_count(std::vector<Index>{0, 1, 2, 1, 0, 1, 2, 1}, a1, a2) == 2);
  CHECK(crossing_count(std::vector<Index>{0, 1, 0, 1}, a1, a2) == 0);
  CHECK(crossing_count(std::vector<Index>{1, 2, 3, 2}, a1, a2) == 0);
}

TEST_CASE("soup on a single vertex is the Gamma(1/2, 1) point layer") {
  const Domain D = Domain::from_vertices(2, {{0, 0}});
  LoopSoupSampler s(D);
  Rng rng(11);
  RunningStats st;
  for (int i = 0; i < 100000; ++i) {
    const auto soup = s.sample(rng);
    CHECK(soup.loops.empty());
    st.push(soup.occupation[0]);
  }
  CHECK(std::fabs(st.mean() - 0.5) < 3 * st.stderr_mean());
}

TEST_CASE("soup on the empty domain is empty") {
  const Domain D = Domain::from_vertices(2, {});
  Rng rng(1);
  const auto soup = sample_soup(D, rng);
  CHECK(soup.loops.empty());
  CHECK(soup.occupation.empty());
}

TEST_CASE("soup rejects domains above the vertex limit") {
  CHECK_THROWS_AS(LoopSoupSampler(make_box(2, 32)), std::invalid_argument);
}

TEST_CASE("two-vertex chain occupation is Gamma(1/2, G(0,0))") {
  const Domain D = Domain::from_vertices(1, {{0}, {1}});
  LoopSoupSampler s(D);
  Rng rng(12);
  std::vector<double> occ;
  for (int i = 0; i < 100000; ++i) occ.push_back(s.sample(rng).occupation[0]);
  const auto ks = ks_test(occ, [](double t) { return gamma_half_cdf(t, 4.0 / 3.0); });
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("isomorphism test on the three-vertex chain") {
  const Domain D = Domain::from_vertices(1, {{-1}, {0}, {1}});
  const auto G = dirichlet_green(D);
  LoopSoupSampler s(D);
  Rng rng(13);
  std::vector<std::vector<double>> occ;
  for (int i = 0; i < 100000; ++i) occ.push_back(s.sample(rng).occupation);
  for (const auto &v : isomorphism_test(occ, G)) {
    CHECK(v.ks.p_value > 0.01);
    CHECK(std::fabs(v.mean - v.green_diagonal / 2) < 3 * v.mean_se);
    CHECK(std::fabs(v.variance - v.green_diagonal * v.green_diagonal / 2) < 4 * v.variance_se);
  }
  occ.resize(100);
  CHECK_THROWS_AS(isomorphism_test(occ, G), std::invalid_argument);
}

TEST_CASE("soup bookkeeping: loops are closed paths and occupation is additive") {
  const Domain D = make_box(2, 2);
  LoopSoupSampler s(D);
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const auto soup = s.sample(rng);
    std::vector<double> sum = soup.point_layer;
    for (const auto &l : soup.loops) {
      const auto k = l.cycle.size();
      REQUIRE(k >= 2);
      REQUIRE(l.holding.size() == k);
      for (std::size_t t = 0; t < k; ++t) {
        const Vertex a = D.vertex(l.cycle[t]), b = D.vertex(l.cycle[(t + 1) % k]);
        CHECK(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) == 1);
        CHECK(l.holding[t] > 0.0);
        sum[static_cast<std::size_t>(l.cycle[t])] += l.holding[t];
      }
    }
    for (std::size_t x = 0; x < sum.size(); ++x) CHECK(sum[x] == doctest::Approx(soup.occupation[x]).epsilon(1e-12));
  }
}

TEST_CASE("expected number of loops is alpha times the loop measure") {
  // Loops with smallest vertex i have total measure log G_{D_i}(i,i).
  const Domain D = make_box(2, 1);
  LoopSoupSampler s(D);
  double expected = 0.0;
  for (Index i = 0; i < D.size(); ++i) expected -= 0.5 * std::log1p(-s.return_probability(i));
  Rng rng(15);
  RunningStats st;
  for (int i = 0; i < 50000; ++i) st.push(static_cast<double>(s.sample(rng).loops.size()));
  CHECK(std::fabs(st.mean() - expected) < 4 * st.stderr_mean());
}

TEST_CASE("thinning: loops avoiding a vertex form the soup of the reduced domain") {
  const Domain D = make_box(2, 1);
  const Index w = D.index_of(Vertex{0, 0});
  VertexSet rest;
  for (Index i = 0; i < D.size(); ++i)
    if (i != w) rest.push_back(D.vertex(i));
  const Domain R = Domain::from_vertices(2, rest);
  const auto GR = dirichlet_green(R);
  LoopSoupSampler s(D);
  Rng rng(16);
  std::vector<RunningStats> st(static_cast<std::size_t>(D.size()));
  for (int n = 0; n < 40000; ++n) {
    const auto soup = s.sample(rng);
    std::vector<double> occ = soup.point_layer;
    for (const auto &l : soup.loops) {
      if (std::find(l.cycle.begin(), l.cycle.end(), w) != l.cycle.end()) continue;
      for (std::size_t t = 0; t < l.cycle.size(); ++t) occ[static_cast<std::size_t>(l.cycle[t])] += l.holding[t];
    }
    for (Index x = 0; x < D.size(); ++x) st[static_cast<std::size_t>(x)].push(occ[static_cast<std::size_t>(x)]);
  }
  for (Index x = 0; x < D.size(); ++x) {
    if (x == w) continue;
    const double g = GR(D.vertex(x), D.vertex(x));
    const auto &sx = st[static_cast<std::size_t>(x)];
    CHECK(std::fabs(sx.mean() - g / 2) < 4 * sx.stderr_mean());
  }
}
