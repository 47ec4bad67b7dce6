#include "gfflab/experiments.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "gfflab/clusters.hpp"
#include "gfflab/exploration.hpp"
#include "gfflab/gff.hpp"
#include "gfflab/green.hpp"
#include "gfflab/loop_soup.hpp"
#include "gfflab/metric_graph.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

/// Dimension from which origin clusters are sampled by conditional
/// exploration instead of a full field.
constexpr int kExplorerDim = 5;

std::uint64_t tag(ExperimentId id) { return 0x6766666c61620000ull + static_cast<std::uint64_t>(id); }

/// Stream index of replica r at grid point p, for per-point independent runs.
std::uint64_t point_index(std::size_t p, std::uint64_t r) { return (static_cast<std::uint64_t>(p) << 40) | r; }

int as_int(double x, const char *what) {
  const double r = std::round(x);
  if (std::fabs(x - r) > 1e-9 || r < 0 || r > 1e6) throw std::invalid_argument(std::string("grid value for ") + what + " must be a nonnegative integer");
  return static_cast<int>(r);
}

EstimateRecord make_record(const ExperimentConfig &c, double param, const RunningStats &st, double wall_ms) {
  EstimateRecord r;
  r.experiment = c.experiment;
  r.d = c.d;
  r.param = param;
  r.estimate = st.mean();
  r.stderr_ = st.stderr_mean();
  r.n = st.count();
  r.seed = c.seed;
  r.wall_ms = wall_ms;
  return r;
}

std::uint64_t full_field_bytes(const Domain &box, Precision p) {
  const std::uint64_t n = static_cast<std::uint64_t>(box.size());
  const std::uint64_t field = p == Precision::single ? SpectralSampler<float>::required_bytes(box)
                                                     : SpectralSampler<double>::required_bytes(box);
  return field + 4 * n;  // explorer stamps
}

std::uint64_t union_find_bytes(const Domain &box, Precision p) {
  const std::uint64_t n = static_cast<std::uint64_t>(box.size());
  return full_field_bytes(box, p) + n * (2 * sizeof(Index) + 1) + n * static_cast<std::uint64_t>(box.dim()) / 8;
}

std::uint64_t explorer_bytes(int d, int ambient) {
  return 3 * static_cast<std::uint64_t>(Domain::box(d, ambient).size()) * sizeof(float);
}

/// Largest cluster norm reached by the origin's level-set cluster, capped
/// at `stop` (exploration halts there); -1 when the origin is closed.
template <class Scalar>
int origin_reach(const FieldSample<Scalar> &f, ClusterExplorer &ex, std::uint64_t edge_seed, const BridgeLaw &law,
                 int stop) {
  const Domain &D = *f.domain;
  int reach = -1;
  ex.explore(f, D.index_of(origin(D.dim())), 0.0, ClusterExplorer::Mode::level, edge_seed, law, [&](Index i) {
    reach = std::max(reach, D.vertex(i).norm_inf());
    return reach < stop;
  });
  return reach;
}

// ---------------------------------------------------------------- onearm

template <class Scalar>
std::vector<RunningStats> onearm_full(int d, const std::vector<int> &Ns, int ambient, std::uint64_t samples,
                                      std::uint64_t seed, std::uint64_t cap) {
  const Domain box = Domain::box(d, ambient);
  SpectralSampler<Scalar> sampler(box, cap);
  ClusterExplorer ex(std::make_shared<const Domain>(box));
  const auto law = BridgeLaw::make(d);
  const int maxN = *std::max_element(Ns.begin(), Ns.end());
  std::vector<RunningStats> st(Ns.size());
  for (std::uint64_t r = 0; r < samples; ++r) {
    Rng rng = Rng::stream(seed, tag(ExperimentId::onearm), r);
    const auto f = sampler.sample(rng, r);
    const int reach = origin_reach(f, ex, rng(), law, maxN);
    for (std::size_t k = 0; k < Ns.size(); ++k) st[k].push(reach >= Ns[k] ? 1.0 : 0.0);
  }
  return st;
}

std::vector<RunningStats> onearm_explored(int d, const std::vector<int> &Ns, int ambient, std::uint64_t samples,
                                          std::uint64_t seed, std::uint64_t cap) {
  ExplorerOptions opt;
  opt.memory_cap = cap;
  OriginClusterSampler ex(d, ambient, opt);
  const int maxN = *std::max_element(Ns.begin(), Ns.end());
  std::vector<RunningStats> st(Ns.size());
  for (std::uint64_t r = 0; r < samples; ++r) {
    Rng rng = Rng::stream(seed, tag(ExperimentId::onearm), r);
    const auto res = ex.explore(rng, {maxN, maxN});
    for (std::size_t k = 0; k < Ns.size(); ++k) st[k].push(res.max_norm >= Ns[k] ? 1.0 : 0.0);
  }
  return st;
}

void run_onearm(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  std::vector<int> Ns;
  for (double g : c.grid) Ns.push_back(as_int(g, "onearm"));
  std::sort(Ns.begin(), Ns.end());
  Ns.erase(std::unique(Ns.begin(), Ns.end()), Ns.end());
  // One coupled ambient box for the whole grid, so the estimates are
  // monotone in N sample by sample. Grid points that do not fit under the
  // memory ceiling are dropped from the top.
  auto bytes = [&](int maxN) {
    const int M = maxN + c.padding;
    return c.d >= kExplorerDim ? explorer_bytes(c.d, M) : full_field_bytes(Domain::box(c.d, M), c.precision);
  };
  while (!Ns.empty() && bytes(Ns.back()) > cap) {
    out.truncated.push_back(Ns.back());
    Ns.pop_back();
  }
  if (Ns.empty()) throw MemoryBudgetExceeded(bytes(as_int(c.grid.front(), "onearm")), cap);
  const int ambient = Ns.back() + c.padding;
  const auto t0 = Clock::now();
  std::vector<RunningStats> st;
  if (c.d >= kExplorerDim) st = onearm_explored(c.d, Ns, ambient, c.samples, c.seed, cap);
  else if (c.precision == Precision::single) st = onearm_full<float>(c.d, Ns, ambient, c.samples, c.seed, cap);
  else st = onearm_full<double>(c.d, Ns, ambient, c.samples, c.seed, cap);
  const double wall = ms_since(t0) / static_cast<double>(Ns.size());
  for (std::size_t k = 0; k < Ns.size(); ++k) out.records.push_back(make_record(c, Ns[k], st[k], wall));
  out.details["ambient_radius"] = ambient;
  out.details["sampler"] = c.d >= kExplorerDim ? "explored" : "spectral";
}

// -------------------------------------------------------------- twopoint

constexpr int kPairRegion = 4;

Vertex pair_start(int d, int r) {
  Vertex x(d);
  x[0] = -(r / 2);
  if (d >= 2) x[1] = 1;
  return x;
}

template <class Scalar>
void twopoint_impl(const ExperimentConfig &c, const std::vector<int> &rs, std::uint64_t cap, RunResult &out) {
  const Domain box = Domain::box(c.d, kPairRegion + c.padding);
  SpectralSampler<Scalar> sampler(box, cap);
  ClusterExplorer ex(std::make_shared<const Domain>(box));
  const auto law = BridgeLaw::make(c.d);
  std::vector<std::pair<Index, Index>> pairs;
  for (int r : rs) {
    Vertex x = pair_start(c.d, r), y = x;
    y[0] += r;
    pairs.emplace_back(box.index_of(x), box.index_of(y));
  }
  std::vector<RunningStats> st(rs.size());
  const auto t0 = Clock::now();
  for (std::uint64_t s = 0; s < c.samples; ++s) {
    Rng rng = Rng::stream(c.seed, tag(ExperimentId::twopoint), s);
    const auto f = sampler.sample(rng, s);
    const std::uint64_t edge_seed = rng();
    for (std::size_t k = 0; k < rs.size(); ++k) {
      const auto [x, y] = pairs[k];
      bool hit = x == y;
      if (!hit)
        ex.explore(f, x, 0.0, ClusterExplorer::Mode::sign, edge_seed, law, [&](Index i) {
          hit = i == y;
          return !hit;
        });
      st[k].push(hit ? 1.0 : 0.0);
    }
  }
  const double wall = ms_since(t0) / static_cast<double>(rs.size());
  const DirichletGreen G(box);
  json pj = json::array();
  for (std::size_t k = 0; k < rs.size(); ++k) {
    out.records.push_back(make_record(c, rs[k], st[k], wall));
    const auto [x, y] = pairs[k];
    const double rho = G(x, y) / std::sqrt(G(x, x) * G(y, y));
    const double target = 2.0 / std::numbers::pi * std::asin(std::min(1.0, rho));
    const double se = st[k].stderr_mean();
    const Vertex vx = box.vertex(x), vy = box.vertex(y);
    pj.push_back({{"distance", rs[k]},
                  {"x", std::vector<int>(vx.c.begin(), vx.c.begin() + c.d)},
                  {"y", std::vector<int>(vy.c.begin(), vy.c.begin() + c.d)},
                  {"estimate", st[k].mean()},
                  {"stderr", se},
                  {"arcsin_target", target},
                  {"z", se > 0 ? (st[k].mean() - target) / se : (st[k].mean() == target ? 0.0 : INFINITY)}});
  }
  out.details["pairs"] = pj;
  out.details["ambient_radius"] = box.radius();
  out.details["clusters"] = "sign";
}

void run_twopoint(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  std::vector<int> rs;
  for (double g : c.grid) {
    const int r = as_int(g, "twopoint");
    if (r > 2 * kPairRegion) throw std::invalid_argument("twopoint: distances must be at most 8 (pairs inside B(4))");
    rs.push_back(r);
  }
  const Domain box = Domain::box(c.d, kPairRegion + c.padding);
  const std::uint64_t need = full_field_bytes(box, c.precision);
  if (need > cap) throw MemoryBudgetExceeded(need, cap);
  if (c.precision == Precision::single) twopoint_impl<float>(c, rs, cap, out);
  else twopoint_impl<double>(c, rs, cap, out);
}

// ------------------------------------------------------- volume and ghost

template <class Scalar>
void volumes_full(int d, int ambient, std::uint64_t samples, std::uint64_t seed, std::uint64_t cap, VolumeDraws &out) {
  const Domain box = Domain::box(d, ambient);
  SpectralSampler<Scalar> sampler(box, cap);
  ClusterExplorer ex(std::make_shared<const Domain>(box));
  const auto law = BridgeLaw::make(d);
  const Index o = box.index_of(origin(d));
  while (out.volumes.size() < samples && out.attempts < 20 * samples) {
    Rng rng = Rng::stream(seed, tag(ExperimentId::volume_tail), out.attempts++);
    const auto f = sampler.sample(rng);
    bool censored = false;
    const Index v = ex.explore(f, o, 0.0, ClusterExplorer::Mode::level, rng(), law, [&](Index i) {
      censored = box.vertex(i).norm_inf() >= ambient;
      return !censored;
    });
    if (censored) ++out.censored;
    else out.volumes.push_back(v);
  }
}

void volumes_explored(int d, int ambient, std::uint64_t samples, std::uint64_t seed, std::uint64_t cap,
                      VolumeDraws &out) {
  ExplorerOptions opt;
  opt.memory_cap = cap;
  OriginClusterSampler ex(d, ambient, opt);
  while (out.volumes.size() < samples && out.attempts < 20 * samples) {
    Rng rng = Rng::stream(seed, tag(ExperimentId::volume_tail), out.attempts++);
    const auto r = ex.explore(rng, {ambient, ambient});
    if (r.stopped) ++out.censored;
    else out.volumes.push_back(r.volume);
  }
}

std::vector<double> sorted_grid(const std::vector<double> &g) {
  std::vector<double> s = g;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void run_volume_like(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  const int ambient = c.padding;
  const auto draws = sample_volumes(c.d, ambient, c.samples, c.seed, c.precision, cap);
  const auto grid = sorted_grid(c.grid);
  out.records = c.experiment == ExperimentId::ghost ? ghost_records(draws, c.d, grid, c.seed)
                                                    : volume_tail_records(draws, c.d, grid, c.seed);
  out.details["ambient_radius"] = ambient;
  out.details["uncensored"] = draws.volumes.size();
  out.details["censored"] = draws.censored;
  out.details["attempts"] = draws.attempts;
  out.details["sampler"] = c.d >= kExplorerDim ? "explored" : "spectral";
  if (c.experiment == ExperimentId::ghost) {
    json ratios = json::array();
    for (const auto &r : out.records) ratios.push_back({{"h", r.param}, {"R_over_sqrt_h", r.estimate / std::sqrt(r.param)}});
    out.details["ratios"] = ratios;
  }
}

// ------------------------------------------------------- boundary moment

template <class Scalar> void boundary_impl(const ExperimentConfig &c, const std::vector<int> &Ns, std::uint64_t cap, RunResult &out) {
  const auto law = BridgeLaw::make(c.d);
  json moments = json::array();
  for (std::size_t p = 0; p < Ns.size(); ++p) {
    const int N = Ns[p];
    const Domain box = Domain::box(c.d, N + c.padding);
    SpectralSampler<Scalar> sampler(box, cap);
    ClusterExplorer ex(std::make_shared<const Domain>(box));
    const Index o = box.index_of(origin(c.d));
    RunningStats x1, x2;
    const auto t0 = Clock::now();
    for (std::uint64_t s = 0; s < c.samples; ++s) {
      Rng rng = Rng::stream(c.seed, tag(ExperimentId::boundary_moment), point_index(p, s));
      const auto f = sampler.sample(rng, s);
      double X = 0.0;
      ex.explore(f, o, 0.0, ClusterExplorer::Mode::level, rng(), law, [&](Index i) {
        if (box.vertex(i).norm_inf() == N) X += 1.0;
        return true;
      });
      x1.push(X);
      x2.push(X * X);
    }
    out.records.push_back(make_record(c, N, x1, ms_since(t0)));
    const double n4 = std::pow(static_cast<double>(N), 4);
    moments.push_back({{"N", N},
                       {"EX", x1.mean()},
                       {"EX_se", x1.stderr_mean()},
                       {"EX_over_N", x1.mean() / N},
                       {"EX_over_N_se", x1.stderr_mean() / N},
                       {"EX2", x2.mean()},
                       {"EX2_se", x2.stderr_mean()},
                       {"EX2_over_N4", x2.mean() / n4},
                       {"EX2_over_N4_se", x2.stderr_mean() / n4}});
  }
  out.details["moments"] = moments;
}

void run_boundary(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  std::vector<int> Ns;
  for (double g : c.grid) {
    const int N = as_int(g, "boundary_moment");
    if (N < 1) throw std::invalid_argument("boundary_moment: N must be positive");
    Ns.push_back(N);
  }
  for (int N : Ns) {
    const std::uint64_t need = full_field_bytes(Domain::box(c.d, N + c.padding), c.precision);
    if (need > cap) throw MemoryBudgetExceeded(need, cap);
  }
  out.details["label"] = c.d <= 6 ? "machinery check (the moment bound is proved for d > 6)" : "in regime";
  if (c.precision == Precision::single) boundary_impl<float>(c, Ns, cap, out);
  else boundary_impl<double>(c, Ns, cap, out);
}

// ------------------------------------------------------ capacity scaling

void run_capacity(const ExperimentConfig &c, RunResult &out) {
  if (c.d < 3) throw std::invalid_argument("capacity_scaling: d must be at least 3");
  json cj = json::array();
  for (double g : c.grid) {
    const int N = as_int(g, "capacity_scaling");
    if (N < 1) throw std::invalid_argument("capacity_scaling: N must be positive");
    const auto t0 = Clock::now();
    std::vector<int> radii;
    for (int R : {2 * N + 8, 3 * N + 10, 4 * N + 12, 6 * N + 16})
      radii.push_back(std::max(N + 2, static_cast<int>(std::lround(R * c.padding / 4.0))));
    const auto verts = Domain::box(c.d, N).vertices();
    const auto cap = capacity(verts, c.d, radii);
    const double scale = std::pow(static_cast<double>(N), c.d - 2);
    EstimateRecord r;
    r.experiment = c.experiment;
    r.d = c.d;
    r.param = N;
    r.estimate = cap.value / scale;
    r.stderr_ = cap.error / scale;
    r.n = 1;
    r.seed = c.seed;
    r.wall_ms = ms_since(t0);
    out.records.push_back(r);
    cj.push_back({{"N", N}, {"capacity", cap.value}, {"error", cap.error}, {"relative_error", cap.error / cap.value}, {"radii", radii}});
  }
  out.details["capacity"] = cj;
}

// ------------------------------------------------------ crossing measure

void run_crossing(const ExperimentConfig &c, RunResult &out) {
  if (c.d < 3) throw std::invalid_argument("crossing_measure: d must be at least 3");
  const VertexSet A{origin(c.d)};
  const double capA = capacity(A, c.d).value;
  json cj = json::array();
  for (double g : c.grid) {
    const int N = as_int(g, "crossing_measure");
    if (N < 1) throw std::invalid_argument("crossing_measure: N must be positive");
    const auto t0 = Clock::now();
    VertexSet sphere;
    for_each_sphere_vertex(c.d, N, [&](const Vertex &v) { sphere.push_back(v); });
    const Domain ambient = Domain::box(c.d, N + c.padding);
    const auto rt = round_trip(A, sphere, ambient);
    const auto tc = total_crossing_measure(rt);
    EstimateRecord r;
    r.experiment = c.experiment;
    r.d = c.d;
    r.param = N;
    r.estimate = tc.value;
    r.stderr_ = 0.0;
    r.n = 1;
    r.seed = c.seed;
    r.wall_ms = ms_since(t0);
    out.records.push_back(r);
    const double scale = capA * std::pow(static_cast<double>(N), 2.0 - c.d);
    json ratios = json::array();
    for (int j = 1; j <= 3; ++j) ratios.push_back(std::pow(crossing_measure(rt, j), 1.0 / j) / scale);
    cj.push_back({{"N", N},
                  {"mu", {crossing_measure(rt, 1), crossing_measure(rt, 2), crossing_measure(rt, 3)}},
                  {"ratio_j", ratios},
                  {"logdet", tc.value},
                  {"partial_64", tc.partial},
                  {"tail_bound", tc.tail_bound},
                  {"spectral_radius", rt.spectral_radius}});
  }
  out.details["capacity_A"] = capA;
  out.details["crossing"] = cj;
}

// ----------------------------------------------------------- isomorphism

Domain isomorphism_domain(int d, int L) {
  VertexSet vs;
  if (d == 1) {
    for (int i = 0; i < L; ++i) vs.push_back(Vertex{i});
  } else if (d == 2) {
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) vs.push_back(Vertex{i, j});
  } else {
    throw std::invalid_argument("isomorphism: d must be 1 (chains) or 2 (square patches)");
  }
  return Domain::from_vertices(d, vs);
}

void run_isomorphism(const ExperimentConfig &c, RunResult &out) {
  if (c.samples < kIsomorphismMinSamples) throw std::invalid_argument("isomorphism: at least 10^4 samples are required");
  json all = json::array();
  for (std::size_t p = 0; p < c.grid.size(); ++p) {
    const int L = as_int(c.grid[p], "isomorphism");
    if (L < 1) throw std::invalid_argument("isomorphism: sizes must be positive");
    const Domain D = isomorphism_domain(c.d, L);
    const auto t0 = Clock::now();
    LoopSoupSampler sampler(D);
    std::vector<std::vector<double>> occ;
    occ.reserve(c.samples);
    for (std::uint64_t s = 0; s < c.samples; ++s) {
      Rng rng = Rng::stream(c.seed, tag(ExperimentId::isomorphism), point_index(p, s));
      occ.push_back(sampler.sample(rng).occupation);
    }
    const auto res = isomorphism_test(occ, dirichlet_green(D));
    double min_p = 1.0, max_zm = 0.0, max_zv = 0.0;
    json vj = json::array();
    for (const auto &v : res) {
      const double g = v.green_diagonal;
      const double zm = (v.mean - g / 2) / v.mean_se, zv = (v.variance - g * g / 2) / v.variance_se;
      min_p = std::min(min_p, v.ks.p_value);
      max_zm = std::max(max_zm, std::fabs(zm));
      max_zv = std::max(max_zv, std::fabs(zv));
      vj.push_back({{"vertex", v.vertex}, {"G", g}, {"ks", v.ks.statistic}, {"p", v.ks.p_value}, {"mean", v.mean}, {"z_mean", zm}, {"variance", v.variance}, {"z_variance", zv}});
    }
    EstimateRecord r;
    r.experiment = c.experiment;
    r.d = c.d;
    r.param = L;
    r.estimate = min_p;
    r.n = c.samples;
    r.seed = c.seed;
    r.wall_ms = ms_since(t0);
    out.records.push_back(r);
    all.push_back({{"size", L}, {"min_p", min_p}, {"max_abs_z_mean", max_zm}, {"max_abs_z_variance", max_zv}, {"vertices", vj}});
  }
  out.details["estimate"] = "minimum KS p-value over the vertices";
  out.details["domains"] = all;
}

// ----------------------------------------------------------- max cluster

template <class Scalar> void max_cluster_impl(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  const int M = c.padding;
  const Domain box = Domain::box(c.d, M);
  SpectralSampler<Scalar> sampler(box, cap);
  const auto law = BridgeLaw::make(c.d);
  const auto grid = sorted_grid(c.grid);
  const double unit = std::pow(static_cast<double>(M), 4);
  std::vector<RunningStats> st(grid.size());
  RunningStats sizes;
  const auto t0 = Clock::now();
  for (std::uint64_t s = 0; s < c.samples; ++s) {
    Rng rng = Rng::stream(c.seed, tag(ExperimentId::max_cluster), s);
    const auto f = sampler.sample(rng, s);
    const auto labels = build_clusters(f, percolate(f, 0.0, rng, law), 0.0);
    const double m = static_cast<double>(max_cluster_in_box(labels, M));
    sizes.push(m);
    for (std::size_t k = 0; k < grid.size(); ++k) st[k].push(m > grid[k] * unit ? 1.0 : 0.0);
  }
  const double wall = ms_since(t0) / static_cast<double>(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) out.records.push_back(make_record(c, grid[k], st[k], wall));
  // log-survival second differences; concavity means each is <= 0
  json sd = json::array();
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    const double a = st[k - 1].mean(), b = st[k].mean(), e = st[k + 1].mean();
    if (a <= 0 || b <= 0 || e <= 0) {
      sd.push_back({{"s", grid[k]}, {"second_difference", nullptr}});
      continue;
    }
    auto rel = [](const RunningStats &x) { return x.stderr_mean() / x.mean(); };
    const double v = std::log(a) - 2 * std::log(b) + std::log(e);
    const double se = std::sqrt(std::pow(rel(st[k - 1]), 2) + 4 * std::pow(rel(st[k]), 2) + std::pow(rel(st[k + 1]), 2));
    sd.push_back({{"s", grid[k]}, {"second_difference", v}, {"stderr", se}});
  }
  out.details["box_radius"] = M;
  out.details["threshold_unit"] = unit;
  out.details["mean_max_cluster"] = sizes.mean();
  out.details["log_survival_second_differences"] = sd;
}

void run_max_cluster(const ExperimentConfig &c, std::uint64_t cap, RunResult &out) {
  const Domain box = Domain::box(c.d, c.padding);
  const std::uint64_t need = union_find_bytes(box, c.precision);
  if (need > cap) throw MemoryBudgetExceeded(need, cap);
  if (c.precision == Precision::single) max_cluster_impl<float>(c, cap, out);
  else max_cluster_impl<double>(c, cap, out);
}

bool is_scaling(ExperimentId id) {
  return id != ExperimentId::isomorphism && id != ExperimentId::validate;
}

std::optional<FitResult> try_fit(const RunResult &r) {
  std::vector<FitPoint> pts;
  for (const auto &e : r.records)
    if (e.param > 0 && e.estimate > 0) pts.push_back({e.param, e.estimate, e.stderr_});
  if (pts.size() < 3 || r.config.experiment == ExperimentId::max_cluster) return std::nullopt;
  return fit_exponent(pts);
}

}  // namespace

// ---------------------------------------------------------------- public

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::onearm: return "onearm";
    case ExperimentId::twopoint: return "twopoint";
    case ExperimentId::volume_tail: return "volume_tail";
    case ExperimentId::boundary_moment: return "boundary_moment";
    case ExperimentId::ghost: return "ghost";
    case ExperimentId::capacity_scaling: return "capacity_scaling";
    case ExperimentId::crossing_measure: return "crossing_measure";
    case ExperimentId::isomorphism: return "isomorphism";
    case ExperimentId::max_cluster: return "max_cluster";
    case ExperimentId::validate: return "validate";
  }
  return "unknown";
}

ExperimentId parse_experiment(const std::string &name) {
  for (int i = 0; i <= static_cast<int>(ExperimentId::validate); ++i) {
    const auto id = static_cast<ExperimentId>(i);
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown experiment: " + name);
}

ExperimentConfig ExperimentConfig::from_json(const json &j) {
  static const std::set<std::string> keys{"experiment", "d", "grid", "padding", "samples", "seed", "precision", "out"};
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto &[k, v] : j.items())
    if (!keys.count(k)) throw std::invalid_argument("unknown config key: " + k);
  for (const auto &k : keys)
    if (!j.contains(k)) throw std::invalid_argument("missing config key: " + k);
  ExperimentConfig c;
  try {
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    c.d = j.at("d").get<int>();
    c.grid = j.at("grid").get<std::vector<double>>();
    c.padding = j.at("padding").get<int>();
    c.samples = j.at("samples").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto p = j.at("precision").get<std::string>();
    if (p == "single") c.precision = Precision::single;
    else if (p == "double") c.precision = Precision::dual;
    else throw std::invalid_argument("precision must be \"single\" or \"double\"");
    c.out = j.at("out").get<std::string>();
  } catch (const json::exception &e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  c.check();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  return {{"experiment", to_string(experiment)},
          {"d", d},
          {"grid", grid},
          {"padding", padding},
          {"samples", samples},
          {"seed", seed},
          {"precision", precision == Precision::single ? "single" : "double"},
          {"out", out}};
}

void ExperimentConfig::check() const {
  if (d < 1) throw std::invalid_argument("config: d must be at least 1");
  if (experiment != ExperimentId::validate && grid.empty()) throw std::invalid_argument("config: grid must be nonempty");
  if (samples < 1) throw std::invalid_argument("config: samples must be at least 1");
  if (padding < 1) throw std::invalid_argument("config: padding must be at least 1");
}

std::uint64_t default_memory_cap() {
  const long pages = sysconf(_SC_PHYS_PAGES), page = sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page <= 0) return kDefaultMemoryCap;
  const std::uint64_t phys = static_cast<std::uint64_t>(pages) * static_cast<std::uint64_t>(page);
  return std::min(kDefaultMemoryCap, phys / 4 * 3);
}

FitResult fit_exponent(std::span<const FitPoint> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_exponent: at least three points are required");
  double wmax = 0.0;
  bool any_se = false;
  for (const auto &p : points) {
    if (!(p.x > 0) || !(p.y > 0)) throw std::invalid_argument("fit_exponent: parameters and estimates must be positive");
    if (p.se < 0) throw std::invalid_argument("fit_exponent: negative standard error");
    if (p.se > 0) {
      any_se = true;
      wmax = std::max(wmax, std::pow(p.y / p.se, 2));
    }
  }
  // A zero standard error next to positive ones gets the largest weight.
  std::vector<double> x, y, w;
  for (const auto &p : points) {
    x.push_back(std::log(p.x));
    y.push_back(std::log(p.y));
    w.push_back(!any_se ? 1.0 : (p.se > 0 ? std::pow(p.y / p.se, 2) : wmax));
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_exponent: parameters must not all be equal");
  FitResult f;
  f.points = points.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) rss += w[i] * std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  const double dof = static_cast<double>(x.size()) - 2.0;
  f.residual = rss / dof;
  f.slope_se = any_se ? std::sqrt(1.0 / sxx) : std::sqrt(f.residual / sxx);
  return f;
}

VolumeDraws sample_volumes(int d, int ambient, std::uint64_t samples, std::uint64_t seed, Precision precision,
                           std::uint64_t memory_cap) {
  const std::uint64_t cap = memory_cap ? memory_cap : default_memory_cap();
  const std::uint64_t need = d >= kExplorerDim ? explorer_bytes(d, ambient) : full_field_bytes(Domain::box(d, ambient), precision);
  if (need > cap) throw MemoryBudgetExceeded(need, cap);
  VolumeDraws out;
  const auto t0 = Clock::now();
  if (d >= kExplorerDim) volumes_explored(d, ambient, samples, seed, cap, out);
  else if (precision == Precision::single) volumes_full<float>(d, ambient, samples, seed, cap, out);
  else volumes_full<double>(d, ambient, samples, seed, cap, out);
  out.wall_ms = ms_since(t0);
  return out;
}

std::vector<EstimateRecord> volume_tail_records(const VolumeDraws &draws, int d, std::span<const double> thresholds,
                                                std::uint64_t seed) {
  std::vector<EstimateRecord> out;
  ExperimentConfig c;
  c.experiment = ExperimentId::volume_tail;
  c.d = d;
  c.seed = seed;
  for (double M : thresholds) {
    RunningStats st;
    for (Index v : draws.volumes) st.push(static_cast<double>(v) >= M ? 1.0 : 0.0);
    out.push_back(make_record(c, M, st, draws.wall_ms));
  }
  return out;
}

std::vector<EstimateRecord> ghost_records(const VolumeDraws &draws, int d, std::span<const double> levels,
                                          std::uint64_t seed) {
  std::vector<EstimateRecord> out;
  for (double h : levels) {
    if (!(h > 0)) throw std::invalid_argument("ghost: levels must be positive");
    const auto g = ghost_functional(draws.volumes, h);
    EstimateRecord r;
    r.experiment = ExperimentId::ghost;
    r.d = d;
    r.param = h;
    r.estimate = g.mean;
    r.stderr_ = g.se;
    r.n = g.n;
    r.seed = seed;
    r.wall_ms = draws.wall_ms;
    out.push_back(r);
  }
  return out;
}

RunResult run(const ExperimentConfig &config, const RunOptions &options) {
  config.check();
  const std::uint64_t cap = options.memory_cap ? options.memory_cap : default_memory_cap();
  RunResult out;
  out.config = config;
  switch (config.experiment) {
    case ExperimentId::onearm: run_onearm(config, cap, out); break;
    case ExperimentId::twopoint: run_twopoint(config, cap, out); break;
    case ExperimentId::volume_tail:
    case ExperimentId::ghost: run_volume_like(config, cap, out); break;
    case ExperimentId::boundary_moment: run_boundary(config, cap, out); break;
    case ExperimentId::capacity_scaling: run_capacity(config, out); break;
    case ExperimentId::crossing_measure: run_crossing(config, out); break;
    case ExperimentId::isomorphism: run_isomorphism(config, out); break;
    case ExperimentId::max_cluster: run_max_cluster(config, cap, out); break;
    case ExperimentId::validate: throw std::invalid_argument("run: use validate() for the validation suite");
  }
  out.fit = try_fit(out);
  if (options.audit && is_scaling(config.experiment) && !out.records.empty()) {
    // Re-run the first grid point with doubled padding.
    ExperimentConfig a = config;
    a.padding = 2 * config.padding;
    a.grid = {out.records.front().param};
    auto &au = out.audit;
    au.param = out.records.front().param;
    au.padding = a.padding;
    au.estimate = out.records.front().estimate;
    au.se = out.records.front().stderr_;
    try {
      RunOptions o = options;
      o.audit = false;
      o.memory_cap = cap;
      const auto ar = run(a, o);
      if (ar.records.empty()) throw MemoryBudgetExceeded(0, cap);
      au.performed = true;
      au.audit_estimate = ar.records.front().estimate;
      au.audit_se = ar.records.front().stderr_;
      au.delta = au.audit_estimate - au.estimate;
    } catch (const MemoryBudgetExceeded &e) {
      au.note = std::string("skipped: ") + e.what();
    }
  }
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream &os, std::span<const EstimateRecord> records) {
  os << "experiment,d,param,estimate,stderr,n,seed,wall_ms\n";
  for (const auto &r : records)
    os << to_string(r.experiment) << ',' << r.d << ',' << format_double(r.param) << ',' << format_double(r.estimate) << ','
       << format_double(r.stderr_) << ',' << r.n << ',' << r.seed << ',' << format_double(r.wall_ms) << '\n';
}

json summary_json(const RunResult &r) {
  json j;
  j["config"] = r.config.to_json();
  json recs = json::array();
  for (const auto &e : r.records)
    recs.push_back({{"param", e.param}, {"estimate", e.estimate}, {"stderr", e.stderr_}, {"n", e.n}, {"wall_ms", e.wall_ms}});
  j["records"] = recs;
  if (r.fit)
    j["fit"] = {{"slope", r.fit->slope}, {"intercept", r.fit->intercept}, {"slope_se", r.fit->slope_se}, {"residual", r.fit->residual}, {"points", r.fit->points}};
  else
    j["fit"] = nullptr;
  const auto &a = r.audit;
  if (a.performed)
    j["audit"] = {{"param", a.param}, {"padding", a.padding}, {"estimate", a.estimate}, {"stderr", a.se}, {"audit_estimate", a.audit_estimate}, {"audit_stderr", a.audit_se}, {"delta", a.delta}};
  else
    j["audit"] = {{"performed", false}, {"note", a.note}};
  j["truncated"] = r.truncated;
  j["details"] = r.details;
  return j;
}

// ------------------------------------------------------------- validate

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck &c) { return c.passed; });
}

json ValidationReport::to_json() const {
  json cj = json::array();
  for (const auto &c : checks)
    cj.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}, {"seed", c.seed}, {"detail", c.detail}});
  json failed = json::array();
  for (const auto &c : checks)
    if (!c.passed) failed.push_back({{"name", c.name}, {"seed", c.seed}});
  return {{"seed", seed}, {"passed", passed()}, {"checks", cj}, {"failures", failed}};
}

namespace {

double whitened_chi2_pvalue(const Eigen::MatrixXd &C, std::uint64_t n) {
  const Index k = C.rows();
  double stat = 0.0;
  for (Index i = 0; i < k; ++i)
    for (Index j = i; j < k; ++j) {
      const double diff = C(i, j) - (i == j ? 1.0 : 0.0);
      stat += diff * diff / (i == j ? 2.0 : 1.0);
    }
  stat *= static_cast<double>(n);
  boost::math::chi_squared dist(static_cast<double>(k * (k + 1) / 2));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

ValidationCheck check_covariance(std::uint64_t seed) {
  ValidationCheck c{"covariance_vs_green", false, 0.0, 1e-4, seed, ""};
  const Domain B = Domain::box(2, 2);
  const auto G = dirichlet_green(B);
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(G.matrix()).matrixL();
  SpectralSampler<double> spectral(B);
  FactorizedSampler<double> factorized(G);
  const std::uint64_t n = 20000;
  double worst = 1.0;
  for (int which = 0; which < 2; ++which) {
    Rng rng(mix64(seed, static_cast<std::uint64_t>(which)));
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(B.size(), B.size());
    for (std::uint64_t s = 0; s < n; ++s) {
      const auto f = which == 0 ? spectral.sample(rng) : factorized.sample(rng);
      const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(f.values);
      C += z * z.transpose();
    }
    C /= static_cast<double>(n);
    worst = std::min(worst, whitened_chi2_pvalue(C, n));
  }
  c.value = worst;
  c.passed = worst > c.tolerance;
  c.detail = "whitened covariance chi-square p-value on B(2), d=2 (spectral and factorized)";
  return c;
}

ValidationCheck check_bridge(std::uint64_t seed, int d, bool corrupt) {
  ValidationCheck c{"bridge_formula_d" + std::to_string(d), false, 0.0, 4.0, seed, ""};
  const auto law = BridgeLaw::make(d);
  BridgeLaw closed_law = law;
  if (corrupt) closed_law.variance_rate *= 1.5;
  const double a = std::sqrt(static_cast<double>(d));
  const double closed = bridge_survival(closed_law, a, a, 0.0);
  Rng rng(seed);
  const auto o = bridge_survival_oracle(law, a, a, 0.0, 100000, 256, rng);
  c.value = std::fabs(closed - o.extrapolated) / o.stderr_extrapolated;
  c.passed = c.value < c.tolerance;
  c.detail = "|closed form - extrapolated discretized bridge| in standard errors at a=b=sqrt(d), h=0";
  return c;
}

ValidationCheck check_trace(std::uint64_t seed) {
  ValidationCheck c{"trace_identity_vs_enumeration", false, 0.0, 0.05, seed, ""};
  const Domain D = Domain::box(2, 1);
  const VertexSet A1{{-1, -1}, {-1, 0}, {-1, 1}}, A2{{1, -1}, {1, 0}, {1, 1}};
  std::vector<char> a1(static_cast<std::size_t>(D.size()), 0), a2(a1);
  for (const auto &v : A1) a1[static_cast<std::size_t>(D.index_of(v))] = 1;
  for (const auto &v : A2) a2[static_cast<std::size_t>(D.index_of(v))] = 1;
  const int K = kEnumerationMaxLength;
  double mu1 = 0.0;
  for (const auto &l : enumerate_loops(D, K))
    if (crossing_count(l.cycle, a1, a2) == 1) mu1 += l.measure;
  const auto rt = round_trip(A1, A2, D);
  const double exact = crossing_measure(rt, 1);
  const double tail = loop_tail_measure(D, K);
  const auto tc = total_crossing_measure(rt);
  c.value = std::fabs(exact - mu1) / exact;
  const bool within_tail = exact - mu1 >= -1e-12 && exact - mu1 <= tail;
  const bool logdet_ok = std::fabs(tc.value - tc.partial) <= tc.tail_bound + 1e-8;
  c.passed = c.value < c.tolerance && within_tail && logdet_ok;
  c.detail = "relative gap of enumerated single-crossing loops to trace(R); -log det(I-R) vs partial sum";
  return c;
}

ValidationCheck check_isomorphism(std::uint64_t seed) {
  ValidationCheck c{"isomorphism_ks", false, 0.0, 1e-3, seed, ""};
  const Domain D = Domain::from_vertices(1, {{0}, {1}, {2}});
  LoopSoupSampler s(D);
  Rng rng(seed);
  std::vector<std::vector<double>> occ;
  for (int i = 0; i < 20000; ++i) occ.push_back(s.sample(rng).occupation);
  double min_p = 1.0, max_z = 0.0;
  for (const auto &v : isomorphism_test(occ, dirichlet_green(D))) {
    min_p = std::min(min_p, v.ks.p_value);
    max_z = std::max(max_z, std::fabs(v.mean - v.green_diagonal / 2) / v.mean_se);
  }
  c.value = min_p;
  c.passed = min_p > c.tolerance && max_z < 4.0;
  c.detail = "minimum KS p-value against Gamma(1/2, G(x,x)) on the three-vertex chain";
  return c;
}

ValidationCheck check_bfs(std::uint64_t seed) {
  ValidationCheck c{"bfs_vs_union_find", false, 0.0, 0.0, seed, ""};
  const Domain B = Domain::box(3, 5);
  auto dom = std::make_shared<const Domain>(B);
  SpectralSampler<double> sampler(B);
  ClusterExplorer ex(dom);
  const auto law = BridgeLaw::make(3);
  Rng rng(seed);
  int mismatches = 0;
  for (int s = 0; s < 30; ++s) {
    const auto f = sampler.sample(rng);
    const std::uint64_t es = rng();
    const auto level = build_clusters(f, percolate_with_seed(f, 0.0, es, law), 0.0);
    const auto sign = sign_clusters(f, es, law);
    for (Index start = 0; start < B.size(); start += 37) {
      const Index a = ex.explore(f, start, 0.0, ClusterExplorer::Mode::level, es, law, [](Index) { return true; });
      const Index b = level.is_open(start) ? level.size_of(start) : 0;
      const Index a2 = ex.explore(f, start, 0.0, ClusterExplorer::Mode::sign, es, law, [](Index) { return true; });
      const Index b2 = sign.is_open(start) ? sign.size_of(start) : 0;
      mismatches += (a != b) + (a2 != b2);
    }
  }
  ExplorerOptions opt;
  opt.completion_threshold = 30;
  OriginClusterSampler oc(3, 6, opt);
  for (int s = 0; s < 100; ++s) {
    const auto r = oc.explore(rng, {6, 7});
    if (!r.completed_field) continue;
    const auto f = oc.completed_sample();
    const auto labels = build_clusters(f, percolate_with_seed(f, 0.0, r.edge_seed, law), 0.0);
    mismatches += cluster_volume(labels, origin(3)) != r.volume;
  }
  c.value = mismatches;
  c.passed = mismatches == 0;
  c.detail = "cluster sizes from breadth-first exploration that differ from union-find labels";
  return c;
}

}  // namespace

ValidationReport validate(std::uint64_t seed, const ValidationOptions &options) {
  ValidationReport rep;
  rep.seed = seed;
  auto sub = [&](std::uint64_t k) { return mix64(mix64(seed, tag(ExperimentId::validate)), k); };
  rep.checks.push_back(check_covariance(sub(0)));
  rep.checks.push_back(check_bridge(sub(1), 3, options.corrupt_bridge));
  rep.checks.push_back(check_bridge(sub(2), 7, options.corrupt_bridge));
  rep.checks.push_back(check_trace(sub(3)));
  rep.checks.push_back(check_isomorphism(sub(4)));
  rep.checks.push_back(check_bfs(sub(5)));
  return rep;
}

}  // namespace gfflab
