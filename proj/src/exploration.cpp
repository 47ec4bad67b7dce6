#include "gfflab/exploration.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gfflab {

OriginClusterSampler::OriginClusterSampler(int d, int ambient_radius, ExplorerOptions options)
    : box_(std::make_shared<const Domain>(Domain::box(d, ambient_radius))),
      kernel_(d, ambient_radius),
      options_(options),
      law_(BridgeLaw::make(d, options.convention)) {}

std::uint64_t OriginClusterSampler::completion_bytes() const {
  // spectral scratch, the completed field and the kriging right-hand side
  return 3 * static_cast<std::uint64_t>(box_->size()) * sizeof(float);
}

double OriginClusterSampler::value(Index i) const {
  const auto it = pos_.find(i);
  if (it != pos_.end()) return phi_(it->second);
  if (completed_) return static_cast<double>(field_(i));
  throw std::out_of_range("OriginClusterSampler: value not revealed");
}

void OriginClusterSampler::reveal_block(const std::vector<Index> &block, Rng &rng) {
  const int d = box_->dim();
  const int M = box_->radius();
  const Index b = static_cast<Index>(block.size());
  const Index k = k_;
  if (k + b > L_.rows()) {
    const Index rows = std::max<Index>({2 * L_.rows(), k + b, 64});
    const std::uint64_t bytes = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(rows) * sizeof(double);
    if (bytes > options_.memory_cap) throw MemoryBudgetExceeded(bytes, options_.memory_cap);
    Eigen::MatrixXd grown(rows, rows);
    grown.topLeftCorner(k, k) = L_.topLeftCorner(k, k);
    L_.swap(grown);
    phi_.conservativeResize(rows);
    z_.conservativeResize(rows);
  }
  for (Index i : block) {
    const Vertex v = box_->vertex(i);
    for (int a = 0; a < d; ++a) offsets_.push_back(v[a] + M);
  }
  const std::int32_t *off = offsets_.data();
  Eigen::MatrixXd W(k, b);
  for (Index c = 0; c < b; ++c) {
    const std::int32_t *y = off + (k + c) * d;
    for (Index r = 0; r < k; ++r) W(r, c) = kernel_.from_offsets(off + r * d, y);
  }
  Eigen::MatrixXd S(b, b);
  for (Index c = 0; c < b; ++c)
    for (Index r = c; r < b; ++r) S(r, c) = S(c, r) = kernel_.from_offsets(off + (k + r) * d, off + (k + c) * d);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(b);
  if (k > 0) {
    L_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(W);
    mean.noalias() = W.transpose() * z_.head(k);
    S.noalias() -= W.transpose() * W;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw std::runtime_error("OriginClusterSampler: conditional covariance is not positive definite");
  Eigen::VectorXd xi(b);
  for (Index c = 0; c < b; ++c) xi(c) = rng.normal();
  const Eigen::MatrixXd Ls = llt.matrixL();

  L_.block(k, 0, b, k) = W.transpose();
  L_.block(k, k, b, b) = Ls;
  z_.segment(k, b) = xi;
  phi_.segment(k, b) = mean + Ls * xi;
  for (Index c = 0; c < b; ++c) {
    pos_.emplace(block[static_cast<std::size_t>(c)], k + c);
    order_.push_back(block[static_cast<std::size_t>(c)]);
  }
  k_ += b;
}

void OriginClusterSampler::complete_field(Rng &rng) {
  const std::uint64_t need = completion_bytes();
  if (need > options_.memory_cap) throw MemoryBudgetExceeded(need, options_.memory_cap);
  if (!spectral_) spectral_ = std::make_unique<SpectralSampler<float>>(*box_, options_.memory_cap);
  field_ = spectral_->sample(rng).values;
  // w = G_RR^{-1} (phi_R - psi_R), then phi = psi + G w
  Eigen::VectorXd w(k_);
  for (Index r = 0; r < k_; ++r) w(r) = phi_(r) - static_cast<double>(field_(order_[static_cast<std::size_t>(r)]));
  const auto L = L_.topLeftCorner(k_, k_).triangularView<Eigen::Lower>();
  L.solveInPlace(w);
  L.transpose().solveInPlace(w);
  Eigen::VectorXf u = Eigen::VectorXf::Zero(box_->size());
  for (Index r = 0; r < k_; ++r) u(order_[static_cast<std::size_t>(r)]) = static_cast<float>(w(r));
  spectral_->apply_green(u);
  field_ += u;
  for (Index r = 0; r < k_; ++r) field_(order_[static_cast<std::size_t>(r)]) = static_cast<float>(phi_(r));
  completed_ = true;
}

ExplorationResult OriginClusterSampler::explore(Rng &rng, const ExplorationRule &rule) {
  const Domain &D = *box_;
  const int d = D.dim();
  const int M = D.radius();
  if (rule.restrict_radius < 0 || rule.restrict_radius > M)
    throw std::invalid_argument("explore: restrict radius outside the ambient box");
  pos_.clear();
  offsets_.clear();
  order_.clear();
  k_ = 0;
  completed_ = false;

  ExplorationResult res;
  const std::uint64_t edge_seed = rng();
  res.edge_seed = edge_seed;
  const double h = options_.level;
  const double scale = 2.0 / (law_.variance_rate * law_.length);

  const Index origin = D.index_of(Vertex(d));
  reveal_block({origin}, rng);
  const double phi0 = phi_(0);
  if (!(phi0 > h)) {
    res.revealed = k_;
    return res;
  }
  std::unordered_set<Index> cluster{origin};
  std::vector<Index> queue{origin};
  res.volume = 1;
  res.max_norm = 0;
  if (rule.stop_radius <= 0) {
    res.stopped = true;
    res.revealed = k_;
    return res;
  }

  std::vector<Index> cand, block;
  std::vector<int> cand_norm;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Index i = queue[head];
    const Vertex v = D.vertex(i);
    // neighbours inside the restriction ball and not yet in the cluster
    cand.clear();
    cand_norm.clear();
    block.clear();
    for (int a = 0; a < d; ++a) {
      for (int s = -1; s <= 1; s += 2) {
        const int c = v[a] + s;
        if (c < -rule.restrict_radius || c > rule.restrict_radius) continue;
        int rest_max = 0;
        for (int b2 = 0; b2 < d; ++b2)
          if (b2 != a) rest_max = std::max(rest_max, std::abs(v[b2]));
        const int norm = std::max(rest_max, std::abs(c));
        if (norm > rule.restrict_radius) continue;
        const Index j = i + s * D.stride(a);
        if (cluster.count(j)) continue;
        cand.push_back(j);
        cand_norm.push_back(norm * 2 * d + 2 * a + (s > 0));
        if (!completed_ && !pos_.count(j)) block.push_back(j);
      }
    }
    if (!block.empty()) reveal_block(block, rng);
    const double a_val = value(i);
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const Index j = cand[c];
      const double b_val = value(j);
      if (!(b_val > h)) continue;
      const int code = cand_norm[c];
      const int axis = (code % (2 * d)) / 2;
      const bool up = code % 2 == 1;
      const Index e = edge_id(D, up ? i : j, axis);
      if (!survives(edge_uniform(edge_seed, e), scale * (a_val - h) * (b_val - h))) continue;
      cluster.insert(j);
      queue.push_back(j);
      ++res.volume;
      const int norm = code / (2 * d);
      res.max_norm = std::max(res.max_norm, norm);
      if (norm >= rule.stop_radius) {
        res.stopped = true;
        res.revealed = k_;
        res.completed_field = completed_;
        return res;
      }
    }
    if (!completed_ && k_ > options_.completion_threshold) complete_field(rng);
  }
  res.revealed = k_;
  res.completed_field = completed_;
  return res;
}

FieldSample<float> OriginClusterSampler::completed_sample() const {
  if (!completed_) throw std::logic_error("OriginClusterSampler: field was not completed");
  FieldSample<float> s;
  s.domain = box_;
  s.values = field_;
  s.sampler = SamplerId::explored;
  return s;
}

}  // namespace gfflab
