#include "gfflab/gff.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace gfflab {

namespace {

std::mutex planner_mutex;

template <class Scalar> struct Fftw;

template <> struct Fftw<double> {
  static void *plan(int d, int n, int axis, double *data) {
    fftw_iodim64 dim{n, 0, 0};
    fftw_iodim64 loops[2];
    std::int64_t inner = 1;
    for (int a = axis + 1; a < d; ++a) inner *= n;
    std::int64_t outer = 1;
    for (int a = 0; a < axis; ++a) outer *= n;
    dim.is = dim.os = inner;
    loops[0] = {outer, inner * n, inner * n};
    loops[1] = {inner, 1, 1};
    const fftw_r2r_kind kind = FFTW_RODFT00;
    return fftw_plan_guru64_r2r(1, &dim, 2, loops, data, data, &kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void execute(void *p, double *data) { fftw_execute_r2r(static_cast<fftw_plan>(p), data, data); }
  static void destroy(void *p) { fftw_destroy_plan(static_cast<fftw_plan>(p)); }
};

template <> struct Fftw<float> {
  static void *plan(int d, int n, int axis, float *data) {
    fftwf_iodim64 dim{n, 0, 0};
    fftwf_iodim64 loops[2];
    std::int64_t inner = 1;
    for (int a = axis + 1; a < d; ++a) inner *= n;
    std::int64_t outer = 1;
    for (int a = 0; a < axis; ++a) outer *= n;
    dim.is = dim.os = inner;
    loops[0] = {outer, inner * n, inner * n};
    loops[1] = {inner, 1, 1};
    const fftwf_r2r_kind kind = FFTW_RODFT00;
    return fftwf_plan_guru64_r2r(1, &dim, 2, loops, data, data, &kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void execute(void *p, float *data) { fftwf_execute_r2r(static_cast<fftwf_plan>(p), data, data); }
  static void destroy(void *p) { fftwf_destroy_plan(static_cast<fftwf_plan>(p)); }
};

}  // namespace

std::string to_string(SamplerId id) {
  switch (id) {
    case SamplerId::factorized: return "factorized";
    case SamplerId::spectral: return "spectral";
    case SamplerId::explored: return "explored";
  }
  return "unknown";
}

MemoryBudgetExceeded::MemoryBudgetExceeded(std::uint64_t required, std::uint64_t cap)
    : std::runtime_error("memory budget exceeded: need " + std::to_string(required) + " bytes, cap " +
                         std::to_string(cap)),
      required_(required) {}

template <class Scalar> FactorizedSampler<Scalar>::FactorizedSampler(const DirichletGreen &green) {
  if (!green.is_dense()) throw std::invalid_argument("factorized sampler needs a dense Green's matrix");
  domain_ = std::make_shared<const Domain>(green.domain());
  Eigen::LLT<Eigen::MatrixXd> llt(green.matrix());
  if (llt.info() != Eigen::Success) throw std::runtime_error("Cholesky factorization of G_D failed");
  L_ = llt.matrixL();
}

template <class Scalar> FieldSample<Scalar> FactorizedSampler<Scalar>::from_noise(const Eigen::VectorXd &xi) const {
  FieldSample<Scalar> s;
  s.domain = domain_;
  s.values = (L_ * xi).template cast<Scalar>();
  s.sampler = SamplerId::factorized;
  return s;
}

template <class Scalar> FieldSample<Scalar> FactorizedSampler<Scalar>::sample(Rng &rng, std::uint64_t seed) const {
  Eigen::VectorXd xi(L_.rows());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
  auto s = from_noise(xi);
  s.seed = seed;
  return s;
}

template <class Scalar>
SineTransform<Scalar>::SineTransform(int d, int side, Method method) : d_(d), side_(side), size_(1) {
  for (int a = 0; a < d; ++a) size_ *= side;
  dense_ = method == Method::dense || (method == Method::automatic && side <= kDenseSideLimit);
  if (dense_) {
    S_.resize(side, side);
    const double c = std::sqrt(2.0 / (side + 1));
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) S_(i, j) = static_cast<Scalar>(c * std::sin(std::numbers::pi * (i + 1) * (j + 1) / (side + 1)));
  }
}

template <class Scalar> SineTransform<Scalar>::~SineTransform() {
  std::lock_guard lock(planner_mutex);
  for (void *p : plans_) Fftw<Scalar>::destroy(p);
}

template <class Scalar> void SineTransform<Scalar>::apply(Scalar *data) const {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = side_;
  if (dense_) {
    if (scratch_.size() != size_) scratch_.resize(size_);
    Scalar *src = data, *dst = scratch_.data();
    Index inner = size_ / n;
    for (int a = 0; a < d_; ++a, inner /= n) {
      // Axis a: view each outer block as an (inner x n) column-major matrix
      // and multiply by S from the right; the last axis is one (n x outer)
      // product from the left.
      if (inner == 1) {
        Eigen::Map<Mat>(dst, n, size_ / n).noalias() = S_ * Eigen::Map<const Mat>(src, n, size_ / n);
      } else {
        const Index block = inner * n;
        for (Index o = 0; o < size_; o += block)
          Eigen::Map<Mat>(dst + o, inner, n).noalias() = Eigen::Map<const Mat>(src + o, inner, n) * S_;
      }
      std::swap(src, dst);
    }
    if (src != data) std::copy(src, src + size_, data);
    return;
  }
  auto &plans = const_cast<std::vector<void *> &>(plans_);
  if (plans.empty()) {
    std::lock_guard lock(planner_mutex);
    if (plans.empty())
      for (int a = 0; a < d_; ++a) {
        void *p = Fftw<Scalar>::plan(d_, side_, a, data);
        if (!p) throw std::runtime_error("FFTW planning failed");
        plans.push_back(p);
      }
  }
  for (void *p : plans) Fftw<Scalar>::execute(p, data);
  const Scalar norm = static_cast<Scalar>(std::pow(2.0 * (side_ + 1), -0.5 * d_));
  for (Index i = 0; i < size_; ++i) data[i] *= norm;
}

template <class Scalar>
SpectralSampler<Scalar>::SpectralSampler(const Domain &box, std::uint64_t memory_cap) {
  if (!box.is_box()) throw std::invalid_argument("spectral sampler needs a box domain");
  const std::uint64_t need = required_bytes(box);
  if (need > memory_cap) throw MemoryBudgetExceeded(need, memory_cap);
  domain_ = std::make_shared<const Domain>(box);
  const int n = box.side();
  transform_ = std::make_unique<SineTransform<Scalar>>(box.dim(), n);
  for (int k = 1; k <= n; ++k) cos_.push_back(std::cos(std::numbers::pi * k / (n + 1)));
}

template <class Scalar> std::uint64_t SpectralSampler<Scalar>::required_bytes(const Domain &box) {
  // the sample plus the dense transform's scratch buffer
  return 2 * static_cast<std::uint64_t>(box.size()) * sizeof(Scalar);
}

template <class Scalar> void SpectralSampler<Scalar>::scale_modes(Scalar *data, bool square) const {
  const int d = domain_->dim();
  const int n = domain_->side();
  std::vector<int> k(static_cast<std::size_t>(d), 0);
  const Index rows = domain_->size() / n;
  Scalar *p = data;
  for (Index r = 0; r < rows; ++r) {
    double base = 0.0;
    for (int a = 0; a + 1 < d; ++a) base += cos_[static_cast<std::size_t>(k[static_cast<std::size_t>(a)])];
    for (int j = 0; j < n; ++j, ++p) {
      const double lambda = 1.0 - (base + cos_[static_cast<std::size_t>(j)]) / d;
      const double f = square ? 1.0 / lambda : 1.0 / std::sqrt(lambda);
      *p = static_cast<Scalar>(static_cast<double>(*p) * f);
    }
    for (int a = d - 2; a >= 0; --a) {
      auto &ka = k[static_cast<std::size_t>(a)];
      if (++ka < n) break;
      ka = 0;
    }
  }
}

template <class Scalar> FieldSample<Scalar> SpectralSampler<Scalar>::from_noise(const Eigen::VectorXd &xi) const {
  FieldSample<Scalar> s;
  s.domain = domain_;
  s.values = xi.template cast<Scalar>();
  scale_modes(s.values.data(), false);
  transform_->apply(s.values.data());
  s.sampler = SamplerId::spectral;
  return s;
}

template <class Scalar> FieldSample<Scalar> SpectralSampler<Scalar>::sample(Rng &rng, std::uint64_t seed) const {
  FieldSample<Scalar> s;
  s.domain = domain_;
  s.values.resize(domain_->size());
  for (Index i = 0; i < s.values.size(); ++i) s.values(i) = static_cast<Scalar>(rng.normal());
  scale_modes(s.values.data(), false);
  transform_->apply(s.values.data());
  s.sampler = SamplerId::spectral;
  s.seed = seed;
  return s;
}

template <class Scalar> void SpectralSampler<Scalar>::apply_green(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &w) const {
  if (w.size() != domain_->size()) throw std::invalid_argument("apply_green: size mismatch");
  transform_->apply(w.data());
  scale_modes(w.data(), true);
  transform_->apply(w.data());
}

template class FactorizedSampler<double>;
template class FactorizedSampler<float>;
template class SineTransform<double>;
template class SineTransform<float>;
template class SpectralSampler<double>;
template class SpectralSampler<float>;

}  // namespace gfflab
