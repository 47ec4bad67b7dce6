#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "gfflab/green.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

enum class SamplerId { factorized, spectral, explored };

std::string to_string(SamplerId id);

/// One realization of the Dirichlet GFF on a domain.
template <class Scalar> struct FieldSample {
  std::shared_ptr<const Domain> domain;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  std::uint64_t seed = 0;
  SamplerId sampler = SamplerId::factorized;

  Scalar operator[](Index i) const { return values(i); }
  Scalar at(const Vertex &v) const {
    const Index i = domain->index_of(v);
    return i < 0 ? Scalar(0) : values(i);
  }
};

/// Thrown before allocation when a sampler would exceed its memory cap.
class MemoryBudgetExceeded : public std::runtime_error {
public:
  MemoryBudgetExceeded(std::uint64_t required, std::uint64_t cap);
  std::uint64_t required_bytes() const { return required_; }

private:
  std::uint64_t required_;
};

inline constexpr std::uint64_t kDefaultMemoryCap = 8ull << 30;

/// phi = L xi with G_D = L L^T. The factor is computed once per sampler.
template <class Scalar = double> class FactorizedSampler {
public:
  explicit FactorizedSampler(const DirichletGreen &green);

  const Domain &domain() const { return *domain_; }
  FieldSample<Scalar> sample(Rng &rng, std::uint64_t seed = 0) const;
  /// Sample driven by an explicit noise vector.
  FieldSample<Scalar> from_noise(const Eigen::VectorXd &xi) const;

private:
  std::shared_ptr<const Domain> domain_;
  Eigen::MatrixXd L_;
};

template <class Scalar = double> FieldSample<Scalar> sample_factorized(const DirichletGreen &green, Rng &rng) {
  return FactorizedSampler<Scalar>(green).sample(rng);
}

/// Separable DST-I on a d-dimensional box, applied in place along every
/// axis. The sine basis is normalized to be orthonormal, so the transform
/// is an involution. Small sides use a dense matrix product per axis,
/// which beats an FFT for the box sides used here; larger sides go
/// through FFTW.
template <class Scalar> class SineTransform {
public:
  enum class Method { automatic, dense, fftw };
  static constexpr int kDenseSideLimit = 128;

  SineTransform(int d, int side, Method method = Method::automatic);
  ~SineTransform();
  SineTransform(const SineTransform &) = delete;
  SineTransform &operator=(const SineTransform &) = delete;

  Index size() const { return size_; }
  bool dense() const { return dense_; }
  /// data <- S data, with S the orthonormal product-sine matrix.
  void apply(Scalar *data) const;

private:
  int d_;
  int side_;
  Index size_;
  bool dense_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> S_;
  mutable Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scratch_;
  std::vector<void *> plans_;
};

/// Exact Dirichlet GFF sampler on a box through the sine eigenbasis of
/// I - P_D: phi = sum_k xi_k e_k / sqrt(lambda_k).
template <class Scalar = double> class SpectralSampler {
public:
  explicit SpectralSampler(const Domain &box, std::uint64_t memory_cap = kDefaultMemoryCap);

  const Domain &domain() const { return *domain_; }
  /// Bytes needed by one sample plus the transform workspace.
  static std::uint64_t required_bytes(const Domain &box);

  FieldSample<Scalar> sample(Rng &rng, std::uint64_t seed = 0) const;
  /// Sample driven by an explicit noise vector in mode index order.
  FieldSample<Scalar> from_noise(const Eigen::VectorXd &xi) const;
  /// w <- G_D w, evaluated spectrally.
  void apply_green(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &w) const;

private:
  void scale_modes(Scalar *data, bool square) const;

  std::shared_ptr<const Domain> domain_;
  std::unique_ptr<SineTransform<Scalar>> transform_;
  std::vector<double> cos_;  // cos(pi k / (n+1)), k = 1..n
};

template <class Scalar = double>
FieldSample<Scalar> sample_spectral(const Domain &box, Rng &rng, std::uint64_t memory_cap = kDefaultMemoryCap) {
  return SpectralSampler<Scalar>(box, memory_cap).sample(rng);
}

extern template class FactorizedSampler<double>;
extern template class FactorizedSampler<float>;
extern template class SineTransform<double>;
extern template class SineTransform<float>;
extern template class SpectralSampler<double>;
extern template class SpectralSampler<float>;

}  // namespace gfflab
