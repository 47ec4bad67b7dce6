#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gfflab/lattice.hpp"

namespace gfflab {

enum class ExperimentId {
  onearm,
  twopoint,
  volume_tail,
  boundary_moment,
  ghost,
  capacity_scaling,
  crossing_measure,
  isomorphism,
  max_cluster,
  validate
};

std::string to_string(ExperimentId id);
/// Throws std::invalid_argument on an unknown name.
ExperimentId parse_experiment(const std::string &name);

enum class Precision { single, dual };

/// Experiment description. `padding` is the ambient margin beyond the
/// region the experiment looks at:
///   onearm, boundary_moment   ambient B(max N + padding) / B(N + padding)
///   twopoint                  pairs inside B(4), ambient B(4 + padding)
///   volume_tail, ghost        ambient B(padding)
///   max_cluster               box and ambient B(padding)
///   crossing_measure          A = {0}, A2 = sphere of radius N, ambient B(N + padding)
///   capacity_scaling          truncation radii scaled by padding / 4 (4 = default ladder)
///   isomorphism               unused; the grid lists chain lengths (d = 1) or patch sides (d = 2)
struct ExperimentConfig {
  ExperimentId experiment = ExperimentId::onearm;
  int d = 3;
  std::vector<double> grid;
  int padding = 4;
  std::uint64_t samples = 1000;
  std::uint64_t seed = 1;
  Precision precision = Precision::dual;
  std::string out = ".";

  /// Keys must be exactly {experiment, d, grid, padding, samples, seed,
  /// precision, out}; anything else is rejected.
  static ExperimentConfig from_json(const nlohmann::json &j);
  static ExperimentConfig load(const std::string &path);
  nlohmann::json to_json() const;
  /// Throws std::invalid_argument when an invariant fails.
  void check() const;
};

struct EstimateRecord {
  ExperimentId experiment = ExperimentId::onearm;
  int d = 0;
  double param = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
};

struct FitPoint {
  double x = 0.0;
  double y = 0.0;
  double se = 0.0;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  /// Weighted residual sum of squares per degree of freedom (0 on exact
  /// power laws).
  double residual = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares of log y on log x with weights (y / se)^2, the
/// delta-method inverse variance of log y. With every se zero the fit is
/// unweighted and slope_se comes from the residual scatter.
FitResult fit_exponent(std::span<const FitPoint> points);

struct AuditResult {
  bool performed = false;
  std::string note;
  double param = 0.0;
  int padding = 0;
  double estimate = 0.0, se = 0.0;
  double audit_estimate = 0.0, audit_se = 0.0;
  double delta = 0.0;
};

struct RunOptions {
  bool audit = true;
  std::uint64_t memory_cap = 0;  // 0 selects default_memory_cap()
};

struct RunResult {
  ExperimentConfig config;
  std::vector<EstimateRecord> records;
  std::optional<FitResult> fit;
  AuditResult audit;
  std::vector<double> truncated;  // grid points dropped by the memory ceiling
  nlohmann::json details = nlohmann::json::object();
};

/// min(8 GiB, three quarters of physical memory).
std::uint64_t default_memory_cap();

RunResult run(const ExperimentConfig &config, const RunOptions &options = {});

/// Origin-cluster volumes on an ambient box at level 0. Draws whose cluster
/// touches the ambient boundary are censored and not kept; sampling stops
/// after `samples` uncensored draws (or 20 x samples attempts).
struct VolumeDraws {
  std::vector<Index> volumes;
  std::uint64_t censored = 0;
  std::uint64_t attempts = 0;
  double wall_ms = 0.0;
};

VolumeDraws sample_volumes(int d, int ambient, std::uint64_t samples, std::uint64_t seed, Precision precision,
                           std::uint64_t memory_cap = 0);
std::vector<EstimateRecord> volume_tail_records(const VolumeDraws &draws, int d, std::span<const double> thresholds,
                                                std::uint64_t seed);
std::vector<EstimateRecord> ghost_records(const VolumeDraws &draws, int d, std::span<const double> levels,
                                          std::uint64_t seed);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

void write_csv(std::ostream &os, std::span<const EstimateRecord> records);
nlohmann::json summary_json(const RunResult &result);

struct ValidationOptions {
  /// Mutation hook: scale the bridge variance rate used by the closed form.
  bool corrupt_bridge = false;
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  std::string detail;
};

struct ValidationReport {
  std::uint64_t seed = 0;
  std::vector<ValidationCheck> checks;
  bool passed() const;
  nlohmann::json to_json() const;
};

ValidationReport validate(std::uint64_t seed = 1, const ValidationOptions &options = {});

}  // namespace gfflab
