#pragma once

// Experiment drivers behind the command-line tool: synthetic-error sweeps
// over (mu, sigma), multiplier ranking, Monte Carlo validation of the
// closed-form distortion and plot-data emission.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "axnorm/characterization.hpp"
#include "axnorm/distortion.hpp"
#include "axnorm/serialization.hpp"
#include "axnorm/toy.hpp"

namespace axnorm {

struct ExperimentOptions {
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::size_t eval_batch = 50;
};

struct SweepGrid {
  std::vector<double> mu_values;
  std::vector<double> sigma_values;
  std::size_t trials_per_point = 1;

  // Throws DomainError for empty axes, non-finite values, negative sigma or
  // zero trials.
  void validate() const;
};

// mu in [0, 3e-5], sigma in [0, 2e-3], six evenly spaced values each: the
// ranges used for large ImageNet networks.
SweepGrid imagenet_range_grid();

// Ranges scaled for the default toy CNN, whose small inner dimensions move
// the accuracy collapse to larger errors. Spans full accuracy to collapse.
SweepGrid toy_preset_grid();

struct SweepRow {
  double mu = 0.0;
  double sigma = 0.0;
  double predicted_accumulated = 0.0;
  double measured_mean_frob_sq = 0.0;  // per image, summed over layers
  double toy_accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // mu-major, sigma-minor
  std::size_t mu_count = 0;
  std::size_t sigma_count = 0;
  double baseline_accuracy = 0.0;  // exact multiplier
  Json manifest;
};

// For each grid point: the accumulated closed-form prediction for the
// network (batch 1), and injected inference over `eval` with
// trials_per_point noise seeds derived from (options.seed, point, trial).
// Throws PreconditionError if the model is not trained (no weights).
SweepResult run_sweep(const ToyModel& model, const LabeledImages& eval, const SweepGrid& grid,
                      const ExperimentOptions& options = {});

std::string sweep_to_csv(const SweepResult& result);

struct EvaluationSummary {
  double accuracy = 0.0;
  double mean_frob_sq = 0.0;            // per image, summed over layers
  std::vector<double> layer_frob_sq;    // per image, per layer
};

// Injected inference of one multiplier over `eval` with one noise seed.
EvaluationSummary evaluate_multiplier(const ToyModel& model, const LabeledImages& eval,
                                      const MultiplierModel& multiplier, std::uint64_t noise_seed,
                                      const ExperimentOptions& options = {});

struct RankedRow {
  MultiplierModel model;
  ErrorMoments moments;
  double predicted = 0.0;
  double measured_mean_frob_sq = 0.0;
  double toy_accuracy = 0.0;
};

struct RankedMultiplierTable {
  std::vector<RankedRow> rows;  // ascending predicted distortion
  std::optional<double> spearman_pred_vs_acc;
  std::optional<double> spearman_pred_vs_measured;
  Json manifest;
};

struct RankOptions {
  ExperimentOptions experiment{};
  std::uint64_t characterization_samples = std::uint64_t{1} << 20;
  // Relative gap below which two distortions count as tied when ranking.
  double tie_tolerance = 0.0;
};

// Characterizes each model over `dist`, predicts its accumulated network
// distortion, measures accuracy and distortion under bit-level (or
// synthetic) injection, and sorts by prediction. Throws DomainError for
// fewer than two models.
RankedMultiplierTable rank_multipliers(const std::vector<MultiplierModel>& models,
                                       const OperandDistribution& dist, const ToyModel& model,
                                       const LabeledImages& eval, const RankOptions& options = {});

std::string ranking_to_csv(const RankedMultiplierTable& table);

struct ValidationCase {
  GemmDims dims;
  double mu = 0.0;
  double sigma = 0.0;
};

struct ValidationRow {
  ValidationCase spec;
  double predicted = 0.0;
  double empirical_mean = 0.0;
  double empirical_stderr = 0.0;
  double relative_error = 0.0;  // (empirical - predicted) / predicted, 0 when both are 0
  double z_score = 0.0;         // (empirical - predicted) / stderr, 0 when both are 0
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationRow> rows;
  bool pass = false;
};

struct ValidateOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double z = 3.0;
  // A case also passes when within this relative error of the prediction.
  double relative_tolerance = 0.05;
};

// Empirical mean of ||E||_F^2 over `trials` random GEMMs with synthetic
// N(mu, sigma) injection, compared against n p (m sigma^2 + m^2 mu^2).
// A case passes when |empirical - predicted| <= max(relative_tolerance *
// predicted, z * stderr). Throws DomainError for fewer than 30 trials.
ValidationReport validate_formula(const std::vector<ValidationCase>& cases,
                                  const ValidateOptions& options = {});

std::string validation_to_csv(const ValidationReport& report);

// Writes accuracy_surface.csv, accumulated_norm_surface.csv and
// inverse_capped_surface.csv (mu rows x sigma columns) plus manifest.json.
// Throws PreconditionError for an empty result and IoError for an
// unwritable directory.
void emit_plotdata(const SweepResult& result, const std::filesystem::path& out_dir,
                   const InverseView& view = {});
// One row per model: predicted, accuracy and capped inverse series.
void emit_plotdata(const RankedMultiplierTable& table, const std::filesystem::path& out_dir,
                   const InverseView& view = {});

// Parses a CSV written by sweep_to_csv.
SweepResult sweep_from_csv(const std::string& text);

}  // namespace axnorm
