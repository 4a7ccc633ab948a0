#pragma once

// Structured-text run configuration shared by the CLI subcommands. Every
// section is optional; missing values fall back to the defaults below.
//
// {
//   "seed": 0,
//   "threads": 1,
//   "multiplier": {"kind": "mbm", "correction_code": 10},
//   "multipliers": [ ... ],                      // rank; default MBM codes 0..15
//   "distribution": {"kind": "uniform", "lo": 0, "hi": 2},
//   "samples": 16777216,
//   "moments": {"mu": 1e-5, "sigma": 1e-3},      // predict
//   "per_layer_moments": [ {...}, ... ],         // predict, optional
//   "dims": [n, m, p],                           // predict a single GEMM
//   "network": { ...NetworkDescriptor... },      // predict; default toy CNN
//   "inverse_view": {"cap": 10, "scale": 1},
//   "validate": {"trials": 200, "relative_tolerance": 0.05, "z": 3,
//                "cases": [{"dims": [16, 64, 16], "mu": 1e-3, "sigma": 1e-2}]},
//   "grid": "toy" | "imagenet" | {"mu": [...], "sigma": [...], "trials": 2},
//   "toy": {"model_dir": "toy_model", "eval_images": 200, "eval_batch": 50,
//           "train": {"epochs": 4, "learning_rate": 0.05, "momentum": 0.9,
//                     "batch_size": 32, "seed": 1, "train_size": 2400,
//                     "test_size": 600, "accuracy_gate": 0.9}},
//   "rank": {"samples": 1048576, "tie_tolerance": 0.02}
// }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "axnorm/experiments.hpp"
#include "axnorm/serialization.hpp"

namespace axnorm {

struct ToySettings {
  std::optional<std::filesystem::path> model_dir;
  std::size_t eval_images = 200;
  std::size_t eval_batch = 50;
  TrainConfig train{};
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  MultiplierModel multiplier = MultiplierModel::mbm(10);
  std::vector<MultiplierModel> multipliers;  // empty -> MBM codes 0..15
  OperandDistribution distribution = default_operand_distribution();
  std::uint64_t samples = kDefaultCharacterizationSamples;
  std::optional<ErrorMoments> moments;
  std::vector<ErrorMoments> per_layer_moments;
  std::optional<GemmDims> dims;
  NetworkDescriptor network;
  InverseView inverse_view{};
  ValidateOptions validate{};
  std::vector<ValidationCase> validate_cases;
  std::string grid_name = "toy";  // when grid is not given explicitly
  std::optional<SweepGrid> grid;
  ToySettings toy{};
  std::uint64_t rank_samples = std::uint64_t{1} << 20;
  double rank_tie_tolerance = 0.02;

  static RunConfig defaults();
  // Overlays the keys present in `j` onto the defaults. Throws DomainError on
  // malformed values.
  static RunConfig from_json(const Json& j);
  Json to_json() const;

  SweepGrid sweep_grid() const;
  std::vector<MultiplierModel> rank_models() const;
};

// Default Monte Carlo validation cases: (n, p, m) in {(16,16,64),
// (32,32,256), (8,8,1024)} x (mu, sigma) in {(0,1e-2), (1e-3,1e-2), (1e-3,0)}.
std::vector<ValidationCase> default_validation_cases();

// Loads the toy model from settings.model_dir when it holds one; otherwise
// trains it (and saves it there when a directory is configured).
TrainedToy obtain_toy_model(const ToySettings& settings);

// The evaluation images used by sweep and rank: the first eval_images of the
// held-out split.
LabeledImages toy_eval_set(const ToySettings& settings);

}  // namespace axnorm
