#pragma once

// Desk-scale stand-in for large-network experiments: a procedurally
// generated 8-class image set and a small CNN trained on it with exact
// arithmetic.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "axnorm/network.hpp"

namespace axnorm {

struct LabeledImages {
  Tensor4 images;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
};

inline constexpr std::size_t kToyClasses = 8;
inline constexpr std::size_t kToyImageSize = 32;

// Images [first_index, first_index + count) of the synthetic pattern set.
// Each image is a pure function of (seed, index): an oriented colour grating
// whose orientation and palette encode the class, with random phase,
// contrast jitter and pixel noise.
LabeledImages synthetic_patterns(std::size_t count, std::uint64_t seed,
                                 std::uint64_t first_index = 0);

// Conv(3->8, 3x3, s2, p1) -> Conv(8->16, 3x3, s2, p1) -> FC(1024 -> 8),
// ReLU between layers, on (1, 3, 32, 32) inputs.
NetworkDescriptor default_toy_descriptor();

struct TrainConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  std::size_t train_size = 2400;
  std::size_t test_size = 600;
  // Minimum held-out top-1 accuracy with exact multipliers.
  double accuracy_gate = 0.90;
};

struct TrainedToy {
  ToyModel model;
  double test_accuracy = 0.0;
  double final_loss = 0.0;
};

// Minibatch SGD on softmax cross-entropy with exact arithmetic. Weights are
// rounded to binary32 at the end. Deterministic given the config.
// Throws TrainingError (with loss and accuracy in the message) if the
// held-out accuracy is below the gate.
TrainedToy train_toy(const NetworkDescriptor& descriptor, const LabeledImages& train,
                     const LabeledImages& test, const TrainConfig& config);

// Convenience: generates the train/test splits from config.seed and trains.
TrainedToy train_default_toy(const TrainConfig& config = {});

double top1_accuracy(const RealMatrix& logits, const std::vector<std::size_t>& labels);

// Weights go to <dir>/layer_<l>.axm (matrix container); <dir>/model.json
// holds the descriptor, class count and file list.
void save_toy_model(const ToyModel& model, const std::filesystem::path& dir);
ToyModel load_toy_model(const std::filesystem::path& dir);

}  // namespace axnorm
