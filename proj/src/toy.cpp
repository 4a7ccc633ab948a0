#include "axnorm/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "axnorm/errors.hpp"
#include "axnorm/noise.hpp"

namespace axnorm {

namespace {

struct Palette {
  double r, g, b;
};

constexpr Palette kPalettes[2] = {{1.0, 0.55, 0.15}, {0.15, 0.55, 1.0}};

struct LayerCache {
  TensorShape in_shape;
  TensorShape out_shape;
  RealMatrix lowered;  // GEMM left operand
  RealMatrix preact;   // GEMM output before activation
};

RealMatrix lower(const LayerDescriptor& layer, const Tensor4& x) {
  if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) return im2col(x, *c);
  return x.flatten();
}

Tensor4 raise(const LayerDescriptor& layer, const RealMatrix& y, const TensorShape& out) {
  if (layer.is_conv()) return gemm_rows_to_tensor(y, out.batch, out.height, out.width);
  return Tensor4(out, std::vector<double>(y.data().begin(), y.data().end()));
}

// Gradient w.r.t. a layer's input tensor, re-expressed in the GEMM-row
// layout of the previous layer's output.
RealMatrix to_rows(const LayerDescriptor& producer, const Tensor4& grad) {
  if (producer.is_conv()) return tensor_to_gemm_rows(grad);
  return grad.flatten();
}

// Softmax cross-entropy; writes d(loss)/d(logits) averaged over the batch.
double softmax_xent(const RealMatrix& logits, std::span<const std::size_t> labels, RealMatrix& grad) {
  grad = RealMatrix(logits.rows(), logits.cols());
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - row[labels[r]];
    auto g = grad.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      g[c] = std::exp(row[c] - log_z) * inv_batch;
    }
    g[labels[r]] -= inv_batch;
  }
  return loss * inv_batch;
}

Tensor4 gather(const Tensor4& images, std::span<const std::size_t> idx) {
  TensorShape s = images.shape();
  const std::size_t per = s.features();
  s.batch = idx.size();
  std::vector<double> data(s.elements());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = images.data().subspan(idx[i] * per, per);
    std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor4(s, std::move(data));
}

}  // namespace

LabeledImages synthetic_patterns(std::size_t count, std::uint64_t seed, std::uint64_t first_index) {
  if (count == 0) throw DomainError("synthetic_patterns: count must be positive");
  constexpr std::size_t n = kToyImageSize;
  LabeledImages out;
  out.classes = kToyClasses;
  out.images = Tensor4(TensorShape{count, 3, n, n});
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t index = first_index + i;
    CounterStream rng(derive_seed(seed, index), 0x1A6Eu);
    const std::size_t label = rng.below(kToyClasses);
    out.labels[i] = label;

    const double theta = static_cast<double>(label % 4) * std::numbers::pi / 4.0 + 0.12 * (rng.uniform() - 0.5);
    const Palette pal = kPalettes[label / 4];
    const double period = 5.0 + 2.0 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double contrast = 0.3 + 0.15 * rng.uniform();
    const double brightness = 0.4 + 0.2 * rng.uniform();
    const double cx = std::cos(theta), sy = std::sin(theta);
    const double channel_gain[3] = {pal.r, pal.g, pal.b};

    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double u = static_cast<double>(x) * cx + static_cast<double>(y) * sy;
        const double wave = std::sin(2.0 * std::numbers::pi * u / period + phase);
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = channel_gain[c] * (brightness + contrast * wave) + 0.08 * rng.normal();
          out.images.at(i, c, y, x) = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

NetworkDescriptor default_toy_descriptor() {
  NetworkDescriptor d;
  d.input_shape = {1, 3, kToyImageSize, kToyImageSize};
  d.activation = LayerActivation::kRelu;
  d.layers.push_back({ConvSpec{3, 8, 3, 3, 2, 2, 1, 1}, "conv1"});
  d.layers.push_back({ConvSpec{8, 16, 3, 3, 2, 2, 1, 1}, "conv2"});
  d.layers.push_back({FullyConnectedSpec{16 * 8 * 8, kToyClasses}, "fc"});
  return d;
}

double top1_accuracy(const RealMatrix& logits, const std::vector<std::size_t>& labels) {
  if (logits.rows() != labels.size()) throw DomainError("top1_accuracy: label count mismatch");
  const auto predicted = predict_classes(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

TrainedToy train_toy(const NetworkDescriptor& descriptor, const LabeledImages& train,
                     const LabeledImages& test, const TrainConfig& config) {
  descriptor.validate();
  if (config.batch_size == 0 || config.epochs == 0) {
    throw DomainError("train_toy: batch size and epochs must be positive");
  }
  const std::size_t classes = descriptor.output_shape().features();
  for (std::size_t label : train.labels) {
    if (label >= classes) throw DomainError("train_toy: label outside [0, classes)");
  }
  const auto& layers = descriptor.layers;

  ToyModel model;
  model.descriptor = descriptor;
  model.classes = classes;
  CounterStream init(config.seed, 0x1417u);
  for (const auto& layer : layers) {
    const auto [m, p] = weight_shape(layer);
    RealMatrix w(m, p);
    const double scale = std::sqrt(2.0 / static_cast<double>(m));
    for (double& v : w.data()) v = scale * init.normal();
    model.weights.push_back(std::move(w));
  }
  std::vector<RealMatrix> velocity;
  for (const auto& w : model.weights) velocity.emplace_back(w.rows(), w.cols());

  const std::size_t n_train = train.labels.size();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterStream shuffle(config.seed, 0x5FFEu);
  double last_epoch_loss = 0.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n_train - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      std::vector<std::size_t> labels;
      for (std::size_t i : idx) labels.push_back(train.labels[i]);

      std::vector<LayerCache> caches;
      Tensor4 x = gather(train.images, idx);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        LayerCache cache;
        cache.in_shape = x.shape();
        cache.out_shape = layer_output_shape(layers[l], x.shape());
        cache.lowered = lower(layers[l], x);
        cache.preact = gemm_exact(cache.lowered, model.weights[l]);
        if (l + 1 < layers.size()) {
          RealMatrix act = cache.preact;
          for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
          x = raise(layers[l], act, cache.out_shape);
        }
        caches.push_back(std::move(cache));
      }

      RealMatrix grad;
      loss_sum += softmax_xent(caches.back().preact, labels, grad);
      ++batches;

      for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerCache& cache = caches[l];
        const RealMatrix dw = gemm_exact(cache.lowered.transposed(), grad);
        if (l > 0) {
          const RealMatrix dlowered = gemm_exact(grad, model.weights[l].transposed());
          Tensor4 dx = layers[l].is_conv()
                           ? col2im(dlowered, cache.in_shape, std::get<ConvSpec>(layers[l].kind))
                           : Tensor4(cache.in_shape, std::vector<double>(dlowered.data().begin(),
                                                                         dlowered.data().end()));
          grad = to_rows(layers[l - 1], dx);
          const auto pre = caches[l - 1].preact.data();
          auto g = grad.data();
          for (std::size_t t = 0; t < g.size(); ++t) {
            if (pre[t] <= 0.0) g[t] = 0.0;
          }
        }
        auto v = velocity[l].data();
        auto w = model.weights[l].data();
        const auto d = dw.data();
        for (std::size_t t = 0; t < w.size(); ++t) {
          v[t] = config.momentum * v[t] - config.learning_rate * d[t];
          w[t] += v[t];
        }
      }
    }
    last_epoch_loss = loss_sum / static_cast<double>(batches);
    if (!std::isfinite(last_epoch_loss)) {
      throw TrainingError("train_toy: loss diverged in epoch " + std::to_string(epoch));
    }
  }

  for (auto& w : model.weights) w.quantize_to_binary32();
  model.validate();

  TrainedToy result;
  result.model = std::move(model);
  result.final_loss = last_epoch_loss;
  result.test_accuracy = top1_accuracy(forward_exact(result.model, test.images), test.labels);
  if (result.test_accuracy < config.accuracy_gate) {
    std::ostringstream msg;
    msg << "train_toy: held-out accuracy " << result.test_accuracy << " below gate "
        << config.accuracy_gate << " (final epoch loss " << last_epoch_loss << ", "
        << config.epochs << " epochs, lr " << config.learning_rate << ")";
    throw TrainingError(msg.str());
  }
  return result;
}

TrainedToy train_default_toy(const TrainConfig& config) {
  const LabeledImages train = synthetic_patterns(config.train_size, config.seed, 0);
  const LabeledImages test = synthetic_patterns(config.test_size, config.seed, 1u << 30);
  return train_toy(default_toy_descriptor(), train, test, config);
}

}  // namespace axnorm
