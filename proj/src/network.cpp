#include "axnorm/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "axnorm/errors.hpp"

namespace axnorm {

namespace {

std::size_t conv_extent(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t pad,
                        const std::string& name) {
  const std::size_t padded = input + 2 * pad;
  if (kernel > padded) {
    throw DomainError("layer '" + name + "': kernel " + std::to_string(kernel) +
                      " exceeds padded input " + std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

void apply_activation(RealMatrix& m, LayerActivation act) {
  if (act == LayerActivation::kIdentity) return;
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

void check_finite(const RealMatrix& m, std::size_t layer) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw NumericError("non-finite activation in layer " + std::to_string(layer), r, c);
      }
    }
  }
}

// Lowers the activation entering `layer` into the GEMM left operand.
RealMatrix lower_input(const LayerDescriptor& layer, const Tensor4& x) {
  if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) return im2col(x, *conv);
  return x.flatten();
}

// Reshapes a GEMM result into the tensor the next layer consumes.
Tensor4 raise_output(const LayerDescriptor& layer, const RealMatrix& y, const TensorShape& out) {
  if (layer.is_conv()) return gemm_rows_to_tensor(y, out.batch, out.height, out.width);
  std::vector<double> data(y.data().begin(), y.data().end());
  return Tensor4(out, std::move(data));
}

void quantize(std::span<double> values) {
  for (double& v : values) v = static_cast<float>(v);
}

}  // namespace

void LayerDescriptor::validate() const {
  if (const auto* c = std::get_if<ConvSpec>(&kind)) {
    if (!c->in_channels || !c->out_channels || !c->kernel_h || !c->kernel_w || !c->stride_h ||
        !c->stride_w) {
      throw DomainError("conv layer '" + name + "' has a zero dimension");
    }
  } else {
    const auto& f = std::get<FullyConnectedSpec>(kind);
    if (!f.in_features || !f.out_features) {
      throw DomainError("fully connected layer '" + name + "' has a zero dimension");
    }
  }
}

TensorShape layer_output_shape(const LayerDescriptor& layer, const TensorShape& input) {
  layer.validate();
  if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
    if (input.channels != c->in_channels) {
      throw DomainError("layer '" + layer.name + "' expects " + std::to_string(c->in_channels) +
                        " input channels, got " + std::to_string(input.channels));
    }
    return {input.batch, c->out_channels,
            conv_extent(input.height, c->kernel_h, c->stride_h, c->pad_h, layer.name),
            conv_extent(input.width, c->kernel_w, c->stride_w, c->pad_w, layer.name)};
  }
  const auto& f = std::get<FullyConnectedSpec>(layer.kind);
  if (input.features() != f.in_features) {
    throw DomainError("layer '" + layer.name + "' expects " + std::to_string(f.in_features) +
                      " input features, got " + std::to_string(input.features()));
  }
  return {input.batch, f.out_features, 1, 1};
}

GemmDims lower_to_gemm(const LayerDescriptor& layer, const TensorShape& input) {
  const TensorShape out = layer_output_shape(layer, input);
  if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
    return {input.batch * out.height * out.width, c->in_channels * c->kernel_h * c->kernel_w,
            c->out_channels};
  }
  const auto& f = std::get<FullyConnectedSpec>(layer.kind);
  return {input.batch, f.in_features, f.out_features};
}

void NetworkDescriptor::validate() const {
  if (layers.empty()) throw DomainError("network has no layers");
  if (input_shape.elements() == 0) throw DomainError("network input shape has a zero dimension");
  TensorShape shape = input_shape;
  for (const auto& layer : layers) shape = layer_output_shape(layer, shape);
}

std::vector<TensorShape> NetworkDescriptor::layer_input_shapes() const {
  std::vector<TensorShape> shapes;
  TensorShape shape = input_shape;
  for (const auto& layer : layers) {
    shapes.push_back(shape);
    shape = layer_output_shape(layer, shape);
  }
  return shapes;
}

std::vector<GemmDims> NetworkDescriptor::gemm_dims() const {
  std::vector<GemmDims> dims;
  TensorShape shape = input_shape;
  for (const auto& layer : layers) {
    dims.push_back(lower_to_gemm(layer, shape));
    shape = layer_output_shape(layer, shape);
  }
  return dims;
}

TensorShape NetworkDescriptor::output_shape() const {
  TensorShape shape = input_shape;
  for (const auto& layer : layers) shape = layer_output_shape(layer, shape);
  return shape;
}

Tensor4::Tensor4(TensorShape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.elements()) throw DomainError("tensor data length does not match shape");
}

Tensor4 Tensor4::slice(std::size_t first, std::size_t count) const {
  if (first + count > shape_.batch || count == 0) throw DomainError("tensor slice out of range");
  TensorShape s = shape_;
  s.batch = count;
  const std::size_t per = shape_.features();
  std::vector<double> data(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                           data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor4(s, std::move(data));
}

RealMatrix Tensor4::flatten() const {
  return RealMatrix(shape_.batch, shape_.features(), data_);
}

RealMatrix im2col(const Tensor4& input, const ConvSpec& conv) {
  const TensorShape& s = input.shape();
  if (s.channels != conv.in_channels) throw DomainError("im2col: channel count mismatch");
  const std::size_t oh = conv_extent(s.height, conv.kernel_h, conv.stride_h, conv.pad_h, "im2col");
  const std::size_t ow = conv_extent(s.width, conv.kernel_w, conv.stride_w, conv.pad_w, "im2col");
  const std::size_t m = conv.in_channels * conv.kernel_h * conv.kernel_w;
  RealMatrix patches(s.batch * oh * ow, m);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        auto row = patches.row((b * oh + y) * ow + x);
        std::size_t col = 0;
        for (std::size_t c = 0; c < conv.in_channels; ++c) {
          for (std::size_t ky = 0; ky < conv.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * conv.stride_h + ky) -
                                      static_cast<std::ptrdiff_t>(conv.pad_h);
            for (std::size_t kx = 0; kx < conv.kernel_w; ++kx, ++col) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * conv.stride_w + kx) -
                                        static_cast<std::ptrdiff_t>(conv.pad_w);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.height) ||
                  ix >= static_cast<std::ptrdiff_t>(s.width)) {
                continue;
              }
              row[col] = input.at(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
      }
    }
  }
  return patches;
}

Tensor4 col2im(const RealMatrix& patches, const TensorShape& s, const ConvSpec& conv) {
  const std::size_t oh = conv_extent(s.height, conv.kernel_h, conv.stride_h, conv.pad_h, "col2im");
  const std::size_t ow = conv_extent(s.width, conv.kernel_w, conv.stride_w, conv.pad_w, "col2im");
  if (patches.rows() != s.batch * oh * ow ||
      patches.cols() != conv.in_channels * conv.kernel_h * conv.kernel_w) {
    throw DomainError("col2im: patch matrix shape mismatch");
  }
  Tensor4 out(s);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const auto row = patches.row((b * oh + y) * ow + x);
        std::size_t col = 0;
        for (std::size_t c = 0; c < conv.in_channels; ++c) {
          for (std::size_t ky = 0; ky < conv.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * conv.stride_h + ky) -
                                      static_cast<std::ptrdiff_t>(conv.pad_h);
            for (std::size_t kx = 0; kx < conv.kernel_w; ++kx, ++col) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * conv.stride_w + kx) -
                                        static_cast<std::ptrdiff_t>(conv.pad_w);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.height) ||
                  ix >= static_cast<std::ptrdiff_t>(s.width)) {
                continue;
              }
              out.at(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += row[col];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor4 gemm_rows_to_tensor(const RealMatrix& rows, std::size_t batch, std::size_t height,
                            std::size_t width) {
  if (rows.rows() != batch * height * width) throw DomainError("gemm_rows_to_tensor: row count mismatch");
  Tensor4 t(TensorShape{batch, rows.cols(), height, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w) {
        const auto r = rows.row((b * height + h) * width + w);
        for (std::size_t c = 0; c < rows.cols(); ++c) t.at(b, c, h, w) = r[c];
      }
    }
  }
  return t;
}

RealMatrix tensor_to_gemm_rows(const Tensor4& t) {
  const TensorShape& s = t.shape();
  RealMatrix rows(s.batch * s.height * s.width, s.channels);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.height; ++h) {
      for (std::size_t w = 0; w < s.width; ++w) {
        auto r = rows.row((b * s.height + h) * s.width + w);
        for (std::size_t c = 0; c < s.channels; ++c) r[c] = t.at(b, c, h, w);
      }
    }
  }
  return rows;
}

std::pair<std::size_t, std::size_t> weight_shape(const LayerDescriptor& layer) {
  if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
    return {c->in_channels * c->kernel_h * c->kernel_w, c->out_channels};
  }
  const auto& f = std::get<FullyConnectedSpec>(layer.kind);
  return {f.in_features, f.out_features};
}

void ToyModel::validate() const {
  descriptor.validate();
  if (weights.size() != descriptor.layers.size()) {
    throw DomainError("toy model has " + std::to_string(weights.size()) + " weight matrices for " +
                      std::to_string(descriptor.layers.size()) + " layers");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto [m, p] = weight_shape(descriptor.layers[l]);
    if (weights[l].rows() != m || weights[l].cols() != p) {
      throw DomainError("weight matrix of layer " + std::to_string(l) + " does not match its GEMM");
    }
  }
  if (descriptor.output_shape().features() != classes) {
    throw DomainError("network output width does not match the class count");
  }
}

ForwardResult forward(const ToyModel& model, const Tensor4& input,
                      const MultiplierModel& multiplier, std::uint64_t global_seed,
                      const ForwardOptions& options) {
  const auto& layers = model.descriptor.layers;
  TensorShape shape = input.shape();
  if (shape.channels != model.descriptor.input_shape.channels ||
      shape.height != model.descriptor.input_shape.height ||
      shape.width != model.descriptor.input_shape.width) {
    throw DomainError("forward: input tensor does not match the network input shape");
  }

  Tensor4 approx = input;
  Tensor4 exact = input;
  ForwardResult result;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerDescriptor& layer = layers[l];
    const TensorShape out = layer_output_shape(layer, shape);
    const std::size_t rows_per_image = out.height * out.width;

    quantize(approx.data());
    quantize(exact.data());
    const RealMatrix a_in = lower_input(layer, approx);
    const RealMatrix e_in = lower_input(layer, exact);

    NoisePlan plan{global_seed, static_cast<std::uint32_t>(l), options.image_offset * rows_per_image};
    RealMatrix y_approx = gemm_approx(a_in, model.weights[l], multiplier, plan, options.gemm);
    RealMatrix y_exact = gemm_exact(e_in, model.weights[l], options.gemm);
    result.per_layer_frob_sq.push_back(error_matrix(y_exact, y_approx).stats.frob_sq);

    const bool last = l + 1 == layers.size();
    if (!last) {
      apply_activation(y_approx, model.descriptor.activation);
      apply_activation(y_exact, model.descriptor.activation);
    }
    check_finite(y_approx, l);
    if (last) {
      result.logits = std::move(y_approx);
      result.exact_logits = std::move(y_exact);
    } else {
      approx = raise_output(layer, y_approx, out);
      exact = raise_output(layer, y_exact, out);
    }
    shape = out;
  }
  return result;
}

RealMatrix forward_exact(const ToyModel& model, const Tensor4& input, unsigned threads) {
  const auto& layers = model.descriptor.layers;
  TensorShape shape = input.shape();
  Tensor4 x = input;
  GemmOptions gemm{threads, {}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const TensorShape out = layer_output_shape(layers[l], shape);
    quantize(x.data());
    RealMatrix y = gemm_exact(lower_input(layers[l], x), model.weights[l], gemm);
    if (l + 1 == layers.size()) return y;
    apply_activation(y, model.descriptor.activation);
    x = raise_output(layers[l], y, out);
    shape = out;
  }
  throw DomainError("forward_exact: network has no layers");
}

std::vector<std::size_t> predict_classes(const RealMatrix& logits) {
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace axnorm
