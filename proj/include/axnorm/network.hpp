#pragma once

// Network descriptors, im2col lowering of convolution and fully connected
// layers to GEMM dimensions, and an inference path that runs every lowered
// GEMM with both an approximate and an exact multiplier.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "axnorm/gemm.hpp"
#include "axnorm/matrix.hpp"
#include "axnorm/multiplier.hpp"

namespace axnorm {

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct FullyConnectedSpec {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  friend bool operator==(const FullyConnectedSpec&, const FullyConnectedSpec&) = default;
};

struct LayerDescriptor {
  std::variant<ConvSpec, FullyConnectedSpec> kind;
  std::string name;

  bool is_conv() const noexcept { return std::holds_alternative<ConvSpec>(kind); }
  // Throws DomainError for zero dimensions.
  void validate() const;
  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

// NCHW.
struct TensorShape {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t features() const noexcept { return channels * height * width; }
  std::size_t elements() const noexcept { return batch * features(); }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerActivation { kRelu, kIdentity };

struct NetworkDescriptor {
  std::vector<LayerDescriptor> layers;
  TensorShape input_shape;
  LayerActivation activation = LayerActivation::kRelu;

  // Checks every layer and that each layer's output feeds the next.
  void validate() const;
  // Input shape seen by each layer, in order.
  std::vector<TensorShape> layer_input_shapes() const;
  std::vector<GemmDims> gemm_dims() const;
  TensorShape output_shape() const;

  friend bool operator==(const NetworkDescriptor&, const NetworkDescriptor&) = default;
};

// Shape produced by a layer. Throws DomainError if the input is incompatible.
TensorShape layer_output_shape(const LayerDescriptor& layer, const TensorShape& input);

// Conv: n = batch * H_out * W_out, m = C_in * K_h * K_w, p = C_out.
// FC:   n = batch, m = in_features, p = out_features.
// Throws DomainError if the kernel exceeds the padded input or the channel
// or feature count does not match.
GemmDims lower_to_gemm(const LayerDescriptor& layer, const TensorShape& input);

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(TensorShape shape) : shape_(shape), data_(shape.elements(), 0.0) {}
  Tensor4(TensorShape shape, std::vector<double> data);

  const TensorShape& shape() const noexcept { return shape_; }
  double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((b * shape_.channels + c) * shape_.height + h) * shape_.width + w];
  }
  double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((b * shape_.channels + c) * shape_.height + h) * shape_.width + w];
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Images [first, first + count) as a new tensor.
  Tensor4 slice(std::size_t first, std::size_t count) const;
  // batch x (C*H*W) matrix in (c, h, w) order.
  RealMatrix flatten() const;

 private:
  TensorShape shape_;
  std::vector<double> data_;
};

// Patch matrix with one row per output position (b, oh, ow) and one column
// per (c, kh, kw); zero padding contributes zeros.
RealMatrix im2col(const Tensor4& input, const ConvSpec& conv);

// Adjoint of im2col: scatters patch-matrix gradients back onto the input.
Tensor4 col2im(const RealMatrix& patches, const TensorShape& input_shape, const ConvSpec& conv);

// Rows (b, oh, ow) x channels -> NCHW.
Tensor4 gemm_rows_to_tensor(const RealMatrix& rows, std::size_t batch, std::size_t height,
                            std::size_t width);
// NCHW -> rows (b, h, w) x channels.
RealMatrix tensor_to_gemm_rows(const Tensor4& t);

// Weight matrix shape for a layer: (m, p) of its lowered GEMM.
std::pair<std::size_t, std::size_t> weight_shape(const LayerDescriptor& layer);

struct ToyModel {
  NetworkDescriptor descriptor;
  std::vector<RealMatrix> weights;  // one (m x p) matrix per layer
  std::size_t classes = 0;

  // Throws DomainError if weight shapes do not match the lowered GEMMs.
  void validate() const;
};

struct ForwardOptions {
  GemmOptions gemm{};
  // Index of the first image of this batch in the evaluation set; offsets
  // the noise coordinates so results do not depend on batching.
  std::uint64_t image_offset = 0;
};

struct ForwardResult {
  RealMatrix logits;        // approximate path, batch x classes
  RealMatrix exact_logits;  // exact path
  std::vector<double> per_layer_frob_sq;
};

// Runs the network twice in lockstep: once with `multiplier` (layer l uses
// noise plan {global_seed, l}) and once exactly. Each layer's measured
// squared Frobenius error is taken before its activation. The exact path is
// never perturbed. Activations are rounded to binary32 before every GEMM in
// both paths. Throws DomainError on shape mismatch and NumericError on a
// non-finite activation.
ForwardResult forward(const ToyModel& model, const Tensor4& input,
                      const MultiplierModel& multiplier, std::uint64_t global_seed,
                      const ForwardOptions& options = {});

// Exact-only inference; returns batch x classes logits.
RealMatrix forward_exact(const ToyModel& model, const Tensor4& input, unsigned threads = 1);

// Row-wise argmax.
std::vector<std::size_t> predict_classes(const RealMatrix& logits);

}  // namespace axnorm
