#pragma once

// Closed-form expected distortion of approximate GEMMs.
//
// With per-product errors i.i.d. with mean mu and standard deviation sigma,
// every error element of an (n x m) * (m x p) product is a sum of m errors,
// so
//
//   E[||E||_F^2] = n p (m sigma^2 + m^2 mu^2)
//
// The first term is the variance contribution, the second the bias
// contribution. The bias term dominates once m > sigma^2 / mu^2. A network
// of GEMM layers accumulates the sum of its per-layer terms.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "axnorm/characterization.hpp"
#include "axnorm/gemm.hpp"
#include "axnorm/network.hpp"

namespace axnorm {

struct DistortionEstimate {
  GemmDims dims;
  double variance_term = 0.0;  // n p m sigma^2
  double bias_term = 0.0;      // n p m^2 mu^2
  double total = 0.0;
  bool bias_dominated = false;
  double crossover_m = 0.0;  // sigma^2 / mu^2, +inf when mu == 0
};

DistortionEstimate predict_gemm(const GemmDims& dims, const ErrorMoments& moments);

struct DominanceResult {
  double ratio = 0.0;  // bias_term / variance_term = m mu^2 / sigma^2
  bool bias_dominated = false;
};

// ratio is +inf for sigma == 0 with mu != 0, and 0 whenever mu == 0.
// Throws DomainError for m == 0.
DominanceResult dominance_condition(const ErrorMoments& moments, std::size_t m);

// Reporting view of an accumulated distortion: min(cap, scale / value),
// with value == 0 mapping to the cap.
struct InverseView {
  double cap = 10.0;
  double scale = 1.0;

  double operator()(double accumulated) const noexcept;
};

struct NetworkDistortionReport {
  std::vector<DistortionEstimate> per_layer;
  std::vector<std::string> layer_names;
  double accumulated = 0.0;
  double inverse_scaled = 0.0;
  // Set by lipschitz_bound_note: `accumulated` also bounds the distortion
  // after any elementwise 1-Lipschitz activation.
  bool post_activation_upper_bound = false;
};

// One estimate per layer and their sum. `per_layer_moments`, when given,
// overrides the shared moments layer by layer and must match the layer count.
// Throws DomainError for an empty layer list.
NetworkDistortionReport predict_layers(std::span<const GemmDims> layers, const ErrorMoments& moments,
                                       const InverseView& view = {},
                                       std::span<const ErrorMoments> per_layer_moments = {});

NetworkDistortionReport predict_network(const NetworkDescriptor& net, const ErrorMoments& moments,
                                        const InverseView& view = {},
                                        std::span<const ErrorMoments> per_layer_moments = {});

NetworkDistortionReport lipschitz_bound_note(NetworkDistortionReport report);

// CSV with header layer_index,n,m,p,variance_term,bias_term,total.
std::string report_to_csv(const NetworkDistortionReport& report);

}  // namespace axnorm
