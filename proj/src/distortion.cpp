#include "axnorm/distortion.hpp"

#include <cmath>
#include <limits>

#include "axnorm/errors.hpp"
#include "axnorm/matrix.hpp"
#include "axnorm/stats.hpp"

namespace axnorm {

DistortionEstimate predict_gemm(const GemmDims& dims, const ErrorMoments& moments) {
  dims.validate();
  if (!(moments.sigma >= 0.0)) throw DomainError("predict_gemm: sigma must be >= 0");
  const double n = static_cast<double>(dims.n);
  const double m = static_cast<double>(dims.m);
  const double p = static_cast<double>(dims.p);
  const double var = moments.sigma * moments.sigma;
  const double mu_sq = moments.mu * moments.mu;

  DistortionEstimate e;
  e.dims = dims;
  e.variance_term = n * p * m * var;
  e.bias_term = n * p * m * m * mu_sq;
  e.total = e.variance_term + e.bias_term;
  e.bias_dominated = dominance_condition(moments, dims.m).bias_dominated;
  e.crossover_m = moments.mu == 0.0 ? std::numeric_limits<double>::infinity() : var / mu_sq;
  return e;
}

DominanceResult dominance_condition(const ErrorMoments& moments, std::size_t m) {
  if (m == 0) throw DomainError("dominance_condition: m must be >= 1");
  if (moments.mu == 0.0) return {0.0, false};
  if (moments.sigma == 0.0) return {std::numeric_limits<double>::infinity(), true};
  const double bias = static_cast<double>(m) * moments.mu * moments.mu;
  const double var = moments.sigma * moments.sigma;
  // Decide on the products, not the rounded quotient, so a quotient that
  // rounds to exactly 1 cannot hide a strict inequality.
  return {bias / var, bias > var};
}

double InverseView::operator()(double accumulated) const noexcept {
  if (accumulated <= 0.0) return cap;
  return std::fmin(cap, scale / accumulated);
}

NetworkDistortionReport predict_layers(std::span<const GemmDims> layers, const ErrorMoments& moments,
                                       const InverseView& view,
                                       std::span<const ErrorMoments> per_layer_moments) {
  if (layers.empty()) throw DomainError("predict_network: network has no GEMM layers");
  if (!per_layer_moments.empty() && per_layer_moments.size() != layers.size()) {
    throw DomainError("predict_network: per-layer moments do not match the layer count");
  }
  NetworkDistortionReport report;
  CompensatedSum sum;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ErrorMoments& mo = per_layer_moments.empty() ? moments : per_layer_moments[l];
    report.per_layer.push_back(predict_gemm(layers[l], mo));
    report.layer_names.push_back("layer" + std::to_string(l));
    sum.add(report.per_layer.back().total);
  }
  report.accumulated = sum.value();
  report.inverse_scaled = view(report.accumulated);
  return report;
}

NetworkDistortionReport predict_network(const NetworkDescriptor& net, const ErrorMoments& moments,
                                        const InverseView& view,
                                        std::span<const ErrorMoments> per_layer_moments) {
  if (net.layers.empty()) throw DomainError("predict_network: network has no GEMM layers");
  const std::vector<GemmDims> dims = net.gemm_dims();
  NetworkDistortionReport report = predict_layers(dims, moments, view, per_layer_moments);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (!net.layers[l].name.empty()) report.layer_names[l] = net.layers[l].name;
  }
  return report;
}

NetworkDistortionReport lipschitz_bound_note(NetworkDistortionReport report) {
  report.post_activation_upper_bound = true;
  return report;
}

std::string report_to_csv(const NetworkDistortionReport& report) {
  std::string out = "layer_index,n,m,p,variance_term,bias_term,total\n";
  for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
    const auto& e = report.per_layer[l];
    out += std::to_string(l) + ',' + std::to_string(e.dims.n) + ',' + std::to_string(e.dims.m) +
           ',' + std::to_string(e.dims.p) + ',' + format_double(e.variance_term) + ',' +
           format_double(e.bias_term) + ',' + format_double(e.total) + '\n';
  }
  return out;
}

}  // namespace axnorm
