#include "axnorm/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "axnorm/errors.hpp"
#include "axnorm/toy.hpp"

namespace axnorm {

namespace {

// Structured-text values must stay finite; infinities are written as strings.
Json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DomainError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw DomainError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("field '") + key + "': " + e.what());
  }
}

std::size_t dim_field(const Json& j, const char* key) {
  const auto v = field<long long>(j, key);
  if (v < 0) throw DomainError(std::string("field '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

Json to_json(const MultiplierModel& model) {
  Json j;
  const auto& k = model.kind();
  if (std::holds_alternative<ExactMul>(k)) {
    j["kind"] = "exact";
  } else if (std::holds_alternative<MitchellMul>(k)) {
    j["kind"] = "mitchell";
  } else if (const auto* m = std::get_if<MbmMul>(&k)) {
    j["kind"] = "mbm";
    j["correction_code"] = m->correction_code;
  } else {
    const auto& s = std::get<SyntheticNormalMul>(k);
    j["kind"] = "synthetic_normal";
    j["mu"] = s.mu;
    j["sigma"] = s.sigma;
  }
  return j;
}

MultiplierModel multiplier_from_json(const Json& j) {
  const auto kind = field<std::string>(j, "kind");
  if (kind == "exact") return MultiplierModel::exact();
  if (kind == "mitchell") return MultiplierModel::mitchell();
  if (kind == "mbm") return MultiplierModel::mbm(field<int>(j, "correction_code"));
  if (kind == "synthetic_normal" || kind == "normal") {
    return MultiplierModel::synthetic_normal(field<double>(j, "mu"), field<double>(j, "sigma"));
  }
  throw DomainError("unknown multiplier kind '" + kind + "'");
}

Json to_json(const OperandDistribution& dist) {
  Json j;
  if (const auto* u = std::get_if<UniformOperands>(&dist.kind)) {
    j["kind"] = "uniform";
    j["lo"] = u->lo;
    j["hi"] = u->hi;
  } else {
    const auto& n = std::get<NormalOperands>(dist.kind);
    j["kind"] = "normal";
    j["mean"] = n.mean;
    j["std"] = n.stddev;
  }
  j["seed"] = dist.seed;
  return j;
}

OperandDistribution distribution_from_json(const Json& j) {
  OperandDistribution d;
  const auto kind = field<std::string>(j, "kind");
  if (kind == "uniform") {
    d.kind = UniformOperands{field<double>(j, "lo"), field<double>(j, "hi")};
  } else if (kind == "normal") {
    d.kind = NormalOperands{field<double>(j, "mean"), field<double>(j, "std")};
  } else {
    throw DomainError("unknown operand distribution '" + kind + "'");
  }
  if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  d.validate();
  return d;
}

Json to_json(const ErrorMoments& moments, const std::optional<OperandDistribution>& dist) {
  Json j;
  j["mu"] = moments.mu;
  j["sigma"] = moments.sigma;
  j["sample_count"] = moments.sample_count;
  j["mu_stderr"] = moments.mu_stderr;
  if (dist) {
    j["seed"] = dist->seed;
    j["distribution"] = to_json(*dist);
  }
  return j;
}

CharacterizationRecord moments_from_json(const Json& j) {
  CharacterizationRecord rec;
  const double sigma = field<double>(j, "sigma");
  if (sigma < 0.0) throw DomainError("moments: sigma must be >= 0");
  const std::uint64_t n = j.contains("sample_count") ? j.at("sample_count").get<std::uint64_t>() : 1;
  if (n < 1) throw DomainError("moments: sample_count must be >= 1");
  rec.moments = ErrorMoments::from(field<double>(j, "mu"), sigma, n);
  if (j.contains("distribution")) rec.distribution = distribution_from_json(j.at("distribution"));
  return rec;
}

Json to_json(const LayerDescriptor& layer) {
  Json j;
  if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
    j["kind"] = "conv";
    j["name"] = layer.name;
    j["in_channels"] = c->in_channels;
    j["out_channels"] = c->out_channels;
    j["kernel_h"] = c->kernel_h;
    j["kernel_w"] = c->kernel_w;
    j["stride_h"] = c->stride_h;
    j["stride_w"] = c->stride_w;
    j["pad_h"] = c->pad_h;
    j["pad_w"] = c->pad_w;
  } else {
    const auto& f = std::get<FullyConnectedSpec>(layer.kind);
    j["kind"] = "fully_connected";
    j["name"] = layer.name;
    j["in_features"] = f.in_features;
    j["out_features"] = f.out_features;
  }
  return j;
}

LayerDescriptor layer_from_json(const Json& j) {
  LayerDescriptor layer;
  layer.name = j.value("name", std::string{});
  const auto kind = field<std::string>(j, "kind");
  if (kind == "conv") {
    ConvSpec c;
    c.in_channels = dim_field(j, "in_channels");
    c.out_channels = dim_field(j, "out_channels");
    c.kernel_h = dim_field(j, "kernel_h");
    c.kernel_w = dim_field(j, "kernel_w");
    c.stride_h = j.contains("stride_h") ? dim_field(j, "stride_h") : 1;
    c.stride_w = j.contains("stride_w") ? dim_field(j, "stride_w") : 1;
    c.pad_h = j.contains("pad_h") ? dim_field(j, "pad_h") : 0;
    c.pad_w = j.contains("pad_w") ? dim_field(j, "pad_w") : 0;
    layer.kind = c;
  } else if (kind == "fully_connected" || kind == "fc") {
    layer.kind = FullyConnectedSpec{dim_field(j, "in_features"), dim_field(j, "out_features")};
  } else {
    throw DomainError("unknown layer kind '" + kind + "'");
  }
  layer.validate();
  return layer;
}

Json to_json(const NetworkDescriptor& net) {
  Json j;
  const auto& s = net.input_shape;
  j["input_shape"] = {s.batch, s.channels, s.height, s.width};
  j["activation"] = net.activation == LayerActivation::kRelu ? "relu" : "identity";
  j["layers"] = Json::array();
  for (const auto& layer : net.layers) j["layers"].push_back(to_json(layer));
  return j;
}

NetworkDescriptor network_from_json(const Json& j) {
  NetworkDescriptor net;
  const auto shape = field<std::vector<std::size_t>>(j, "input_shape");
  if (shape.size() != 4) throw DomainError("input_shape must be [batch, channels, height, width]");
  net.input_shape = {shape[0], shape[1], shape[2], shape[3]};
  const auto act = j.value("activation", std::string("relu"));
  if (act == "relu") {
    net.activation = LayerActivation::kRelu;
  } else if (act == "identity") {
    net.activation = LayerActivation::kIdentity;
  } else {
    throw DomainError("unknown activation '" + act + "'");
  }
  if (!j.contains("layers") || !j.at("layers").is_array()) throw DomainError("missing 'layers' array");
  for (const auto& lj : j.at("layers")) net.layers.push_back(layer_from_json(lj));
  net.validate();
  return net;
}

Json to_json(const NetworkDistortionReport& report) {
  Json j;
  j["layers"] = Json::array();
  for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
    const auto& e = report.per_layer[l];
    Json lj;
    lj["name"] = l < report.layer_names.size() ? report.layer_names[l] : "";
    lj["n"] = e.dims.n;
    lj["m"] = e.dims.m;
    lj["p"] = e.dims.p;
    lj["variance_term"] = e.variance_term;
    lj["bias_term"] = e.bias_term;
    lj["total"] = e.total;
    lj["bias_dominated"] = e.bias_dominated;
    lj["crossover_m"] = number_or_inf(e.crossover_m);
    j["layers"].push_back(lj);
  }
  j["accumulated"] = report.accumulated;
  j["inverse_scaled"] = report.inverse_scaled;
  j["post_activation_upper_bound"] = report.post_activation_upper_bound;
  return j;
}

NetworkDistortionReport report_from_json(const Json& j) {
  NetworkDistortionReport r;
  for (const auto& lj : j.at("layers")) {
    DistortionEstimate e;
    e.dims = {dim_field(lj, "n"), dim_field(lj, "m"), dim_field(lj, "p")};
    e.variance_term = field<double>(lj, "variance_term");
    e.bias_term = field<double>(lj, "bias_term");
    e.total = field<double>(lj, "total");
    e.bias_dominated = field<bool>(lj, "bias_dominated");
    e.crossover_m = number_from(lj.at("crossover_m"));
    r.per_layer.push_back(e);
    r.layer_names.push_back(lj.value("name", std::string{}));
  }
  r.accumulated = field<double>(j, "accumulated");
  r.inverse_scaled = field<double>(j, "inverse_scaled");
  r.post_activation_upper_bound = j.value("post_activation_upper_bound", false);
  return r;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void save_toy_model(const ToyModel& model, const std::filesystem::path& dir) {
  model.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Json manifest;
  manifest["network"] = to_json(model.descriptor);
  manifest["classes"] = model.classes;
  manifest["weights"] = Json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const std::string file = "layer_" + std::to_string(l) + ".axm";
    save_matrix(model.weights[l], dir / file);
    manifest["weights"].push_back(file);
  }
  write_text_file(dir / "model.json", manifest.dump(2) + "\n");
}

ToyModel load_toy_model(const std::filesystem::path& dir) {
  const Json manifest = read_json_file(dir / "model.json");
  ToyModel model;
  model.descriptor = network_from_json(manifest.at("network"));
  model.classes = manifest.at("classes").get<std::size_t>();
  for (const auto& file : manifest.at("weights")) {
    model.weights.push_back(load_matrix(dir / file.get<std::string>()));
  }
  model.validate();
  return model;
}

}  // namespace axnorm
