#pragma once

// Structured-text (JSON) forms of the domain records.
//
//   multiplier    {"kind": "exact" | "mitchell" | "mbm" | "synthetic_normal",
//                  "correction_code": 10, "mu": 0.0, "sigma": 0.0}
//   distribution  {"kind": "uniform", "lo": -2, "hi": 2, "seed": 7}
//                 {"kind": "normal", "mean": 0, "std": 1, "seed": 7}
//   moments       {"mu", "sigma", "sample_count", "mu_stderr", "seed", "distribution"}
//   network       {"input_shape": [b, c, h, w], "activation": "relu",
//                  "layers": [{"kind": "conv", "name", "in_channels", "out_channels",
//                              "kernel_h", "kernel_w", "stride_h", "stride_w",
//                              "pad_h", "pad_w"},
//                             {"kind": "fully_connected", "name", "in_features",
//                              "out_features"}]}

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "axnorm/characterization.hpp"
#include "axnorm/distortion.hpp"
#include "axnorm/multiplier.hpp"
#include "axnorm/network.hpp"

namespace axnorm {

using Json = nlohmann::ordered_json;

Json to_json(const MultiplierModel& model);
MultiplierModel multiplier_from_json(const Json& j);

Json to_json(const OperandDistribution& dist);
OperandDistribution distribution_from_json(const Json& j);

// Moments plus the provenance of the run that produced them.
struct CharacterizationRecord {
  ErrorMoments moments;
  std::optional<OperandDistribution> distribution;
};

Json to_json(const ErrorMoments& moments, const std::optional<OperandDistribution>& dist = {});
CharacterizationRecord moments_from_json(const Json& j);

Json to_json(const LayerDescriptor& layer);
LayerDescriptor layer_from_json(const Json& j);
Json to_json(const NetworkDescriptor& net);
NetworkDescriptor network_from_json(const Json& j);

Json to_json(const NetworkDistortionReport& report);
NetworkDistortionReport report_from_json(const Json& j);

// Reads and parses a JSON file; throws IoError on failure.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace axnorm
