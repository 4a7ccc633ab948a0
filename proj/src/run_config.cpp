#include "axnorm/run_config.hpp"

#include "axnorm/errors.hpp"

namespace axnorm {

namespace {

constexpr std::uint64_t kHeldOutFirstIndex = std::uint64_t{1} << 30;

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("config field '") + key + "': " + e.what());
  }
}

GemmDims dims_from(const Json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 3) throw DomainError("dims must be [n, m, p]");
  GemmDims d{v[0], v[1], v[2]};
  d.validate();
  return d;
}

Json dims_json(const GemmDims& d) { return Json::array({d.n, d.m, d.p}); }

}  // namespace

std::vector<ValidationCase> default_validation_cases() {
  const GemmDims dims[] = {{16, 64, 16}, {32, 256, 32}, {8, 1024, 8}};
  const double moments[][2] = {{0.0, 1e-2}, {1e-3, 1e-2}, {1e-3, 0.0}};
  std::vector<ValidationCase> cases;
  for (const auto& d : dims) {
    for (const auto& mo : moments) cases.push_back({d, mo[0], mo[1]});
  }
  return cases;
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.network = default_toy_descriptor();
  c.validate_cases = default_validation_cases();
  return c;
}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c = defaults();
  if (!j.is_object()) throw DomainError("run configuration must be a JSON object");
  try {
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    if (j.contains("multiplier")) c.multiplier = multiplier_from_json(j.at("multiplier"));
    if (j.contains("multipliers")) {
      for (const auto& m : j.at("multipliers")) c.multipliers.push_back(multiplier_from_json(m));
    }
    if (j.contains("distribution")) c.distribution = distribution_from_json(j.at("distribution"));
    read_opt(j, "samples", c.samples);
    if (j.contains("moments")) c.moments = moments_from_json(j.at("moments")).moments;
    if (j.contains("per_layer_moments")) {
      for (const auto& m : j.at("per_layer_moments")) {
        c.per_layer_moments.push_back(moments_from_json(m).moments);
      }
    }
    if (j.contains("dims")) c.dims = dims_from(j.at("dims"));
    if (j.contains("network")) c.network = network_from_json(j.at("network"));
    if (j.contains("inverse_view")) {
      const Json& v = j.at("inverse_view");
      read_opt(v, "cap", c.inverse_view.cap);
      read_opt(v, "scale", c.inverse_view.scale);
    }
    if (j.contains("validate")) {
      const Json& v = j.at("validate");
      read_opt(v, "trials", c.validate.trials);
      read_opt(v, "relative_tolerance", c.validate.relative_tolerance);
      read_opt(v, "z", c.validate.z);
      if (v.contains("cases")) {
        c.validate_cases.clear();
        for (const auto& cj : v.at("cases")) {
          c.validate_cases.push_back(
              {dims_from(cj.at("dims")), cj.value("mu", 0.0), cj.value("sigma", 0.0)});
        }
      }
    }
    if (j.contains("grid")) {
      const Json& g = j.at("grid");
      if (g.is_string()) {
        c.grid_name = g.get<std::string>();
        if (c.grid_name != "toy" && c.grid_name != "imagenet") {
          throw DomainError("grid preset must be 'toy' or 'imagenet'");
        }
      } else {
        SweepGrid grid;
        grid.mu_values = g.at("mu").get<std::vector<double>>();
        grid.sigma_values = g.at("sigma").get<std::vector<double>>();
        grid.trials_per_point = g.value("trials", std::size_t{1});
        grid.validate();
        c.grid = grid;
      }
    }
    if (j.contains("toy")) {
      const Json& t = j.at("toy");
      if (t.contains("model_dir")) c.toy.model_dir = t.at("model_dir").get<std::string>();
      read_opt(t, "eval_images", c.toy.eval_images);
      read_opt(t, "eval_batch", c.toy.eval_batch);
      if (t.contains("train")) {
        const Json& tr = t.at("train");
        read_opt(tr, "epochs", c.toy.train.epochs);
        read_opt(tr, "learning_rate", c.toy.train.learning_rate);
        read_opt(tr, "momentum", c.toy.train.momentum);
        read_opt(tr, "batch_size", c.toy.train.batch_size);
        read_opt(tr, "seed", c.toy.train.seed);
        read_opt(tr, "train_size", c.toy.train.train_size);
        read_opt(tr, "test_size", c.toy.train.test_size);
        read_opt(tr, "accuracy_gate", c.toy.train.accuracy_gate);
      }
    }
    if (j.contains("rank")) {
      read_opt(j.at("rank"), "samples", c.rank_samples);
      read_opt(j.at("rank"), "tie_tolerance", c.rank_tie_tolerance);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("run configuration: ") + e.what());
  }
  if (c.toy.eval_images == 0 || c.toy.eval_images > c.toy.train.test_size) {
    throw DomainError("toy.eval_images must be in [1, train.test_size]");
  }
  return c;
}

Json RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["multiplier"] = axnorm::to_json(multiplier);
  j["multipliers"] = Json::array();
  for (const auto& m : rank_models()) j["multipliers"].push_back(axnorm::to_json(m));
  j["distribution"] = axnorm::to_json(distribution);
  j["samples"] = samples;
  if (moments) j["moments"] = axnorm::to_json(*moments);
  if (dims) j["dims"] = dims_json(*dims);
  j["network"] = axnorm::to_json(network);
  j["inverse_view"] = {{"cap", inverse_view.cap}, {"scale", inverse_view.scale}};
  Json v;
  v["trials"] = validate.trials;
  v["relative_tolerance"] = validate.relative_tolerance;
  v["z"] = validate.z;
  v["cases"] = Json::array();
  for (const auto& vc : validate_cases) {
    v["cases"].push_back({{"dims", dims_json(vc.dims)}, {"mu", vc.mu}, {"sigma", vc.sigma}});
  }
  j["validate"] = v;
  const SweepGrid g = sweep_grid();
  j["grid"] = {{"mu", g.mu_values}, {"sigma", g.sigma_values}, {"trials", g.trials_per_point}};
  Json t;
  if (toy.model_dir) t["model_dir"] = toy.model_dir->string();
  t["eval_images"] = toy.eval_images;
  t["eval_batch"] = toy.eval_batch;
  t["train"] = {{"epochs", toy.train.epochs},
                {"learning_rate", toy.train.learning_rate},
                {"momentum", toy.train.momentum},
                {"batch_size", toy.train.batch_size},
                {"seed", toy.train.seed},
                {"train_size", toy.train.train_size},
                {"test_size", toy.train.test_size},
                {"accuracy_gate", toy.train.accuracy_gate}};
  j["toy"] = t;
  j["rank"] = {{"samples", rank_samples}, {"tie_tolerance", rank_tie_tolerance}};
  return j;
}

SweepGrid RunConfig::sweep_grid() const {
  if (grid) return *grid;
  return grid_name == "imagenet" ? imagenet_range_grid() : toy_preset_grid();
}

std::vector<MultiplierModel> RunConfig::rank_models() const {
  if (!multipliers.empty()) return multipliers;
  std::vector<MultiplierModel> codes;
  for (int code = 0; code < 16; ++code) codes.push_back(MultiplierModel::mbm(code));
  return codes;
}

TrainedToy obtain_toy_model(const ToySettings& settings) {
  if (settings.model_dir && std::filesystem::exists(*settings.model_dir / "model.json")) {
    TrainedToy t;
    t.model = load_toy_model(*settings.model_dir);
    const LabeledImages test = synthetic_patterns(settings.train.test_size, settings.train.seed,
                                                  kHeldOutFirstIndex);
    t.test_accuracy = top1_accuracy(forward_exact(t.model, test.images), test.labels);
    return t;
  }
  TrainedToy t = train_default_toy(settings.train);
  if (settings.model_dir) save_toy_model(t.model, *settings.model_dir);
  return t;
}

LabeledImages toy_eval_set(const ToySettings& settings) {
  return synthetic_patterns(settings.eval_images, settings.train.seed, kHeldOutFirstIndex);
}

}  // namespace axnorm
