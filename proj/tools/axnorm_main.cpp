// axnorm: command-line front end for multiplier characterization, distortion
// prediction, Monte Carlo validation, toy-network sweeps and ranking.
//
// Exit codes: 0 success, 1 validation failure (or a failed run), 2 usage or
// configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "axnorm/errors.hpp"
#include "axnorm/experiments.hpp"
#include "axnorm/run_config.hpp"
#include "axnorm/stats.hpp"

namespace fs = std::filesystem;
using namespace axnorm;

namespace {

constexpr int kExitValidationFailure = 1;
constexpr int kExitUsage = 2;

class PhaseTimer {
 public:
  explicit PhaseTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::fprintf(stderr, "[time] %-14s %.3f s\n", name_.c_str(), s);
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

// "exact", "mitchell", "mbm:<code>", "normal:<mu>:<sigma>"
MultiplierModel parse_multiplier(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw DomainError("bad multiplier spec '" + text + "'");
    }
  };
  if (parts.size() == 1 && parts[0] == "exact") return MultiplierModel::exact();
  if (parts.size() == 1 && parts[0] == "mitchell") return MultiplierModel::mitchell();
  if (parts.size() == 2 && parts[0] == "mbm") return MultiplierModel::mbm(static_cast<int>(num(1)));
  if (parts.size() == 3 && parts[0] == "normal") {
    return MultiplierModel::synthetic_normal(num(1), num(2));
  }
  throw DomainError("bad multiplier spec '" + text +
                    "' (expected exact, mitchell, mbm:<code> or normal:<mu>:<sigma>)");
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<unsigned> threads;
};

RunConfig load_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig::defaults()
                                        : RunConfig::from_json(read_json_file(g.config_path));
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (cfg.threads == 0) throw DomainError("--threads must be at least 1");
  return cfg;
}

ExperimentOptions experiment_options(const RunConfig& cfg) {
  return {cfg.threads, cfg.seed, cfg.toy.eval_batch};
}

void print_prediction(const NetworkDistortionReport& r) {
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
    const auto& e = r.per_layer[l];
    std::printf("%-10s n=%zu m=%zu p=%zu  E||E||^2=%s  (%s-dominated)\n",
                r.layer_names[l].c_str(), e.dims.n, e.dims.m, e.dims.p,
                format_double(e.total).c_str(), e.bias_dominated ? "bias" : "variance");
  }
  std::printf("accumulated %s  inverse view %s\n", format_double(r.accumulated).c_str(),
              format_double(r.inverse_scaled).c_str());
}

TrainedToy toy_model(const RunConfig& cfg) {
  PhaseTimer t("toy model");
  TrainedToy toy = obtain_toy_model(cfg.toy);
  std::fprintf(stderr, "toy model held-out accuracy %.4f\n", toy.test_accuracy);
  return toy;
}

SweepResult sweep(const RunConfig& cfg) {
  const TrainedToy toy = toy_model(cfg);
  const LabeledImages eval = toy_eval_set(cfg.toy);
  PhaseTimer t("sweep");
  SweepResult r = run_sweep(toy.model, eval, cfg.sweep_grid(), experiment_options(cfg));
  r.manifest["config"] = cfg.to_json();
  return r;
}

RankedMultiplierTable rank(const RunConfig& cfg) {
  const TrainedToy toy = toy_model(cfg);
  const LabeledImages eval = toy_eval_set(cfg.toy);
  PhaseTimer t("rank");
  RankOptions opts;
  opts.experiment = experiment_options(cfg);
  opts.characterization_samples = cfg.rank_samples;
  opts.tie_tolerance = cfg.rank_tie_tolerance;
  RankedMultiplierTable table =
      rank_multipliers(cfg.rank_models(), cfg.distribution, toy.model, eval, opts);
  table.manifest["config"] = cfg.to_json();
  return table;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "axnorm: predict how approximate-multiplier error accumulates through matrix products "
      "and neural network layers.\n"
      "Spearman correlations use average ranks for ties; ranking additionally treats "
      "distortions within rank.tie_tolerance (relative) as tied."};
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed (overrides the config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads; results do not depend on it");

  auto* c_char = app.add_subcommand("characterize", "estimate error mean and deviation of a multiplier");
  std::string mul_spec;
  std::optional<std::uint64_t> samples;
  c_char->add_option("--multiplier", mul_spec, "exact | mitchell | mbm:<code> | normal:<mu>:<sigma>");
  c_char->add_option("--samples", samples, "operand pairs to sample");

  auto* c_pred = app.add_subcommand("predict", "closed-form distortion of a GEMM or a network");
  std::optional<double> p_mu, p_sigma;
  std::vector<std::size_t> p_dims;
  std::string p_moments, p_network;
  c_pred->add_option("--mu", p_mu, "error mean");
  c_pred->add_option("--sigma", p_sigma, "error standard deviation");
  c_pred->add_option("--moments", p_moments, "moments.json written by characterize")
      ->check(CLI::ExistingFile);
  c_pred->add_option("--dims", p_dims, "single GEMM: n m p")->expected(3);
  c_pred->add_option("--network", p_network, "network descriptor JSON (default: toy CNN)")
      ->check(CLI::ExistingFile);

  auto* c_val = app.add_subcommand("validate", "Monte Carlo check of the closed form");
  std::optional<std::size_t> v_trials;
  c_val->add_option("--trials", v_trials, "random GEMMs per case (>= 30)");

  auto* c_sweep = app.add_subcommand("sweep", "(mu, sigma) injection sweep on the toy CNN");
  std::string s_grid;
  c_sweep->add_option("--grid", s_grid, "toy | imagenet")->check(CLI::IsMember({"toy", "imagenet"}));

  auto* c_rank = app.add_subcommand("rank", "characterize, predict and measure a set of multipliers");
  std::vector<std::string> r_models;
  c_rank->add_option("--multiplier", r_models, "repeatable; default MBM codes 0..15");

  auto* c_plot = app.add_subcommand("plotdata", "emit surface/series CSVs and a run manifest");
  std::string pl_input;
  bool pl_rank = false;
  c_plot->add_option("--input", pl_input, "existing sweep.csv (otherwise the sweep is run)")
      ->check(CLI::ExistingFile);
  c_plot->add_flag("--rank", pl_rank, "run the ranking instead of the sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = load_config(g);
    const fs::path out = g.out;
    fs::create_directories(out);

    if (*c_char) {
      if (!mul_spec.empty()) cfg.multiplier = parse_multiplier(mul_spec);
      if (samples) cfg.samples = *samples;
      const OperandDistribution dist{cfg.distribution.kind, cfg.seed};
      ErrorMoments m;
      {
        PhaseTimer t("characterize");
        m = characterize(cfg.multiplier, dist, cfg.samples, {cfg.threads, {}});
      }
      Json j = to_json(m, dist);
      j["model"] = to_json(cfg.multiplier);
      write_text_file(out / "moments.json", j.dump(2) + "\n");
      std::printf("%s mu=%s sigma=%s n=%llu\n", cfg.multiplier.label().c_str(),
                  format_double(m.mu).c_str(), format_double(m.sigma).c_str(),
                  static_cast<unsigned long long>(m.sample_count));
    } else if (*c_pred) {
      if (!p_moments.empty()) cfg.moments = moments_from_json(read_json_file(p_moments)).moments;
      if (p_mu || p_sigma) {
        cfg.moments = ErrorMoments::from(p_mu.value_or(0.0), p_sigma.value_or(0.0), 1);
      }
      if (!cfg.moments) throw DomainError("predict needs --mu/--sigma, --moments or config moments");
      if (!p_dims.empty()) {
        GemmDims d{p_dims[0], p_dims[1], p_dims[2]};
        d.validate();
        cfg.dims = d;
      }
      if (!p_network.empty()) cfg.network = network_from_json(read_json_file(p_network));
      NetworkDistortionReport r;
      {
        PhaseTimer t("predict");
        if (cfg.dims) {
          const GemmDims layers[] = {*cfg.dims};
          r = predict_layers(layers, *cfg.moments, cfg.inverse_view);
          r.layer_names = {"gemm"};
        } else {
          r = predict_network(cfg.network, *cfg.moments, cfg.inverse_view, cfg.per_layer_moments);
        }
        r = lipschitz_bound_note(r);
      }
      write_text_file(out / "prediction.json", to_json(r).dump(2) + "\n");
      write_text_file(out / "prediction.csv", report_to_csv(r));
      print_prediction(r);
    } else if (*c_val) {
      if (v_trials) cfg.validate.trials = *v_trials;
      ValidateOptions opts = cfg.validate;
      opts.seed = cfg.seed;
      opts.threads = cfg.threads;
      ValidationReport rep;
      {
        PhaseTimer t("validate");
        rep = validate_formula(cfg.validate_cases, opts);
      }
      write_text_file(out / "validation.csv", validation_to_csv(rep));
      for (const auto& row : rep.rows) {
        std::printf("n=%zu m=%zu p=%zu mu=%g sigma=%g  predicted=%.6g empirical=%.6g rel=%+.4f z=%+.2f %s\n",
                    row.spec.dims.n, row.spec.dims.m, row.spec.dims.p, row.spec.mu, row.spec.sigma,
                    row.predicted, row.empirical_mean, row.relative_error, row.z_score,
                    row.pass ? "PASS" : "FAIL");
      }
      std::printf("validation %s\n", rep.pass ? "PASS" : "FAIL");
      if (!rep.pass) return kExitValidationFailure;
    } else if (*c_sweep) {
      if (!s_grid.empty()) {
        cfg.grid.reset();
        cfg.grid_name = s_grid;
      }
      const SweepResult r = sweep(cfg);
      write_text_file(out / "sweep.csv", sweep_to_csv(r));
      write_text_file(out / "sweep_manifest.json", r.manifest.dump(2) + "\n");
      std::vector<double> pred, acc;
      for (const auto& row : r.rows) {
        pred.push_back(row.predicted_accumulated);
        acc.push_back(row.toy_accuracy);
      }
      const auto rho = spearman(pred, acc);
      std::printf("baseline accuracy %.4f  spearman(predicted, accuracy) %s\n",
                  r.baseline_accuracy, rho ? format_double(*rho).c_str() : "degenerate");
    } else if (*c_rank) {
      if (!r_models.empty()) {
        cfg.multipliers.clear();
        for (const auto& s : r_models) cfg.multipliers.push_back(parse_multiplier(s));
      }
      const RankedMultiplierTable table = rank(cfg);
      write_text_file(out / "ranking.csv", ranking_to_csv(table));
      write_text_file(out / "ranking_manifest.json", table.manifest.dump(2) + "\n");
      for (const auto& row : table.rows) {
        std::printf("%-22s mu=%+.4e sigma=%.4e predicted=%.6g measured=%.6g acc=%.4f\n",
                    row.model.label().c_str(), row.moments.mu, row.moments.sigma, row.predicted,
                    row.measured_mean_frob_sq, row.toy_accuracy);
      }
      auto show = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("degenerate");
      };
      std::printf("spearman(predicted, accuracy) %s\nspearman(predicted, measured) %s\n",
                  show(table.spearman_pred_vs_acc).c_str(),
                  show(table.spearman_pred_vs_measured).c_str());
    } else if (*c_plot) {
      PhaseTimer t("plotdata");
      if (pl_rank) {
        emit_plotdata(rank(cfg), out, cfg.inverse_view);
      } else if (!pl_input.empty()) {
        emit_plotdata(sweep_from_csv(read_text(pl_input)), out, cfg.inverse_view);
      } else {
        emit_plotdata(sweep(cfg), out, cfg.inverse_view);
      }
      std::printf("plot data written to %s\n", out.string().c_str());
    }
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
