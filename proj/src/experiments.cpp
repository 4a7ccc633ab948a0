#include "axnorm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "axnorm/errors.hpp"
#include "axnorm/matrix.hpp"
#include "axnorm/noise.hpp"
#include "axnorm/parallel.hpp"
#include "axnorm/stats.hpp"

namespace axnorm {

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

Json values_json(const std::vector<double>& v) {
  Json j = Json::array();
  for (double x : v) j.push_back(x);
  return j;
}

void require_trained(const ToyModel& model) {
  if (model.weights.empty()) throw PreconditionError("toy model is not trained (no weights)");
  model.validate();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

// Noise seed for (point, trial) of a sweep.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t point, std::uint64_t trial) {
  return derive_seed(derive_seed(seed, point), trial);
}

std::string surface_csv(const SweepResult& r, double SweepRow::*field) {
  std::string out = "mu";
  for (std::size_t s = 0; s < r.sigma_count; ++s) out += ",sigma=" + format_double(r.rows[s].sigma);
  out += '\n';
  for (std::size_t m = 0; m < r.mu_count; ++m) {
    out += format_double(r.rows[m * r.sigma_count].mu);
    for (std::size_t s = 0; s < r.sigma_count; ++s) {
      out += ',' + format_double(r.rows[m * r.sigma_count + s].*field);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

void SweepGrid::validate() const {
  if (mu_values.empty() || sigma_values.empty()) throw DomainError("sweep grid axes must be non-empty");
  if (trials_per_point == 0) throw DomainError("sweep grid needs at least one trial per point");
  for (double v : mu_values) {
    if (!std::isfinite(v)) throw DomainError("sweep grid mu values must be finite");
  }
  for (double v : sigma_values) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("sweep grid sigma values must be finite and >= 0");
  }
}

SweepGrid imagenet_range_grid() { return {linspace(0.0, 3e-5, 6), linspace(0.0, 2e-3, 6), 1}; }

SweepGrid toy_preset_grid() { return {linspace(0.0, 1.5e-2, 6), linspace(0.0, 0.25, 6), 1}; }

EvaluationSummary evaluate_multiplier(const ToyModel& model, const LabeledImages& eval,
                                      const MultiplierModel& multiplier, std::uint64_t noise_seed,
                                      const ExperimentOptions& options) {
  require_trained(model);
  const std::size_t count = eval.labels.size();
  if (count == 0) throw PreconditionError("evaluation set is empty");
  const std::size_t batch = std::max<std::size_t>(1, options.eval_batch);
  const std::size_t batches = (count + batch - 1) / batch;
  const std::size_t layers = model.descriptor.layers.size();

  struct Partial {
    std::size_t hits = 0;
    std::vector<double> frob;
  };
  std::vector<Partial> partial(batches);
  parallel_for(batches, options.threads, [&](std::size_t b) {
    const std::size_t first = b * batch;
    const std::size_t n = std::min(batch, count - first);
    ForwardOptions fo;
    fo.image_offset = first;
    const ForwardResult r = forward(model, eval.images.slice(first, n), multiplier, noise_seed, fo);
    const auto predicted = predict_classes(r.logits);
    Partial p;
    for (std::size_t i = 0; i < n; ++i) p.hits += predicted[i] == eval.labels[first + i];
    p.frob = r.per_layer_frob_sq;
    partial[b] = std::move(p);
  });

  EvaluationSummary s;
  s.layer_frob_sq.assign(layers, 0.0);
  std::size_t hits = 0;
  for (const auto& p : partial) {
    hits += p.hits;
    for (std::size_t l = 0; l < layers; ++l) s.layer_frob_sq[l] += p.frob[l];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : s.layer_frob_sq) v *= inv;
  s.mean_frob_sq = std::accumulate(s.layer_frob_sq.begin(), s.layer_frob_sq.end(), 0.0);
  s.accuracy = static_cast<double>(hits) * inv;
  return s;
}

SweepResult run_sweep(const ToyModel& model, const LabeledImages& eval, const SweepGrid& grid,
                      const ExperimentOptions& options) {
  require_trained(model);
  grid.validate();
  const std::size_t points = grid.mu_values.size() * grid.sigma_values.size();
  const std::size_t trials = grid.trials_per_point;

  SweepResult result;
  result.mu_count = grid.mu_values.size();
  result.sigma_count = grid.sigma_values.size();
  result.baseline_accuracy = top1_accuracy(forward_exact(model, eval.images), eval.labels);

  ExperimentOptions inner = options;
  inner.threads = 1;
  std::vector<EvaluationSummary> runs(points * trials);
  parallel_for(points * trials, options.threads, [&](std::size_t job) {
    const std::size_t point = job / trials;
    const std::size_t trial = job % trials;
    const double mu = grid.mu_values[point / result.sigma_count];
    const double sigma = grid.sigma_values[point % result.sigma_count];
    runs[job] = evaluate_multiplier(model, eval, MultiplierModel::synthetic_normal(mu, sigma),
                                    trial_seed(options.seed, point, trial), inner);
  });

  Json seeds = Json::array();
  for (std::size_t point = 0; point < points; ++point) {
    SweepRow row;
    row.mu = grid.mu_values[point / result.sigma_count];
    row.sigma = grid.sigma_values[point % result.sigma_count];
    row.predicted_accumulated =
        predict_network(model.descriptor, ErrorMoments::from(row.mu, row.sigma, 1)).accumulated;
    double acc = 0.0, frob = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      acc += runs[point * trials + t].accuracy;
      frob += runs[point * trials + t].mean_frob_sq;
      seeds.push_back(trial_seed(options.seed, point, t));
    }
    row.toy_accuracy = acc / static_cast<double>(trials);
    row.measured_mean_frob_sq = frob / static_cast<double>(trials);
    result.rows.push_back(row);
  }

  Json& m = result.manifest;
  m["experiment"] = "sweep";
  m["global_seed"] = options.seed;
  m["mu_values"] = values_json(grid.mu_values);
  m["sigma_values"] = values_json(grid.sigma_values);
  m["trials_per_point"] = trials;
  m["trial_seeds"] = std::move(seeds);
  m["eval_images"] = eval.labels.size();
  m["eval_batch"] = options.eval_batch;
  m["baseline_accuracy"] = result.baseline_accuracy;
  m["network"] = to_json(model.descriptor);
  m["accuracy_metric"] = "top-1";
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "mu,sigma,predicted_accumulated,measured_mean_frob_sq,toy_accuracy\n";
  for (const auto& r : result.rows) {
    out += format_double(r.mu) + ',' + format_double(r.sigma) + ',' +
           format_double(r.predicted_accumulated) + ',' + format_double(r.measured_mean_frob_sq) +
           ',' + format_double(r.toy_accuracy) + '\n';
  }
  return out;
}

SweepResult sweep_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("mu,sigma,", 0) != 0) {
    throw IoError("not a sweep CSV (bad header)");
  }
  SweepResult r;
  std::vector<double> mus, sigmas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const RealMatrix row = matrix_from_csv(line);
    if (row.cols() != 5) throw IoError("sweep CSV row must have 5 columns");
    SweepRow s{row(0, 0), row(0, 1), row(0, 2), row(0, 3), row(0, 4)};
    if (std::find(mus.begin(), mus.end(), s.mu) == mus.end()) mus.push_back(s.mu);
    if (std::find(sigmas.begin(), sigmas.end(), s.sigma) == sigmas.end()) sigmas.push_back(s.sigma);
    r.rows.push_back(s);
  }
  r.mu_count = mus.size();
  r.sigma_count = sigmas.size();
  if (r.rows.size() != r.mu_count * r.sigma_count) throw IoError("sweep CSV is not a full grid");
  r.manifest["experiment"] = "sweep";
  r.manifest["source"] = "csv";
  return r;
}

RankedMultiplierTable rank_multipliers(const std::vector<MultiplierModel>& models,
                                       const OperandDistribution& dist, const ToyModel& model,
                                       const LabeledImages& eval, const RankOptions& options) {
  if (models.size() < 2) throw DomainError("rank_multipliers: need at least two models");
  require_trained(model);
  dist.validate();

  std::vector<RankedRow> rows;
  CharacterizeOptions co;
  co.threads = options.experiment.threads;
  for (std::size_t i = 0; i < models.size(); ++i) {
    RankedRow row;
    row.model = models[i];
    row.moments = characterize(models[i], dist, options.characterization_samples, co);
    row.predicted = predict_network(model.descriptor, row.moments).accumulated;
    const EvaluationSummary s = evaluate_multiplier(model, eval, models[i],
                                                    derive_seed(options.experiment.seed, i),
                                                    options.experiment);
    row.measured_mean_frob_sq = s.mean_frob_sq;
    row.toy_accuracy = s.accuracy;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RankedRow& a, const RankedRow& b) { return a.predicted < b.predicted; });

  RankedMultiplierTable table;
  table.rows = std::move(rows);
  std::vector<double> pred, acc, meas;
  for (const auto& r : table.rows) {
    pred.push_back(r.predicted);
    acc.push_back(r.toy_accuracy);
    meas.push_back(r.measured_mean_frob_sq);
  }
  table.spearman_pred_vs_acc = spearman_with_ties(pred, acc, options.tie_tolerance);
  table.spearman_pred_vs_measured = spearman_with_ties(pred, meas, options.tie_tolerance);

  Json& m = table.manifest;
  m["experiment"] = "rank";
  m["global_seed"] = options.experiment.seed;
  m["distribution"] = to_json(dist);
  m["characterization_samples"] = options.characterization_samples;
  m["tie_tolerance"] = options.tie_tolerance;
  m["eval_images"] = eval.labels.size();
  m["models"] = Json::array();
  for (const auto& mm : models) m["models"].push_back(to_json(mm));
  m["network"] = to_json(model.descriptor);
  return table;
}

std::string ranking_to_csv(const RankedMultiplierTable& table) {
  std::string out =
      "rank,model,mu,sigma,sample_count,predicted,measured_mean_frob_sq,toy_accuracy\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    out += std::to_string(i + 1) + ',' + r.model.label() + ',' + format_double(r.moments.mu) + ',' +
           format_double(r.moments.sigma) + ',' + std::to_string(r.moments.sample_count) + ',' +
           format_double(r.predicted) + ',' + format_double(r.measured_mean_frob_sq) + ',' +
           format_double(r.toy_accuracy) + '\n';
  }
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("degenerate");
  };
  out += "# spearman_pred_vs_acc=" + opt(table.spearman_pred_vs_acc) +
         " spearman_pred_vs_measured=" + opt(table.spearman_pred_vs_measured) + '\n';
  return out;
}

ValidationReport validate_formula(const std::vector<ValidationCase>& cases,
                                  const ValidateOptions& options) {
  if (options.trials < 30) throw DomainError("validate_formula: need at least 30 trials");
  ValidationReport report;
  report.pass = true;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const ValidationCase& vc = cases[c];
    vc.dims.validate();
    const MultiplierModel model = MultiplierModel::synthetic_normal(vc.mu, vc.sigma);
    std::vector<double> frob(options.trials);
    parallel_for(options.trials, options.threads, [&](std::size_t t) {
      const std::uint64_t base = derive_seed(derive_seed(options.seed, c), t);
      const RealMatrix a = RealMatrix::random_uniform(vc.dims.n, vc.dims.m, derive_seed(base, 1));
      const RealMatrix b = RealMatrix::random_uniform(vc.dims.m, vc.dims.p, derive_seed(base, 2));
      const NoisePlan plan{derive_seed(base, 3), 0, 0};
      frob[t] = error_matrix(gemm_exact(a, b), gemm_approx(a, b, model, plan)).stats.frob_sq;
    });
    const MomentAccumulator mom = MomentAccumulator::from_block(frob);

    ValidationRow row;
    row.spec = vc;
    row.predicted = predict_gemm(vc.dims, ErrorMoments::from(vc.mu, vc.sigma, 1)).total;
    row.empirical_mean = mom.mean;
    row.empirical_stderr = mom.sample_stddev() / std::sqrt(static_cast<double>(options.trials));
    const double diff = row.empirical_mean - row.predicted;
    row.relative_error = row.predicted != 0.0 ? diff / row.predicted : (diff == 0.0 ? 0.0 : INFINITY);
    row.z_score = row.empirical_stderr > 0.0 ? diff / row.empirical_stderr
                                             : (diff == 0.0 ? 0.0 : INFINITY);
    const double tol = std::max(options.relative_tolerance * row.predicted,
                                options.z * row.empirical_stderr);
    row.pass = std::fabs(diff) <= tol;
    report.pass = report.pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

std::string validation_to_csv(const ValidationReport& report) {
  std::string out =
      "n,m,p,mu,sigma,predicted,empirical_mean,empirical_stderr,relative_error,z_score,pass\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.spec.dims.n) + ',' + std::to_string(r.spec.dims.m) + ',' +
           std::to_string(r.spec.dims.p) + ',' + format_double(r.spec.mu) + ',' +
           format_double(r.spec.sigma) + ',' + format_double(r.predicted) + ',' +
           format_double(r.empirical_mean) + ',' + format_double(r.empirical_stderr) + ',' +
           format_double(r.relative_error) + ',' + format_double(r.z_score) + ',' +
           (r.pass ? "1" : "0") + '\n';
  }
  return out;
}

void emit_plotdata(const SweepResult& result, const std::filesystem::path& out_dir,
                   const InverseView& view) {
  if (result.rows.empty()) throw PreconditionError("emit_plotdata: empty sweep result");
  ensure_dir(out_dir);
  SweepResult inverse = result;
  for (auto& row : inverse.rows) row.predicted_accumulated = view(row.predicted_accumulated);
  write_text_file(out_dir / "accuracy_surface.csv", surface_csv(result, &SweepRow::toy_accuracy));
  write_text_file(out_dir / "accumulated_norm_surface.csv",
                  surface_csv(result, &SweepRow::predicted_accumulated));
  write_text_file(out_dir / "inverse_capped_surface.csv",
                  surface_csv(inverse, &SweepRow::predicted_accumulated));
  Json manifest = result.manifest;
  manifest["inverse_view"] = {{"cap", view.cap}, {"scale", view.scale}};
  manifest["files"] = {"accuracy_surface.csv", "accumulated_norm_surface.csv",
                       "inverse_capped_surface.csv"};
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void emit_plotdata(const RankedMultiplierTable& table, const std::filesystem::path& out_dir,
                   const InverseView& view) {
  if (table.rows.empty()) throw PreconditionError("emit_plotdata: empty ranking");
  ensure_dir(out_dir);
  std::string acc = "model,toy_accuracy\n", norm = "model,predicted\n", inv = "model,inverse_capped\n";
  for (const auto& r : table.rows) {
    acc += r.model.label() + ',' + format_double(r.toy_accuracy) + '\n';
    norm += r.model.label() + ',' + format_double(r.predicted) + '\n';
    inv += r.model.label() + ',' + format_double(view(r.predicted)) + '\n';
  }
  write_text_file(out_dir / "accuracy_series.csv", acc);
  write_text_file(out_dir / "accumulated_norm_series.csv", norm);
  write_text_file(out_dir / "inverse_capped_series.csv", inv);
  Json manifest = table.manifest;
  manifest["inverse_view"] = {{"cap", view.cap}, {"scale", view.scale}};
  manifest["files"] = {"accuracy_series.csv", "accumulated_norm_series.csv",
                       "inverse_capped_series.csv"};
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace axnorm
