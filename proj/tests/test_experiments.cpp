#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "axnorm/errors.hpp"
#include "axnorm/experiments.hpp"
#include "axnorm/stats.hpp"

using namespace axnorm;
namespace fs = std::filesystem;

namespace {

const TrainedToy& small_toy() {
  static const TrainedToy toy = [] {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.train_size = 960;
    cfg.test_size = 100;
    cfg.accuracy_gate = 0.0;
    return train_default_toy(cfg);
  }();
  return toy;
}

LabeledImages eval_images(std::size_t n) { return synthetic_patterns(n, 1, 1u << 30); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Grids, Presets) {
  const auto wide = imagenet_range_grid();
  ASSERT_EQ(wide.mu_values.size(), 6u);
  ASSERT_EQ(wide.sigma_values.size(), 6u);
  EXPECT_EQ(wide.mu_values.front(), 0.0);
  EXPECT_DOUBLE_EQ(wide.mu_values.back(), 3e-5);
  EXPECT_DOUBLE_EQ(wide.sigma_values.back(), 2e-3);
  const auto toy = toy_preset_grid();
  EXPECT_EQ(toy.mu_values.size(), 6u);
  EXPECT_EQ(toy.sigma_values.size(), 6u);
  EXPECT_NO_THROW(toy.validate());
}

TEST(Grids, Validation) {
  EXPECT_THROW((SweepGrid{{}, {0.0}, 1}.validate()), DomainError);
  EXPECT_THROW((SweepGrid{{0.0}, {0.0}, 0}.validate()), DomainError);
  EXPECT_THROW((SweepGrid{{NAN}, {0.0}, 1}.validate()), DomainError);
  EXPECT_THROW((SweepGrid{{0.0}, {-1.0}, 1}.validate()), DomainError);
}

TEST(RunSweep, ZeroPointEqualsBaseline) {
  const auto r = run_sweep(small_toy().model, eval_images(40), {{0.0}, {0.0}, 1});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].predicted_accumulated, 0.0);
  EXPECT_EQ(r.rows[0].measured_mean_frob_sq, 0.0);
  EXPECT_EQ(r.rows[0].toy_accuracy, r.baseline_accuracy);
}

TEST(RunSweep, UntrainedModelIsPreconditionError) {
  ToyModel empty;
  empty.descriptor = default_toy_descriptor();
  EXPECT_THROW(run_sweep(empty, eval_images(4), {{0.0}, {0.0}, 1}), PreconditionError);
}

TEST(RunSweep, BitIdenticalRerunsAndThreadCounts) {
  const SweepGrid g{{0.0, 5e-3}, {0.0, 0.1}, 2};
  const auto eval = eval_images(30);
  const auto a = sweep_to_csv(run_sweep(small_toy().model, eval, g, {1, 9, 10}));
  EXPECT_EQ(a, sweep_to_csv(run_sweep(small_toy().model, eval, g, {1, 9, 10})));
  EXPECT_EQ(a, sweep_to_csv(run_sweep(small_toy().model, eval, g, {3, 9, 10})));
  EXPECT_NE(a, sweep_to_csv(run_sweep(small_toy().model, eval, g, {1, 10, 10})));
}

TEST(RunSweep, EvalBatchOnlyAffectsRounding) {
  const SweepGrid g{{5e-3}, {0.1}, 1};
  const auto eval = eval_images(30);
  const auto a = run_sweep(small_toy().model, eval, g, {1, 9, 10});
  const auto b = run_sweep(small_toy().model, eval, g, {1, 9, 7});
  EXPECT_EQ(a.rows[0].toy_accuracy, b.rows[0].toy_accuracy);
  EXPECT_NEAR(a.rows[0].measured_mean_frob_sq, b.rows[0].measured_mean_frob_sq,
              1e-12 * a.rows[0].measured_mean_frob_sq);
}

TEST(RunSweep, PredictionIsTheNetworkClosedForm) {
  const SweepGrid g{{1e-3}, {2e-2}, 1};
  const auto r = run_sweep(small_toy().model, eval_images(10), g);
  const auto want = predict_network(small_toy().model.descriptor, ErrorMoments::from(1e-3, 2e-2, 1));
  EXPECT_EQ(r.rows[0].predicted_accumulated, want.accumulated);
  EXPECT_GT(r.rows[0].measured_mean_frob_sq, 0.0);
}

TEST(SweepCsv, RoundTrip) {
  const auto r = run_sweep(small_toy().model, eval_images(10), {{0.0, 1e-3}, {0.0, 1e-2, 2e-2}, 1});
  const auto back = sweep_from_csv(sweep_to_csv(r));
  EXPECT_EQ(back.mu_count, 2u);
  EXPECT_EQ(back.sigma_count, 3u);
  EXPECT_EQ(sweep_to_csv(back), sweep_to_csv(r));
  EXPECT_THROW(sweep_from_csv("nope\n"), IoError);
}

TEST(EmitPlotdata, SingleCellGrid) {
  const auto r = run_sweep(small_toy().model, eval_images(10), {{0.0}, {0.0}, 1});
  const auto dir = scratch("axnorm_plot_single");
  emit_plotdata(r, dir);
  for (const char* f : {"accuracy_surface.csv", "accumulated_norm_surface.csv",
                        "inverse_capped_surface.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto inv = slurp(dir / "inverse_capped_surface.csv");
  EXPECT_NE(inv.find(",10\n"), std::string::npos) << inv;  // zero distortion maps to the cap
  const auto manifest = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_TRUE(manifest.contains("global_seed"));
  EXPECT_TRUE(manifest.contains("trial_seeds"));
  fs::remove_all(dir);
}

TEST(EmitPlotdata, EmptyAndUnwritable) {
  EXPECT_THROW(emit_plotdata(SweepResult{}, scratch("axnorm_plot_empty")), PreconditionError);
  const auto r = run_sweep(small_toy().model, eval_images(4), {{0.0}, {0.0}, 1});
  EXPECT_THROW(emit_plotdata(r, "/proc/axnorm_cannot_write_here"), IoError);
}

TEST(EmitPlotdata, CappedInverseNeverExceedsCap) {
  SweepResult r;
  r.mu_count = 6;
  r.sigma_count = 6;
  for (int i = 0; i < 36; ++i) r.rows.push_back({0, 0, i * 0.02, 0, 1});
  const auto dir = scratch("axnorm_plot_cap");
  emit_plotdata(r, dir, {10.0, 1.0});
  std::stringstream ss(slurp(dir / "inverse_capped_surface.csv"));
  std::string line;
  std::getline(ss, line);  // header
  int cells = 0;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // row label
    while (std::getline(ls, cell, ',')) {
      EXPECT_LE(std::stod(cell), 10.0);
      ++cells;
    }
  }
  EXPECT_EQ(cells, 36);
  fs::remove_all(dir);
}

TEST(RankMultipliers, ExactRanksFirst) {
  RankOptions opts;
  opts.characterization_samples = 4096;
  const auto t = rank_multipliers({MultiplierModel::synthetic_normal(5e-2, 0.0), MultiplierModel::exact()},
                                  default_operand_distribution(), small_toy().model, eval_images(60), opts);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_TRUE(t.rows[0].model.is_exact());
  EXPECT_EQ(t.rows[0].predicted, 0.0);
  EXPECT_GT(t.rows[1].predicted, 0.0);
  EXPECT_GE(t.rows[0].toy_accuracy, t.rows[1].toy_accuracy);
  EXPECT_LE(t.rows[0].predicted, t.rows[1].predicted);
}

TEST(RankMultipliers, DeterministicAndNeedsTwoModels) {
  RankOptions opts;
  opts.characterization_samples = 4096;
  const std::vector<MultiplierModel> ms{MultiplierModel::mbm(2), MultiplierModel::mbm(7), MultiplierModel::mitchell()};
  const auto eval = eval_images(12);
  const auto a = ranking_to_csv(rank_multipliers(ms, default_operand_distribution(), small_toy().model, eval, opts));
  opts.experiment.threads = 3;
  EXPECT_EQ(a, ranking_to_csv(rank_multipliers(ms, default_operand_distribution(), small_toy().model, eval, opts)));
  EXPECT_THROW(rank_multipliers({MultiplierModel::exact()}, default_operand_distribution(),
                                small_toy().model, eval, opts),
               DomainError);
}

TEST(ValidateFormula, ZeroCase) {
  const auto rep = validate_formula({{{4, 8, 4}, 0.0, 0.0}}, {30});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].predicted, 0.0);
  EXPECT_EQ(rep.rows[0].empirical_mean, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(ValidateFormula, SmallGemmWithinFivePercent) {
  const auto rep = validate_formula({{{16, 64, 16}, 1e-3, 1e-2}}, {200, 3});
  EXPECT_LE(std::fabs(rep.rows[0].relative_error), 0.05);
  EXPECT_TRUE(rep.pass);
}

TEST(ValidateFormula, SingleProductUnitVariance) {
  const auto rep = validate_formula({{{1, 1, 1}, 0.0, 1.0}}, {10000, 5});
  const auto& r = rep.rows[0];
  EXPECT_EQ(r.predicted, 1.0);
  EXPECT_LE(std::fabs(r.empirical_mean - 1.0), 3.0 * r.empirical_stderr);
}

TEST(ValidateFormula, TooFewTrials) {
  EXPECT_THROW(validate_formula({{{1, 1, 1}, 0.0, 1.0}}, {29}), DomainError);
}

TEST(ValidateFormula, CsvHasOneRowPerCase) {
  const auto rep = validate_formula({{{2, 2, 2}, 0.0, 0.1}, {{2, 3, 2}, 0.01, 0.0}}, {30});
  const auto csv = validation_to_csv(rep);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
