#include <gtest/gtest.h>

#include "axnorm/errors.hpp"
#include "axnorm/run_config.hpp"

using namespace axnorm;

TEST(RunConfig, Defaults) {
  const auto c = RunConfig::defaults();
  EXPECT_EQ(c.network, default_toy_descriptor());
  EXPECT_EQ(c.validate_cases.size(), 9u);
  EXPECT_EQ(c.rank_models().size(), 16u);
  EXPECT_EQ(c.rank_models()[10], MultiplierModel::mbm(10));
  EXPECT_EQ(c.sweep_grid().mu_values, toy_preset_grid().mu_values);
}

TEST(RunConfig, OverlaysGivenKeys) {
  const auto c = RunConfig::from_json(Json::parse(R"({
    "seed": 17,
    "multiplier": {"kind": "mitchell"},
    "multipliers": [{"kind": "exact"}, {"kind": "mbm", "correction_code": 3}],
    "grid": {"mu": [0, 1e-3], "sigma": [0.1], "trials": 3},
    "validate": {"trials": 50, "cases": [{"dims": [2, 3, 4], "mu": 0.5}]},
    "toy": {"eval_images": 20, "train": {"epochs": 2}},
    "rank": {"tie_tolerance": 0.1}
  })"));
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.multiplier, MultiplierModel::mitchell());
  EXPECT_EQ(c.rank_models().size(), 2u);
  EXPECT_EQ(c.sweep_grid().trials_per_point, 3u);
  EXPECT_EQ(c.validate.trials, 50u);
  ASSERT_EQ(c.validate_cases.size(), 1u);
  EXPECT_EQ(c.validate_cases[0].dims, (GemmDims{2, 3, 4}));
  EXPECT_EQ(c.toy.eval_images, 20u);
  EXPECT_EQ(c.toy.train.epochs, 2u);
  EXPECT_EQ(c.toy.train.batch_size, TrainConfig{}.batch_size);
  EXPECT_EQ(c.rank_tie_tolerance, 0.1);
}

TEST(RunConfig, ImagenetGridPreset) {
  const auto c = RunConfig::from_json(Json::parse(R"({"grid": "imagenet"})"));
  EXPECT_EQ(c.sweep_grid().sigma_values, imagenet_range_grid().sigma_values);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"grid": "huge"})")), DomainError);
}

TEST(RunConfig, RejectsMalformedValues) {
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"([1, 2])")), DomainError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"seed": "abc"})")), DomainError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"dims": [1, 2]})")), DomainError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"toy": {"eval_images": 0}})")), DomainError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"multiplier": {"kind": "mbm", "correction_code": 20}})")),
               DomainError);
}

TEST(RunConfig, ToJsonRoundTrips) {
  auto c = RunConfig::defaults();
  c.seed = 5;
  c.moments = ErrorMoments::from(1e-4, 1e-3, 1);
  const auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
}
