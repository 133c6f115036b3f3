#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qt/optim.hpp"

using namespace qt;

namespace {

struct ScalarProblem {
  Mat<double> p{1, 1};
  Adam<double> adam;

  explicit ScalarProblem(AdamConfig cfg, double p0)
      : adam((p.at(0, 0) = p0, cfg), {{"p", &p, false}}) {}

  void step_on_square() {
    std::vector<Mat<double>> grads;
    grads.emplace_back(1, 1);
    grads[0].at(0, 0) = 2.0 * p.at(0, 0);
    adam.step(grads);
  }
};

}  // namespace

TEST_CASE("adam reproduces the frozen reference trajectory on p^2") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  ScalarProblem prob(cfg, 1.0);
  // 10 steps frozen from an independent reference script.
  const double expected[10] = {
      0.90000000049999995, 0.80041222869179274, 0.70158627294603004, 0.6039390605737458,
      0.50796365926434173, 0.4142364559936616,  0.32342070493910174, 0.2362637245210415,
      0.1535845600703632,  0.076249155606911756};
  for (int t = 0; t < 10; ++t) {
    prob.step_on_square();
    CHECK(prob.p.at(0, 0) == doctest::Approx(expected[t]).epsilon(1e-8));
  }
  CHECK(prob.adam.step_count() == 10);
}

TEST_CASE("zero gradients leave parameters and moments untouched") {
  Rng rng(3);
  Mat<float> p = init<float>(4, 5, InitScheme::kXavierUniform, rng);
  const Mat<float> before = p;
  Adam<float> adam(AdamConfig{}, {{"p", &p, false}});
  std::vector<Mat<float>> grads;
  grads.emplace_back(4, 5);
  adam.step(grads);
  CHECK(p.data == before.data);
  for (float v : adam.first_moments()[0].data) CHECK(v == 0.0f);
  for (float v : adam.second_moments()[0].data) CHECK(v == 0.0f);
}

TEST_CASE("first step magnitude is about lr in the gradient direction") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  ScalarProblem prob(cfg, 1.0);
  prob.step_on_square();
  // Bias-corrected first step is lr * g / (|g| + tiny) = ~lr, downhill.
  CHECK(prob.p.at(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("determinism: identical inputs give bit-identical updates") {
  auto run = [] {
    Rng rng(9);
    Mat<float> p = init<float>(3, 3, InitScheme::kUniform, rng, -1, 1);
    Adam<float> adam(AdamConfig{}, {{"p", &p, false}});
    for (int t = 0; t < 5; ++t) {
      std::vector<Mat<float>> grads;
      grads.push_back(init<float>(3, 3, InitScheme::kUniform, rng, -1, 1));
      adam.step(grads);
    }
    return p.data;
  };
  CHECK(run() == run());
}

TEST_CASE("frozen tensors are bit-identical across any number of steps") {
  Rng rng(4);
  Mat<float> frozen = init<float>(3, 2, InitScheme::kUniform, rng, -1, 1);
  Mat<float> live = init<float>(2, 2, InitScheme::kUniform, rng, -1, 1);
  const Mat<float> frozen_before = frozen;
  Adam<float> adam(AdamConfig{}, {{"frozen", &frozen, true}, {"live", &live, false}});
  for (int t = 0; t < 20; ++t) {
    std::vector<Mat<float>> grads;
    grads.push_back(init<float>(3, 2, InitScheme::kUniform, rng, -1, 1));
    grads.push_back(init<float>(2, 2, InitScheme::kUniform, rng, -1, 1));
    adam.step(grads);
  }
  CHECK(frozen.data == frozen_before.data);
}

TEST_CASE("clipping: inactive below threshold, rescales above") {
  auto one_step = [](double clip, double g0, double g1) {
    Mat<double> p(1, 2);
    p.data = {1.0, 1.0};
    AdamConfig cfg;
    cfg.clip_norm = clip;
    Adam<double> adam(cfg, {{"p", &p, false}});
    std::vector<Mat<double>> grads;
    grads.emplace_back(1, 2);
    grads[0].data = {g0, g1};
    adam.step(grads);
    return p.data;
  };
  // Norm 5 <= threshold 10: identical to the unclipped run.
  CHECK(one_step(10.0, 3.0, 4.0) == one_step(0.0, 3.0, 4.0));
  // Norm 5 > threshold 1: equals the run on the rescaled gradient.
  CHECK(one_step(1.0, 3.0, 4.0) == one_step(0.0, 3.0 / 5.0, 4.0 / 5.0));
}

TEST_CASE("shape and numeric errors abort the step") {
  Mat<double> p(2, 2, 1.0);
  Adam<double> adam(AdamConfig{}, {{"p", &p, false}});

  std::vector<Mat<double>> bad_shape;
  bad_shape.emplace_back(2, 3);
  CHECK_THROWS_AS(adam.step(bad_shape), ShapeError);

  std::vector<Mat<double>> bad_value;
  bad_value.emplace_back(2, 2);
  bad_value[0].at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam.step(bad_value), NumericError);
  // Nothing mutated, step count unchanged.
  for (double v : p.data) CHECK(v == 1.0);
  CHECK(adam.step_count() == 0);

  AdamConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(Adam<double>(bad, {}), ValueError);
}
