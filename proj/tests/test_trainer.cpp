// Copyright 2026 The voxid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/testing.hpp"
#include "voxid/errors.hpp"
#include "voxid/evaluator.hpp"
#include "voxid/model.hpp"
#include "voxid/trainer.hpp"

namespace {

namespace tr = voxid::train;
namespace md = voxid::model;
namespace nn = voxid::nn;

std::vector<md::Parameter<double>> scalar_param(double value, double grad) {
  std::vector<md::Parameter<double>> ps;
  ps.push_back({"w", nn::Tensor<double>({1}, {value}, true), true});
  ps[0].value.grad()[0] = grad;
  return ps;
}

std::vector<std::size_t> run_es(const std::vector<double>& losses, std::size_t patience,
                                std::size_t* best = nullptr) {
  tr::EarlyStopping es(patience);
  std::vector<std::size_t> stops;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    if (es.update(e + 1, losses[e]) == tr::StopDecision::kStop) {
      stops.push_back(e + 1);
      break;
    }
  }
  if (best) *best = es.best_epoch();
  return stops;
}

}  // namespace

TEST_CASE("adam step examples") {
  tr::TrainConfig cfg;
  {
    auto ps = scalar_param(0.25, 1.0);
    tr::AdamState<double> st;
    tr::adam_step(ps, st, 1, cfg);
    CHECK(ps[0].value.data()[0] - 0.25 == doctest::Approx(-0.001).epsilon(1e-6));
  }
  {
    // Zero gradients never move parameters.
    auto ps = scalar_param(0.25, 0.0);
    tr::AdamState<double> st;
    for (std::size_t t = 1; t <= 50; ++t) tr::adam_step(ps, st, t, cfg);
    CHECK(ps[0].value.data()[0] == 0.25);
  }
  {
    // Constant gradient: the step size tends to lr with the sign of -g.
    auto ps = scalar_param(0.0, -3.0);
    tr::AdamState<double> st;
    double prev = 0.0;
    double step = 0.0;
    for (std::size_t t = 1; t <= 2000; ++t) {
      ps[0].value.grad()[0] = -3.0;
      tr::adam_step(ps, st, t, cfg);
      step = ps[0].value.data()[0] - prev;
      prev = ps[0].value.data()[0];
    }
    CHECK(step == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
  }
  {
    auto ps = scalar_param(1.0, std::numeric_limits<double>::quiet_NaN());
    tr::AdamState<double> st;
    try {
      tr::adam_step(ps, st, 1, cfg);
      FAIL("expected a numeric error");
    } catch (const voxid::NumericError& e) {
      CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
    CHECK_THROWS_AS(tr::adam_step(ps, st, 0, cfg), voxid::InvalidArgumentError);
  }
  {
    auto ps = scalar_param(1.0, 5.0);
    ps[0].trainable = false;
    tr::AdamState<double> st;
    tr::adam_step(ps, st, 1, cfg);
    CHECK(ps[0].value.data()[0] == 1.0);
  }
}

TEST_CASE("early stopping traces") {
  std::size_t best = 0;
  CHECK(run_es({1.0, 0.9, 0.85, 0.86, 0.87, 0.88, 0.89, 0.90}, 5, &best) ==
        std::vector<std::size_t>{8});
  CHECK(best == 3);
  CHECK(run_es({0.5, 0.6}, 1, &best) == std::vector<std::size_t>{2});
  CHECK(best == 1);
  std::vector<double> down(60);
  for (std::size_t i = 0; i < down.size(); ++i) down[i] = 1.0 / static_cast<double>(i + 1);
  CHECK(run_es(down, 1).empty());
  // Equal loss is not an improvement.
  CHECK(run_es({0.5, 0.5}, 1, &best) == std::vector<std::size_t>{2});
  CHECK(best == 1);
  CHECK_THROWS_AS(tr::EarlyStopping(0), voxid::ConfigError);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t patience = 1 + rng() % 6;
    std::vector<double> losses(30);
    for (auto& l : losses) l = voxid::testing::uniform(rng, 0.0, 1.0);
    const auto stops = run_es(losses, patience);
    if (!stops.empty()) CHECK(stops[0] >= patience + 1);
  }
}

TEST_CASE("train config validation and json") {
  tr::TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.epsilon == 1e-8);
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), voxid::ConfigError);
  cfg = tr::TrainConfig{};
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), voxid::ConfigError);

  tr::TrainConfig custom;
  custom.learning_rate = 0.01;
  custom.batch_size = 7;
  custom.seed = 99;
  CHECK(tr::parse_train_config(tr::serialize_train_config(custom)) == custom);
  CHECK(tr::parse_train_config("{\"patience\": 9}").patience == 9);
  CHECK_THROWS_AS(tr::parse_train_config("[1]"), voxid::ParseError);
}

TEST_CASE("stratified split") {
  std::vector<std::string> speakers;
  for (const char* s : {"b", "a", "c"}) {
    for (int i = 0; i < 10; ++i) speakers.emplace_back(s);
  }
  const auto sp = tr::split_dataset(speakers, {0.8, 0.1, 0.1}, 17);
  auto per = [&](const std::vector<std::size_t>& idx, const std::string& who) {
    return std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return speakers[i] == who; });
  };
  for (const char* s : {"a", "b", "c"}) {
    CHECK(per(sp.train, s) == 8);
    CHECK(per(sp.val, s) == 1);
    CHECK(per(sp.test, s) == 1);
  }
  std::set<std::size_t> all(sp.train.begin(), sp.train.end());
  all.insert(sp.val.begin(), sp.val.end());
  all.insert(sp.test.begin(), sp.test.end());
  CHECK(all.size() == speakers.size());
  CHECK(sp.train.size() + sp.val.size() + sp.test.size() == speakers.size());

  const auto again = tr::split_dataset(speakers, {0.8, 0.1, 0.1}, 17);
  CHECK(again.train == sp.train);
  CHECK(again.test == sp.test);
  const auto other = tr::split_dataset(speakers, {0.8, 0.1, 0.1}, 18);
  CHECK((other.test != sp.test || other.val != sp.val));

  const auto all_train = tr::split_dataset(speakers, {1.0, 0.0, 0.0}, 1);
  CHECK(all_train.train.size() == speakers.size());
  CHECK(all_train.val.empty());

  std::vector<std::string> short_list{"x", "x", "y", "y", "y"};
  try {
    tr::split_dataset(short_list, {0.8, 0.1, 0.1}, 1);
    FAIL("expected a split error");
  } catch (const voxid::ConfigError& e) {
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
  CHECK_THROWS_AS(tr::split_dataset(speakers, {0.5, 0.1, 0.1}, 1), voxid::ConfigError);
}

TEST_CASE("training loop contracts") {
  const auto data = voxid::testing::toy_dataset(4, 4, 16, 40, 1);
  const auto val = voxid::testing::toy_dataset(4, 1, 16, 40, 1);
  tr::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 1;
  cfg.seed = 3;

  md::Network<float> net(md::preset("model-5", 4), 16, 40, 11);
  const auto one = tr::train(net, data, val, cfg);
  CHECK(one.history.size() == 1);
  CHECK(one.history[0].epoch == 1);
  CHECK_FALSE(one.stopped_early);

  cfg.max_epochs = 3;
  auto run = [&] {
    md::Network<float> n(md::preset("model-5", 4), 16, 40, 11);
    auto r = tr::train(n, data, val, cfg);
    return std::make_pair(r, n.export_weights());
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.history.size() == b.first.history.size());
  for (std::size_t i = 0; i < a.first.history.size(); ++i) {
    CHECK(a.first.history[i].train_loss == b.first.history[i].train_loss);
    CHECK(a.first.history[i].val_loss == b.first.history[i].val_loss);
    CHECK(a.first.history[i].val_accuracy == b.first.history[i].val_accuracy);
  }
  CHECK(a.second == b.second);
  for (const auto& r : a.first.history) {
    CHECK(r.train_loss >= 0.0);
    CHECK(r.val_accuracy >= 0.0);
    CHECK(r.val_accuracy <= 1.0);
  }

  voxid::Dataset empty;
  md::Network<float> n2(md::preset("model-5", 4), 16, 40, 11);
  CHECK_THROWS_AS(tr::train(n2, data, empty, cfg), voxid::ConfigError);
}

TEST_CASE("best weights are restored") {
  const auto data = voxid::testing::toy_dataset(3, 4, 16, 40, 2);
  const auto val = voxid::testing::toy_dataset(3, 2, 16, 40, 3, 1.5);
  tr::TrainConfig cfg;
  cfg.batch_size = 6;
  cfg.max_epochs = 6;
  cfg.patience = 2;
  cfg.learning_rate = 0.01;
  md::Network<float> net(md::preset("model-5", 3), 16, 40, 5);
  const auto r = tr::train(net, data, val, cfg);
  const auto best = std::min_element(r.history.begin(), r.history.end(),
                                     [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
  CHECK(r.best_epoch == best->epoch);
  CHECK(r.best_val_loss == best->val_loss);
  // Re-evaluating the restored network reproduces the best epoch's loss.
  const auto p = voxid::eval::predict(net, val);
  CHECK(p.mean_loss == doctest::Approx(best->val_loss).epsilon(1e-6));
}

TEST_CASE("overfit oracle at reduced input size") {
  const auto data = voxid::testing::toy_dataset(4, 2, 16, 40, 8);
  tr::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  md::Network<float> net(md::preset("model-5", 4), 16, 40, 1);
  const auto r = tr::train(net, data, data, cfg);
  CHECK(r.history.size() <= 200);
  const auto p = voxid::eval::predict(net, data);
  CHECK(p.mean_loss < 0.01);
  CHECK(std::equal(p.predicted.begin(), p.predicted.end(), data.labels.begin()));
}
