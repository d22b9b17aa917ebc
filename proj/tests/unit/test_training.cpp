#include "doctest.h"

#include "efbench/training.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <limits>

using namespace efbench;

namespace {

/// Replays a fixed validation curve; "parameters" are the epoch number.
class Scripted final : public Trainable {
  public:
    explicit Scripted(std::vector<double> curve) : curve_(std::move(curve)) {}

    double train_epoch(int epoch) override {
        current_ = epoch;
        return 1.0;
    }
    double validation_loss() override { return curve_.at(static_cast<std::size_t>(current_ - 1)); }
    void keep_best() override { saved_ = current_; }
    void restore_best() override { current_ = saved_; }

    int current_ = 0, saved_ = 0;

  private:
    std::vector<double> curve_;
};

}  // namespace

TEST_CASE("early stopping on the crafted curve") {
    Scripted s({5, 4, 3, 3.1, 3.2, 3.3, 3.4, 3.5, 1.0, 1.0});
    const auto h = run_training(s, {200, 5, 1e-9});
    CHECK(h.epochs_run == 8);
    CHECK(h.best_epoch == 3);
    CHECK(h.best_validation == 3.0);
    CHECK(h.stopped_early);
    CHECK(s.current_ == 3);
}

TEST_CASE("strictly decreasing curve runs to the cap") {
    std::vector<double> curve;
    for (int i = 0; i < 30; ++i) curve.push_back(10.0 - 0.1 * i);
    Scripted s(curve);
    const auto h = run_training(s, {30, 5, 1e-9});
    CHECK(h.epochs_run == 30);
    CHECK(h.best_epoch == 30);
    CHECK_FALSE(h.stopped_early);
}

TEST_CASE("an improvement resets the patience counter") {
    Scripted s({5, 5, 5, 5, 5, 4, 4, 4, 4, 4, 4, 0.5});
    const auto h = run_training(s, {200, 5, 1e-9});
    CHECK(h.best_epoch == 6);
    CHECK(h.epochs_run == 11);
    CHECK(s.current_ == 6);
}

TEST_CASE("changes within the tolerance are not improvements") {
    Scripted s({2.0, 2.0 - 1e-10, 2.0 - 2e-10, 2.0, 2.0, 2.0});
    const auto h = run_training(s, {200, 5, 1e-9});
    CHECK(h.best_epoch == 1);
    CHECK(h.epochs_run == 6);
}

TEST_CASE("non-finite validation loss aborts the run") {
    Scripted s({3.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(run_training(s, {200, 5, 1e-9}), TrainingDiverged);
}

TEST_CASE("strided subset") {
    CHECK(strided_subset(10, 0).size() == 10);
    CHECK(strided_subset(10, 4) == std::vector<Eigen::Index>{0, 2, 5, 7});
    CHECK(strided_subset(3, 5).size() == 3);
}

TEST_CASE("network training improves validation loss and keeps the best epoch") {
    const auto data = efbench::testing::synthetic_dataset(24 * 60, 2);
    TrainData d{data.gather_inputs(data.indices(Split::Train)), data.gather_targets(data.indices(Split::Train)),
                data.gather_inputs(data.indices(Split::Validation)),
                data.gather_targets(data.indices(Split::Validation))};
    auto cfg = default_config(Architecture::MLP);
    cfg.optimizer.kind = OptimizerKind::Adam;
    cfg.optimizer.learning_rate = 3e-3;
    cfg.epoch_cap = 15;
    cfg.seed = 1;
    auto net = make_network(cfg);
    const double before = loss_value(net->predict(d.validation_inputs), d.validation_targets, cfg.loss);
    const auto r = train_network(*net, d);
    CHECK(r.history.epochs_run <= 15);
    CHECK(r.history.best_validation < before);
    const double after = loss_value(net->predict(d.validation_inputs), d.validation_targets, cfg.loss);
    CHECK(after == r.history.best_validation);
    CHECK(r.history.best_validation ==
          *std::min_element(r.history.validation_loss.begin(), r.history.validation_loss.end()));

    auto again = make_network(cfg);
    CHECK(train_network(*again, d).history.validation_loss == r.history.validation_loss);
}

TEST_CASE("divergent learning rate is reported") {
    const auto data = efbench::testing::synthetic_dataset(24 * 40, 2);
    TrainData d{data.gather_inputs(data.indices(Split::Train)), data.gather_targets(data.indices(Split::Train)),
                data.gather_inputs(data.indices(Split::Validation)),
                data.gather_targets(data.indices(Split::Validation))};
    auto cfg = default_config(Architecture::MLP);
    cfg.optimizer.learning_rate = 1e6;
    cfg.epoch_cap = 20;
    auto net = make_network(cfg);
    CHECK_THROWS_AS(train_network(*net, d), TrainingDiverged);
}
