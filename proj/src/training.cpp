#include "efbench/training.hpp"

#include "efbench/optim.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace efbench {

using Index = Eigen::Index;

TrainingHistory run_training(Trainable& model, const StoppingRule& rule) {
    if (rule.epoch_cap < 1) throw std::invalid_argument("epoch_cap must be >= 1");
    if (rule.patience < 1) throw std::invalid_argument("patience must be >= 1");
    TrainingHistory h;
    int stale = 0;
    for (int epoch = 1; epoch <= rule.epoch_cap; ++epoch) {
        const double train = model.train_epoch(epoch);
        if (!std::isfinite(train)) throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch));
        const double val = model.validation_loss();
        if (!std::isfinite(val)) throw TrainingDiverged("validation loss became non-finite at epoch " + std::to_string(epoch));
        h.train_loss.push_back(train);
        h.validation_loss.push_back(val);
        h.epochs_run = epoch;
        if (val < h.best_validation - rule.tolerance) {
            h.best_validation = val;
            h.best_epoch = epoch;
            stale = 0;
            model.keep_best();
        } else if (++stale >= rule.patience) {
            h.stopped_early = true;
            break;
        }
    }
    if (h.best_epoch > 0) model.restore_best();
    return h;
}

std::vector<Index> strided_subset(Index n, Index cap) {
    std::vector<Index> out;
    if (cap <= 0 || cap >= n) {
        out.resize(static_cast<std::size_t>(n));
        std::iota(out.begin(), out.end(), Index{0});
        return out;
    }
    for (Index i = 0; i < cap; ++i) out.push_back(i * n / cap);
    return out;
}

namespace {

Tensor gather(const Tensor& t, const std::vector<Index>& rows) {
    Shape shape = t.shape();
    const Index per = t.size() / shape[0];
    shape[0] = static_cast<Index>(rows.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.vec().segment(Index(i) * per, per) = t.vec().segment(rows[i] * per, per);
    return out;
}

class NetworkTrainable final : public Trainable {
  public:
    NetworkTrainable(NeuralNet& net, const TrainData& data)
        : net_(net), data_(data), cfg_(net.config()), root_(Rng(cfg_.seed).split("train")) {
        rows_ = strided_subset(data.train_inputs.dim(0), cfg_.max_train_samples);
        for (auto& p : net_.parameters()) params_.push_back(&p.value);
    }

    double train_epoch(int epoch) override {
        std::vector<Index> order = rows_;
        Rng shuffle = root_.split("shuffle").split(static_cast<std::uint64_t>(epoch));
        shuffle.shuffle(order);
        Rng dropout = root_.split("dropout").split(static_cast<std::uint64_t>(epoch));
        double total = 0.0;
        Index seen = 0;
        const auto n = static_cast<Index>(order.size());
        for (Index start = 0; start < n; start += cfg_.batch_size) {
            const Index b = std::min<Index>(cfg_.batch_size, n - start);
            const std::vector<Index> batch(order.begin() + start, order.begin() + start + b);
            ad::Tape tape;
            ForwardContext ctx(tape);
            ctx.training = true;
            ctx.rng = &dropout;
            const auto y = net_.forward(ctx, tape.constant(gather(data_.train_inputs, batch)));
            const auto loss = ad::loss(y, gather(data_.train_targets, batch), cfg_.loss);
            const double value = loss.value()[0];
            if (!std::isfinite(value))
                throw TrainingDiverged(std::string(display_name(cfg_.architecture)) + ": loss became non-finite in epoch " +
                                       std::to_string(epoch));
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(ctx.bound.size());
            for (const auto& v : ctx.bound) grads.push_back(tape.grad(v));
            optimizer_step(params_, grads, state_, cfg_.optimizer);
            total += value * double(b);
            seen += b;
        }
        return total / double(seen);
    }

    double validation_loss() override {
        return loss_value(net_.predict(data_.validation_inputs), data_.validation_targets, cfg_.loss);
    }

    void keep_best() override {
        best_.clear();
        for (const auto* p : params_) best_.push_back(*p);
    }

    void restore_best() override {
        for (std::size_t i = 0; i < params_.size(); ++i) *params_[i] = best_[i];
    }

  private:
    NeuralNet& net_;
    const TrainData& data_;
    const ModelConfig& cfg_;
    Rng root_;
    std::vector<Index> rows_;
    std::vector<Tensor*> params_;
    std::vector<Tensor> best_;
    OptimizerState state_;
};

void check_data(const TrainData& d) {
    auto pair_ok = [](const Tensor& x, const Tensor& y) {
        return x.rank() == 3 && y.rank() == 2 && x.dim(0) == y.dim(0) && x.dim(0) > 0 && y.dim(1) == kOutputSteps;
    };
    if (!pair_ok(d.train_inputs, d.train_targets)) throw std::invalid_argument("training split is empty or misshapen");
    if (!pair_ok(d.validation_inputs, d.validation_targets))
        throw std::invalid_argument("validation split is empty or misshapen");
}

}  // namespace

TrainRunResult train_network(NeuralNet& net, const TrainData& data) {
    check_data(data);
    const auto start = std::chrono::steady_clock::now();
    TrainRunResult r;
    r.config = net.config();
    r.parameters = net.parameter_count();
    NetworkTrainable trainable(net, data);
    r.history = run_training(trainable, {net.config().epoch_cap, net.config().patience, 1e-9});
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace efbench
