#include "efbench/autoencoder.hpp"

#include <stdexcept>

namespace efbench {

using ad::Var;
using Index = Eigen::Index;

namespace {

enum : std::size_t { kConv1W, kConv1B, kConv2W, kConv2B, kDeconv1W, kDeconv1B, kDeconv2W, kDeconv2B };

void check_windows(const Shape& s) {
    if (s.size() != 3 || s[1] != kInputFeatures || s[2] != kInputSteps)
        throw ShapeError("autoencoder: expected input (batch,6,24), got " + shape_str(s));
}

Tensor rows_of(const Tensor& x, Index start, Index count) {
    const Index per = x.size() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = count;
    return Tensor(shape, Tensor::Vector(x.vec().segment(start * per, count * per)));
}

}  // namespace

Autoencoder::Autoencoder(std::uint64_t seed) {
    Rng rng = Rng(seed).split("autoencoder");
    auto conv = [&](Index out, Index in, Index k) { return xavier_uniform({out, in, k}, in * k, out * k, rng); };
    auto deconv = [&](Index in, Index out, Index k) { return xavier_uniform({in, out, k}, in * k, out * k, rng); };
    params_.push_back({"encoder.conv1.weight", conv(16, 6, 2)});
    params_.push_back({"encoder.conv1.bias", Tensor({16})});
    params_.push_back({"encoder.conv2.weight", conv(8, 16, 3)});
    params_.push_back({"encoder.conv2.bias", Tensor({8})});
    params_.push_back({"decoder.deconv1.weight", deconv(8, 16, 3)});
    params_.push_back({"decoder.deconv1.bias", Tensor({16})});
    params_.push_back({"decoder.deconv2.weight", deconv(16, 6, 5)});
    params_.push_back({"decoder.deconv2.bias", Tensor({6})});
}

Var Autoencoder::encode(Var x, std::span<const Var> p) const {
    check_windows(x.shape());
    Var h = maxpool1d(relu(conv1d(x, p[kConv1W], p[kConv1B])), 2, 2);  // (B, 16, 11)
    h = maxpool1d(relu(conv1d(h, p[kConv2W], p[kConv2B])), 2, 2);      // (B, 8, 4)
    return reshape(h, {x.shape()[0], kLatentDim});
}

Var Autoencoder::decode(Var z, std::span<const Var> p) const {
    const Index batch = z.shape()[0];
    Var h = upsample1d(reshape(z, {batch, 8, 4}), 2);                    // (B, 8, 8)
    h = relu(conv_transpose1d(h, p[kDeconv1W], p[kDeconv1B]));          // (B, 16, 10)
    h = upsample1d(h, 2);                                                // (B, 16, 20)
    return conv_transpose1d(h, p[kDeconv2W], p[kDeconv2B]);              // (B, 6, 24)
}

namespace {

template <typename Fn>
void in_chunks(const Autoencoder& m, const Tensor& x, Fn&& fn) {
    constexpr Index kChunk = 512;
    for (Index start = 0; start < x.dim(0); start += kChunk) {
        const Index b = std::min(kChunk, x.dim(0) - start);
        ad::Tape tape;
        std::vector<Var> p;
        for (const auto& q : m.parameters()) p.push_back(tape.parameter(q.value));
        fn(tape, p, tape.constant(rows_of(x, start, b)), start, b);
    }
}

}  // namespace

RowMajorMatrix Autoencoder::encode(const Tensor& x) const {
    check_windows(x.shape());
    RowMajorMatrix out(x.dim(0), kLatentDim);
    in_chunks(*this, x, [&](ad::Tape&, const std::vector<Var>& p, Var xb, Index start, Index b) {
        out.middleRows(start, b) = encode(xb, p).value().matrix();
    });
    return out;
}

Tensor Autoencoder::reconstruct(const Tensor& x) const {
    check_windows(x.shape());
    Tensor out(x.shape());
    const Index per = x.size() / std::max<Index>(x.dim(0), 1);
    in_chunks(*this, x, [&](ad::Tape&, const std::vector<Var>& p, Var xb, Index start, Index b) {
        out.vec().segment(start * per, b * per) = decode(encode(xb, p), p).value().vec();
    });
    return out;
}

double Autoencoder::reconstruction_mse(const Tensor& x) const { return mse(reconstruct(x), x); }

namespace {

class AutoencoderTrainable final : public Trainable {
  public:
    AutoencoderTrainable(Autoencoder& m, const Tensor& train, const Tensor& val, const AutoencoderTraining& cfg)
        : m_(m), train_(train), val_(val), cfg_(cfg), root_(Rng(cfg.seed).split("autoencoder-train")) {
        rows_ = strided_subset(train.dim(0), cfg.max_train_samples);
        for (auto& p : m_.parameters()) params_.push_back(&p.value);
    }

    double train_epoch(int epoch) override {
        auto order = rows_;
        Rng rng = root_.split(static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);
        const Index per = train_.size() / train_.dim(0);
        const auto n = static_cast<Index>(order.size());
        double total = 0.0;
        for (Index start = 0; start < n; start += cfg_.batch_size) {
            const Index b = std::min<Index>(cfg_.batch_size, n - start);
            Tensor xb({b, kInputFeatures, kInputSteps});
            for (Index i = 0; i < b; ++i) xb.vec().segment(i * per, per) = train_.vec().segment(order[start + i] * per, per);
            ad::Tape tape;
            std::vector<Var> p;
            for (const auto* q : params_) p.push_back(tape.parameter(*q));
            const Var x = tape.constant(xb);
            const Var loss = ad::mse_loss(m_.decode(m_.encode(x, p), p), xb);
            const double value = loss.value()[0];
            if (!std::isfinite(value))
                throw TrainingDiverged("autoencoder: reconstruction loss became non-finite in epoch " + std::to_string(epoch));
            tape.backward(loss);
            std::vector<Tensor> grads;
            for (const auto& v : p) grads.push_back(tape.grad(v));
            optimizer_step(params_, grads, state_, cfg_.optimizer);
            total += value * double(b);
        }
        return total / double(n);
    }

    double validation_loss() override { return m_.reconstruction_mse(val_.size() > 0 ? val_ : train_); }

    void keep_best() override {
        best_.clear();
        for (const auto* p : params_) best_.push_back(*p);
    }
    void restore_best() override {
        for (std::size_t i = 0; i < params_.size(); ++i) *params_[i] = best_[i];
    }

  private:
    Autoencoder& m_;
    const Tensor& train_;
    const Tensor& val_;
    const AutoencoderTraining& cfg_;
    Rng root_;
    std::vector<Index> rows_;
    std::vector<Tensor*> params_;
    std::vector<Tensor> best_;
    OptimizerState state_;
};

}  // namespace

AutoencoderHistory train_autoencoder(Autoencoder& model, const Tensor& train, const Tensor& validation,
                                     const AutoencoderTraining& cfg) {
    check_windows(train.shape());
    if (train.dim(0) < 1) throw std::invalid_argument("autoencoder: no training windows");
    if (validation.size() > 0) check_windows(validation.shape());
    if (cfg.batch_size < 1) throw std::invalid_argument("autoencoder: batch_size must be >= 1");
    cfg.optimizer.validate();
    AutoencoderHistory out;
    out.initial_loss = model.reconstruction_mse(train);
    AutoencoderTrainable t(model, train, validation, cfg);
    out.history = run_training(t, cfg.stopping);
    return out;
}

}  // namespace efbench
