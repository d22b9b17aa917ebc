#include "efbench/networks.hpp"

#include "efbench/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace efbench {

using ad::Var;
using Index = Eigen::Index;

Eigen::Index NeuralNet::parameter_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::size_t NeuralNet::declare(std::string name, Tensor init) {
    params_.push_back({std::move(name), std::move(init)});
    return params_.size() - 1;
}

ad::Var NeuralNet::forward(ForwardContext& ctx, ad::Var x) const {
    ctx.bound.clear();
    for (const auto& p : params_) ctx.bound.push_back(ctx.tape.parameter(p.value));
    return forward_with(ctx, x, ctx.bound);
}

ad::Var NeuralNet::forward_with(ForwardContext& ctx, ad::Var x, std::span<const ad::Var> p) const {
    const Shape& s = x.shape();
    if (s.size() != 3 || s[1] != kInputSteps || s[2] != kInputFeatures)
        throw ShapeError(std::string(display_name(cfg_.architecture)) + ": expected input (batch,24,6), got " +
                         shape_str(s));
    if (p.size() != params_.size())
        throw std::invalid_argument("forward_with: expected " + std::to_string(params_.size()) +
                                    " parameter variables, got " + std::to_string(p.size()));
    if (ctx.training && cfg_.dropout > 0.0 && ctx.rng == nullptr)
        throw std::logic_error("training forward needs a random generator for dropout");
    return run(ctx, x, p);
}

Tensor NeuralNet::predict(const Tensor& x, Index chunk) const {
    if (x.rank() != 3) throw ShapeError("predict: expected (samples,24,6), got " + shape_str(x.shape()));
    const Index samples = x.dim(0), per = x.dim(1) * x.dim(2);
    Tensor out({samples, kOutputSteps});
    for (Index start = 0; start < samples; start += chunk) {
        const Index b = std::min(chunk, samples - start);
        Tensor part({b, x.dim(1), x.dim(2)}, Tensor::Vector(x.vec().segment(start * per, b * per)));
        ad::Tape tape;
        ForwardContext ctx(tape);
        const Var y = forward(ctx, tape.constant(std::move(part)));
        out.vec().segment(start * kOutputSteps, b * kOutputSteps) = y.value().vec();
    }
    return out;
}

Tensor positional_encoding(Index steps, Index d) {
    Tensor pe({steps, d});
    for (Index t = 0; t < steps; ++t)
        for (Index i = 0; i < d; ++i) {
            const double rate = std::pow(10000.0, -double(i - i % 2) / double(d));
            pe.matrix()(t, i) = i % 2 == 0 ? std::sin(double(t) * rate) : std::cos(double(t) * rate);
        }
    return pe;
}

namespace {

constexpr Index kFlat = kInputSteps * kInputFeatures;

Var flatten(Var x) { return reshape(x, {x.shape()[0], shape_size(x.shape()) / x.shape()[0]}); }

Var drop(ForwardContext& ctx, Var x, double rate) {
    if (!ctx.training || rate == 0.0) return x;
    return ad::dropout(x, rate, *ctx.rng, true);
}

void record(ForwardContext& ctx, const std::string& name, Var v) {
    if (ctx.trace) (*ctx.trace)[name] = v.value();
}

/// Weight/bias index pair of a fully connected layer.
struct Dense {
    std::size_t w = 0, b = 0;
    Var operator()(Var x, std::span<const Var> p) const { return linear(x, p[w], p[b]); }
};

class Initializer {
  public:
    explicit Initializer(std::uint64_t seed) : rng_(Rng(seed).split("init")) {}
    Tensor xavier(Shape shape, Index fan_in, Index fan_out) { return xavier_uniform(std::move(shape), fan_in, fan_out, rng_); }
    Tensor matrix(Index in, Index out) { return xavier({in, out}, in, out); }

  private:
    Rng rng_;
};

Var zeros_state(ForwardContext& ctx, Index batch, Index units) { return ctx.tape.constant(Tensor({batch, units})); }

/// One LSTM step from gate preactivations (B, 4H) ordered input, forget,
/// cell, output.
std::pair<Var, Var> lstm_cell(Var pre, Var c, Index h) {
    const Var i = sigmoid(slice(pre, 0, h));
    const Var f = sigmoid(slice(pre, h, h));
    const Var g = ad::tanh(slice(pre, 2 * h, h));
    const Var o = sigmoid(slice(pre, 3 * h, h));
    const Var c_next = add(mul(f, c), mul(i, g));
    return {mul(o, ad::tanh(c_next)), c_next};
}

/// LSTM weights (in, 4H) and (H, 4H) plus bias (4H) with the forget slice at 1.
struct LstmInit {
    Tensor wx, wh, b;
};

LstmInit lstm_init(Initializer& init, Index in, Index h) {
    LstmInit l{init.matrix(in, 4 * h), init.matrix(h, 4 * h), Tensor({4 * h})};
    l.b.vec().segment(h, h).setOnes();
    return l;
}

struct LstmLayer {
    std::size_t wx = 0, wh = 0, b = 0;
    Index units = 0;

    /// Hidden state after every step.
    std::vector<Var> run(ForwardContext& ctx, Var x, std::span<const Var> p) const {
        const Index batch = x.shape()[0], steps = x.shape()[1];
        const Var proj = linear(x, p[wx], p[b]);  // (B, T, 4H)
        Var h = zeros_state(ctx, batch, units), c = zeros_state(ctx, batch, units);
        std::vector<Var> hs;
        for (Index t = 0; t < steps; ++t) {
            const Var pre = add(select_step(proj, t), matmul(h, p[wh]));
            std::tie(h, c) = lstm_cell(pre, c, units);
            hs.push_back(h);
        }
        return hs;
    }
};

// ---------------------------------------------------------------------------

class Mlp final : public NeuralNet {
  public:
    explicit Mlp(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index u = cfg.units;
        hidden_ = {declare("hidden.weight", init.matrix(kFlat, u)), declare("hidden.bias", Tensor({u}))};
        out_ = {declare("out.weight", init.matrix(u, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        const Var h = drop(ctx, relu(hidden_(flatten(x), p)), cfg_.dropout);
        return out_(h, p);
    }

  private:
    Dense hidden_, out_;
};

class Tcn final : public NeuralNet {
  public:
    explicit Tcn(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index u = cfg.units, k = cfg.kernel_size;
        if (k % 2 == 0) throw std::invalid_argument("TCN: kernel_size must be odd for same padding");
        Index in = kInputFeatures;
        for (int l = 0; l < 3; ++l) {
            const std::string n = "conv" + std::to_string(l);
            conv_.push_back({declare(n + ".weight", init.xavier({u, in, k}, in * k, u * k)),
                             declare(n + ".bias", Tensor({u}))});
            in = u;
        }
        out_ = {declare("out.weight", init.matrix(u * kInputSteps, kOutputSteps)),
                declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        Var h = transpose(x);  // (B, 6, 24)
        const Index pad = cfg_.kernel_size / 2;
        for (std::size_t l = 0; l < conv_.size(); ++l) {
            h = relu(conv1d(h, p[conv_[l].w], p[conv_[l].b], pad));
            if (l + 1 < conv_.size()) h = drop(ctx, h, cfg_.dropout);
        }
        return out_(flatten(h), p);
    }

  private:
    std::vector<Dense> conv_;
    Dense out_;
};

class Recurrent final : public NeuralNet {
  public:
    explicit Recurrent(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index h = cfg.units;
        switch (cfg.architecture) {
            case Architecture::RNN:
                wx_ = declare("rnn.wx", init.matrix(kInputFeatures, h));
                wh_ = declare("rnn.wh", init.matrix(h, h));
                b_ = declare("rnn.bias", Tensor({h}));
                break;
            case Architecture::GRU:
                // Gates ordered reset, update, candidate; the recurrent bias is
                // kept apart because the reset gate scales it.
                wx_ = declare("gru.wx", init.matrix(kInputFeatures, 3 * h));
                wh_ = declare("gru.wh", init.matrix(h, 3 * h));
                b_ = declare("gru.bias", Tensor({3 * h}));
                bh_ = declare("gru.recurrent_bias", Tensor({3 * h}));
                break;
            default: {
                auto l = lstm_init(init, kInputFeatures, h);
                wx_ = declare("lstm.wx", std::move(l.wx));
                wh_ = declare("lstm.wh", std::move(l.wh));
                b_ = declare("lstm.bias", std::move(l.b));
            }
        }
        out_ = {declare("out.weight", init.matrix(h, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        const Index batch = x.shape()[0], h = cfg_.units;
        Var state = zeros_state(ctx, batch, h);
        if (cfg_.architecture == Architecture::LSTM) {
            state = LstmLayer{wx_, wh_, b_, h}.run(ctx, x, p).back();
        } else {
            const Var proj = linear(x, p[wx_], p[b_]);
            for (Index t = 0; t < kInputSteps; ++t) {
                const Var xt = select_step(proj, t);
                if (cfg_.architecture == Architecture::RNN) {
                    state = ad::tanh(add(xt, matmul(state, p[wh_])));
                } else {
                    const Var hp = linear(state, p[wh_], p[bh_]);
                    const Var r = sigmoid(add(slice(xt, 0, h), slice(hp, 0, h)));
                    const Var z = sigmoid(add(slice(xt, h, h), slice(hp, h, h)));
                    const Var n = ad::tanh(add(slice(xt, 2 * h, h), mul(r, slice(hp, 2 * h, h))));
                    // h' = n + z * (h - n)
                    state = add(n, mul(z, sub(state, n)));
                }
            }
        }
        return out_(drop(ctx, state, cfg_.dropout), p);
    }

  private:
    std::size_t wx_ = 0, wh_ = 0, b_ = 0, bh_ = 0;
    Dense out_;
};

class AttentionLstm final : public NeuralNet {
  public:
    explicit AttentionLstm(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index h = cfg.units;
        auto l = lstm_init(init, kInputFeatures, h);
        lstm_ = {declare("lstm.wx", std::move(l.wx)), declare("lstm.wh", std::move(l.wh)),
                 declare("lstm.bias", std::move(l.b)), h};
        out_ = {declare("out.weight", init.matrix(h, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        const auto hs = lstm_.run(ctx, x, p);
        const Var seq = stack_steps(hs);  // (B, T, H)
        const Var scores = scale(bmm(seq, seq, true), 1.0 / std::sqrt(double(cfg_.units)));
        const Var weights = softmax(scores);
        record(ctx, "attention", weights);
        const Var pooled = mean_over_steps(bmm(weights, seq));
        return out_(drop(ctx, pooled, cfg_.dropout), p);
    }

  private:
    LstmLayer lstm_;
    Dense out_;
};

class Transformer final : public NeuralNet {
  public:
    explicit Transformer(const ModelConfig& cfg) : NeuralNet(cfg) {
        const Index d = cfg.units, f = cfg.ffn_dim;
        if (d % cfg.heads != 0)
            throw std::invalid_argument("Transformer: d_model " + std::to_string(d) + " is not divisible by " +
                                        std::to_string(cfg.heads) + " heads");
        Initializer init(cfg.seed);
        embed_ = {declare("embed.weight", init.matrix(kInputFeatures, d)), declare("embed.bias", Tensor({d}))};
        for (int l = 0; l < cfg.layers; ++l) {
            const std::string n = "layer" + std::to_string(l) + ".";
            Block b;
            b.q = {declare(n + "q.weight", init.matrix(d, d)), declare(n + "q.bias", Tensor({d}))};
            b.k = {declare(n + "k.weight", init.matrix(d, d)), declare(n + "k.bias", Tensor({d}))};
            b.v = {declare(n + "v.weight", init.matrix(d, d)), declare(n + "v.bias", Tensor({d}))};
            b.o = {declare(n + "o.weight", init.matrix(d, d)), declare(n + "o.bias", Tensor({d}))};
            b.norm1 = {declare(n + "norm1.gamma", Tensor({d}, 1.0)), declare(n + "norm1.beta", Tensor({d}))};
            b.ff1 = {declare(n + "ff1.weight", init.matrix(d, f)), declare(n + "ff1.bias", Tensor({f}))};
            b.ff2 = {declare(n + "ff2.weight", init.matrix(f, d)), declare(n + "ff2.bias", Tensor({d}))};
            b.norm2 = {declare(n + "norm2.gamma", Tensor({d}, 1.0)), declare(n + "norm2.beta", Tensor({d}))};
            blocks_.push_back(b);
        }
        out_ = {declare("out.weight", init.matrix(d, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
        pe_ = positional_encoding(kInputSteps, d);
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        const Index d = cfg_.units, heads = cfg_.heads, dh = d / heads;
        Var h = drop(ctx, add(embed_(x, p), ctx.tape.constant(pe_)), cfg_.dropout);
        for (std::size_t l = 0; l < blocks_.size(); ++l) {
            const Block& b = blocks_[l];
            const Var q = b.q(h, p), k = b.k(h, p), v = b.v(h, p);
            std::vector<Var> parts;
            for (Index hd = 0; hd < heads; ++hd) {
                const Var qh = slice(q, hd * dh, dh), kh = slice(k, hd * dh, dh), vh = slice(v, hd * dh, dh);
                const Var a = softmax(scale(bmm(qh, kh, true), 1.0 / std::sqrt(double(dh))));
                record(ctx, "layer" + std::to_string(l) + ".head" + std::to_string(hd) + ".attention", a);
                parts.push_back(bmm(a, vh));
            }
            const Var attn = b.o(concat(parts), p);
            h = layer_norm(add(h, drop(ctx, attn, cfg_.dropout)), p[b.norm1.w], p[b.norm1.b]);
            const Var ff = b.ff2(relu(b.ff1(h, p)), p);
            h = layer_norm(add(h, drop(ctx, ff, cfg_.dropout)), p[b.norm2.w], p[b.norm2.b]);
        }
        return out_(mean_over_steps(h), p);
    }

  private:
    struct Block {
        Dense q, k, v, o, norm1, ff1, ff2, norm2;
    };
    Dense embed_, out_;
    std::vector<Block> blocks_;
    Tensor pe_;
};

class NBeats final : public NeuralNet {
  public:
    explicit NBeats(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index u = cfg.units;
        for (int b = 0; b < cfg.blocks; ++b) {
            const std::string n = "block" + std::to_string(b) + ".";
            Block blk;
            Index in = kFlat;
            for (int l = 0; l < cfg.layers; ++l) {
                const std::string m = n + "fc" + std::to_string(l);
                blk.fc.push_back({declare(m + ".weight", init.matrix(in, u)), declare(m + ".bias", Tensor({u}))});
                in = u;
            }
            blk.backcast = {declare(n + "backcast.weight", init.matrix(u, kFlat)),
                            declare(n + "backcast.bias", Tensor({kFlat}))};
            blk.forecast = {declare(n + "forecast.weight", init.matrix(u, kOutputSteps)),
                            declare(n + "forecast.bias", Tensor({kOutputSteps}))};
            blocks_.push_back(std::move(blk));
        }
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        Var residual = flatten(x);
        Var total{};
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            const Block& blk = blocks_[b];
            const std::string n = "block" + std::to_string(b) + ".";
            record(ctx, n + "input", residual);
            Var h = residual;
            for (const auto& fc : blk.fc) h = relu(fc(h, p));
            const Var back = blk.backcast(h, p);
            const Var fore = blk.forecast(h, p);
            record(ctx, n + "forecast", fore);
            residual = sub(residual, back);
            total = b == 0 ? fore : add(total, fore);
        }
        return total;
    }

  private:
    struct Block {
        std::vector<Dense> fc;
        Dense backcast, forecast;
    };
    std::vector<Block> blocks_;
};

class ArNet final : public NeuralNet {
  public:
    explicit ArNet(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index u = cfg.units;
        ar_ = {declare("ar.weight", init.matrix(kFlat, u)), declare("ar.bias", Tensor({u}))};
        for (int l = 0; l < cfg.layers; ++l) {
            const std::string n = "hidden" + std::to_string(l);
            hidden_.push_back({declare(n + ".weight", init.matrix(u, u)), declare(n + ".bias", Tensor({u}))});
        }
        out_ = {declare("out.weight", init.matrix(u, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        Var h = ar_(flatten(x), p);  // linear: autoregressive coefficients
        record(ctx, "ar.preactivation", h);
        for (const auto& l : hidden_) h = relu(l(h, p));
        return out_(drop(ctx, h, cfg_.dropout), p);
    }

  private:
    Dense ar_, out_;
    std::vector<Dense> hidden_;
};

class HyperNetLstm final : public NeuralNet {
  public:
    explicit HyperNetLstm(const ModelConfig& cfg) : NeuralNet(cfg) {
        Initializer init(cfg.seed);
        const Index h = cfg.units, a = cfg.hyper_units1, b = cfg.hyper_units2;
        const Index generated = lstm_parameter_count(kInputFeatures, h);
        hyper1_ = {declare("hyper1.weight", init.matrix(kFlat, a)), declare("hyper1.bias", Tensor({a}))};
        hyper2_ = {declare("hyper2.weight", init.matrix(a, b)), declare("hyper2.bias", Tensor({b}))};
        // The generator's bias is itself a well-scaled LSTM parameter set, so
        // the primary network starts near an ordinary initialized LSTM.
        auto l = lstm_init(init, kInputFeatures, h);
        Tensor bias({generated});
        bias.vec() << l.wx.vec(), l.wh.vec(), l.b.vec();
        hyper3_ = {declare("hyper3.weight", init.matrix(b, generated)), declare("hyper3.bias", std::move(bias))};
        out_ = {declare("out.weight", init.matrix(h, kOutputSteps)), declare("out.bias", Tensor({kOutputSteps}))};
    }

  protected:
    Var run(ForwardContext& ctx, Var x, std::span<const Var> p) const override {
        const Index batch = x.shape()[0], h = cfg_.units;
        const Var z = relu(hyper2_(relu(hyper1_(flatten(x), p)), p));
        const Var theta = hyper3_(z, p);  // (B, P), one LSTM per sample
        record(ctx, "theta", theta);
        const Index nx = kInputFeatures * 4 * h, nh = h * 4 * h;
        const Var wx = slice(theta, 0, nx);
        const Var wh = slice(theta, nx, nh);
        const Var b = slice(theta, nx + nh, 4 * h);
        Var state = zeros_state(ctx, batch, h), cell = zeros_state(ctx, batch, h);
        for (Index t = 0; t < kInputSteps; ++t) {
            const Var pre = add(add(per_sample_matvec(select_step(x, t), wx), per_sample_matvec(state, wh)), b);
            std::tie(state, cell) = lstm_cell(pre, cell, h);
        }
        return out_(drop(ctx, state, cfg_.dropout), p);
    }

  private:
    Dense hyper1_, hyper2_, hyper3_, out_;
};

}  // namespace

std::unique_ptr<NeuralNet> make_network(const ModelConfig& cfg) {
    cfg.validate();
    switch (cfg.architecture) {
        case Architecture::MLP:
            return std::make_unique<Mlp>(cfg);
        case Architecture::TCN:
            return std::make_unique<Tcn>(cfg);
        case Architecture::RNN:
        case Architecture::LSTM:
        case Architecture::GRU:
            return std::make_unique<Recurrent>(cfg);
        case Architecture::AttentionLSTM:
            return std::make_unique<AttentionLstm>(cfg);
        case Architecture::Transformer:
            return std::make_unique<Transformer>(cfg);
        case Architecture::NBeats:
            return std::make_unique<NBeats>(cfg);
        case Architecture::ARNet:
            return std::make_unique<ArNet>(cfg);
        case Architecture::HyperNetLSTM:
            return std::make_unique<HyperNetLstm>(cfg);
        default:
            throw std::invalid_argument(std::string(display_name(cfg.architecture)) + " is not a neural network");
    }
}

}  // namespace efbench
