#include "efbench/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace efbench {

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::SGD: return "SGD";
        case OptimizerKind::Adam: return "Adam";
        case OptimizerKind::AdamW: return "AdamW";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "SGD" || name == "sgd") return OptimizerKind::SGD;
    if (name == "Adam" || name == "adam") return OptimizerKind::Adam;
    if (name == "AdamW" || name == "adamw") return OptimizerKind::AdamW;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected SGD, Adam or AdamW)");
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("optimizer: adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw std::invalid_argument("optimizer: adam_epsilon must be > 0");
}

void optimizer_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimizerState& state,
                    const OptimizerConfig& cfg) {
    if (params.size() != grads.size())
        throw ShapeError("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->shape() != grads[i].shape())
            throw ShapeError("optimizer_step: parameter " + std::to_string(i) + " has shape " +
                             shape_str(params[i]->shape()) + " but gradient " + shape_str(grads[i].shape()));

    const double lr = cfg.learning_rate, wd = cfg.weight_decay;
    if (cfg.kind == OptimizerKind::SGD) {
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i]->vec() -= lr * (grads[i].vec() + wd * params[i]->vec());
        ++state.steps;
        return;
    }

    if (state.first_moment.size() != params.size()) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (auto* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
        state.steps = 0;
    }
    ++state.steps;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->vec();
        auto& m = state.first_moment[i].vec();
        auto& v = state.second_moment[i].vec();
        Eigen::VectorXd g = grads[i].vec();
        if (cfg.kind == OptimizerKind::Adam)
            g += wd * p;
        else
            p *= 1.0 - lr * wd;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_epsilon);
    }
}

Tensor xavier_uniform(Shape shape, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("xavier: fan_in and fan_out must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor xavier_init(Eigen::Index fan_in, Eigen::Index fan_out, std::uint64_t seed) {
    Rng rng(seed);
    return xavier_uniform({fan_in, fan_out}, fan_in, fan_out, rng);
}

}  // namespace efbench
