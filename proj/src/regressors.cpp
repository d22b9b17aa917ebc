#include "efbench/regressors.hpp"

#include "efbench/parallel.hpp"
#include "efbench/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace efbench {

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd: learning_rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("sgd: epochs must be >= 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight_decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("sgd: batch_size must be >= 1");
}

Eigen::VectorXd LinearModel::predict(const RowMajorMatrix& features) const {
    if (features.cols() != weights.size())
        throw std::invalid_argument("linear model expects " + std::to_string(weights.size()) + " features, got " +
                                    std::to_string(features.cols()));
    return (features * weights).array() + bias;
}

LinearModel sgd_linear_fit(const RowMajorMatrix& features, const Eigen::VectorXd& target, const SgdConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = features.rows();
    if (n < 1) throw std::invalid_argument("sgd: need at least 1 sample");
    if (target.size() != n) throw std::invalid_argument("sgd: feature rows and targets differ in length");
    if (!features.allFinite() || !target.allFinite()) throw std::invalid_argument("sgd: non-finite input");

    LinearModel model;
    model.weights = Eigen::VectorXd::Zero(features.cols());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(cfg.seed).split("sgd");
    const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
    RowMajorMatrix xb(batch, features.cols());
    Eigen::VectorXd yb(batch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index b = std::min(batch, n - start);
            for (Eigen::Index i = 0; i < b; ++i) {
                xb.row(i) = features.row(order[start + i]);
                yb[i] = target[order[start + i]];
            }
            const auto x = xb.topRows(b);
            const Eigen::VectorXd residual = ((x * model.weights).array() + model.bias).matrix() - yb.head(b);
            const Eigen::VectorXd gw = x.transpose() * residual / double(b) + cfg.weight_decay * model.weights;
            model.weights -= cfg.learning_rate * gw;
            model.bias -= cfg.learning_rate * residual.mean();
        }
        if (!model.weights.allFinite() || !std::isfinite(model.bias))
            throw std::runtime_error("sgd: diverged at epoch " + std::to_string(epoch + 1) +
                                     " (learning_rate " + std::to_string(cfg.learning_rate) + " too large?)");
    }
    return model;
}

Eigen::Index MultiOutputModel::outputs() const {
    return static_cast<Eigen::Index>(kind == RegressorKind::SGD ? linear.size() : trees.size());
}

Eigen::Index MultiOutputModel::num_features() const {
    if (kind == RegressorKind::SGD) return linear.empty() ? 0 : linear.front().weights.size();
    return trees.empty() ? 0 : trees.front().num_features;
}

Eigen::MatrixXd MultiOutputModel::predict(const RowMajorMatrix& features) const {
    if (outputs() == 0) throw std::logic_error("multi-output model is not fitted");
    Eigen::MatrixXd out(features.rows(), outputs());
    for (Eigen::Index h = 0; h < outputs(); ++h)
        out.col(h) = kind == RegressorKind::SGD ? linear[h].predict(features) : gbt_predict(trees[h], features);
    return out;
}

std::uint64_t output_seed(std::uint64_t master, std::size_t h) { return Rng(master).split("output").split(h).seed(); }

MultiOutputModel multi_output_fit(const RowMajorMatrix& features, const Eigen::MatrixXd& targets,
                                  const MultiOutputConfig& cfg, const RowMajorMatrix* validation_features,
                                  const Eigen::MatrixXd* validation_targets) {
    if (targets.rows() != features.rows())
        throw std::invalid_argument("multi-output: " + std::to_string(features.rows()) + " feature rows but " +
                                    std::to_string(targets.rows()) + " target rows");
    if (targets.cols() < 1) throw std::invalid_argument("multi-output: no target columns");
    const bool has_val = validation_features && validation_targets;
    if (has_val && validation_targets->cols() != targets.cols())
        throw std::invalid_argument("multi-output: validation targets width differs from training targets");

    const auto outputs = static_cast<std::size_t>(targets.cols());
    MultiOutputModel model;
    model.kind = cfg.kind;
    if (cfg.kind == RegressorKind::SGD)
        model.linear.resize(outputs);
    else
        model.trees.resize(outputs);
    parallel_for(outputs, cfg.threads, [&](std::size_t h) {
        const Eigen::VectorXd y = targets.col(static_cast<Eigen::Index>(h));
        if (cfg.kind == RegressorKind::SGD) {
            SgdConfig c = cfg.sgd;
            c.seed = output_seed(cfg.seed, h);
            model.linear[h] = sgd_linear_fit(features, y, c);
        } else {
            GBTConfig c = cfg.gbt;
            c.seed = output_seed(cfg.seed, h);
            EvalSet eval;
            Eigen::VectorXd vy;
            if (has_val) {
                vy = validation_targets->col(static_cast<Eigen::Index>(h));
                eval = {validation_features, &vy};
            }
            model.trees[h] = gbt_fit(features, y, c, eval);
        }
    });
    return model;
}

}  // namespace efbench
