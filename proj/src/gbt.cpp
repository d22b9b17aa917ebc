#include "efbench/gbt.hpp"

#include "efbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace efbench {

void GBTConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("gbt: learning_rate must be > 0");
    if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
        throw std::invalid_argument("gbt: colsample_bytree must lie in (0, 1]");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw std::invalid_argument("gbt: subsample must lie in (0, 1]");
    if (!(reg_lambda >= 0.0)) throw std::invalid_argument("gbt: reg_lambda must be >= 0");
    if (max_depth < 0) throw std::invalid_argument("gbt: max_depth must be >= 0");
    if (n_rounds < 0) throw std::invalid_argument("gbt: n_rounds must be >= 0");
    if (!(min_child_weight >= 0.0)) throw std::invalid_argument("gbt: min_child_weight must be >= 0");
    if (early_stopping_rounds < 0) throw std::invalid_argument("gbt: early_stopping_rounds must be >= 0");
    if (base_score && !std::isfinite(*base_score)) throw std::invalid_argument("gbt: base_score must be finite");
}

double RegressionTree::predict(const double* row) const {
    int k = 0;
    while (nodes[k].feature >= 0) k = row[nodes[k].feature] < nodes[k].threshold ? nodes[k].left : nodes[k].right;
    return nodes[k].value;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        best = std::max(best, d[k]);
        if (nodes[k].feature >= 0) d[nodes[k].left] = d[nodes[k].right] = d[k] + 1;
    }
    return best;
}

int RegressionTree::leaves() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

namespace {

// Split candidates must beat the incumbent by more than round-off, so that
// mathematically tied gains resolve to the earliest (feature, threshold).
bool improves(double gain, double best) { return gain > best + 1e-12 * (1.0 + std::abs(best)); }

struct Candidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct BuildNode {
    double g = 0.0, h = 0.0;
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    int left = -1, right = -1;
};

double midpoint(double a, double b) {
    const double t = a + 0.5 * (b - a);
    return t > a ? t : b;
}

std::vector<int> pick(Eigen::Index n, double fraction, Rng& rng) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    if (fraction >= 1.0) return all;
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * double(n))));
    rng.shuffle(all);
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

// Renumbers a tree built level by level into pre-order.
RegressionTree to_preorder(const std::vector<BuildNode>& built) {
    RegressionTree tree;
    tree.nodes.reserve(built.size());
    auto emit = [&](auto&& self, int k) -> int {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({built[k].feature, built[k].threshold, built[k].value, -1, -1});
        if (built[k].feature >= 0) {
            const int l = self(self, built[k].left);
            const int r = self(self, built[k].right);
            tree.nodes[id].left = l;
            tree.nodes[id].right = r;
        }
        return id;
    };
    emit(emit, 0);
    return tree;
}

void check_finite(const RowMajorMatrix& x, const Eigen::VectorXd& y, const char* what) {
    if (!x.allFinite()) throw std::invalid_argument(std::string("gbt: non-finite value in ") + what + " features");
    if (!y.allFinite()) throw std::invalid_argument(std::string("gbt: non-finite value in ") + what + " targets");
}

// Columns with few distinct values (MiniRocket PPVs take at most one value
// per pooled position) are searched through per-node histograms over their
// distinct values instead of a scan of the presorted order. The candidates and
// the order they are tried in are the same, so the result is the same exact
// greedy split.
constexpr std::size_t kMaxBins = 256;

struct ColumnBins {
    std::vector<double> values;         // ascending distinct values; empty when not binned
    std::vector<std::uint16_t> bin_of;  // row -> index into values
};

ColumnBins bin_column(const double* col, const std::vector<int>& order) {
    ColumnBins b;
    b.bin_of.resize(order.size());
    for (int r : order) {
        if (b.values.empty() || col[r] > b.values.back()) {
            if (b.values.size() == kMaxBins) return {};
            b.values.push_back(col[r]);
        }
        b.bin_of[r] = static_cast<std::uint16_t>(b.values.size() - 1);
    }
    return b;
}

class TreeBuilder {
  public:
    TreeBuilder(const Eigen::MatrixXd& columns, const std::vector<std::vector<int>>& order,
                const std::vector<ColumnBins>& bins, const GBTConfig& cfg)
        : columns_(columns), order_(order), bins_(bins), cfg_(cfg) {}

    RegressionTree build(const Eigen::VectorXd& grad, const std::vector<int>& rows, const std::vector<int>& features) {
        const Eigen::Index n = columns_.rows();
        node_of_.assign(static_cast<std::size_t>(n), -1);
        std::vector<BuildNode> nodes(1);
        for (int r : rows) {
            node_of_[r] = 0;
            nodes[0].g += grad[r];
            nodes[0].h += 1.0;
        }
        std::vector<int> level{0};
        for (int depth = 0; depth < cfg_.max_depth && !level.empty(); ++depth) {
            const auto best = find_splits(grad, rows, nodes, level, features);
            std::vector<int> next;
            std::vector<int> child_of(nodes.size() * 2, -1);
            for (std::size_t i = 0; i < level.size(); ++i) {
                if (best[i].feature < 0) continue;
                const int k = level[i];
                nodes[k].feature = best[i].feature;
                nodes[k].threshold = best[i].threshold;
                nodes[k].left = static_cast<int>(nodes.size());
                nodes[k].right = nodes[k].left + 1;
                nodes.emplace_back();
                nodes.emplace_back();
                next.push_back(nodes[k].left);
                next.push_back(nodes[k].right);
            }
            if (next.empty()) break;
            for (int r : rows) {
                const BuildNode& p = nodes[node_of_[r]];
                if (p.feature < 0) continue;
                const int child = columns_(r, p.feature) < p.threshold ? p.left : p.right;
                node_of_[r] = child;
                nodes[child].g += grad[r];
                nodes[child].h += 1.0;
            }
            level = std::move(next);
        }
        for (auto& node : nodes)
            if (node.feature < 0) node.value = cfg_.learning_rate * leaf_weight(node.g, node.h, cfg_.reg_lambda);
        return to_preorder(nodes);
    }

  private:
    std::vector<Candidate> find_splits(const Eigen::VectorXd& grad, const std::vector<int>& rows,
                                       const std::vector<BuildNode>& nodes, const std::vector<int>& level,
                                       const std::vector<int>& features) {
        const std::size_t m = nodes.size();
        slot_.assign(m, -1);
        for (std::size_t i = 0; i < level.size(); ++i) slot_[level[i]] = static_cast<int>(i);
        std::vector<Candidate> best(level.size());
        gl_.resize(level.size());
        hl_.resize(level.size());
        last_.resize(level.size());
        for (int f : features) {
            if (!bins_[f].values.empty()) {
                scan_histogram(f, grad, rows, nodes, level, best);
                continue;
            }
            std::fill(gl_.begin(), gl_.end(), 0.0);
            std::fill(hl_.begin(), hl_.end(), 0.0);
            const double* col = columns_.col(f).data();
            for (int r : order_[f]) {
                const int k = node_of_[r];
                if (k < 0) continue;
                const int s = slot_[k];
                if (s < 0) continue;
                const double x = col[r];
                if (hl_[s] > 0.0 && x > last_[s]) {
                    const BuildNode& node = nodes[k];
                    const double hr = node.h - hl_[s];
                    if (hl_[s] >= cfg_.min_child_weight && hr >= cfg_.min_child_weight) {
                        const double gain = split_gain(gl_[s], hl_[s], node.g - gl_[s], hr, cfg_.reg_lambda);
                        if (improves(gain, best[s].gain)) best[s] = {gain, f, midpoint(last_[s], x)};
                    }
                }
                gl_[s] += grad[r];
                hl_[s] += 1.0;
                last_[s] = x;
            }
        }
        return best;
    }

    void scan_histogram(int f, const Eigen::VectorXd& grad, const std::vector<int>& rows,
                        const std::vector<BuildNode>& nodes, const std::vector<int>& level,
                        std::vector<Candidate>& best) {
        const auto& values = bins_[f].values;
        const auto* bin_of = bins_[f].bin_of.data();
        const std::size_t nb = values.size();
        hg_.assign(level.size() * nb, 0.0);
        hh_.assign(level.size() * nb, 0.0);
        for (int r : rows) {
            const int s = slot_[node_of_[r]];
            if (s < 0) continue;
            const std::size_t at = static_cast<std::size_t>(s) * nb + bin_of[r];
            hg_[at] += grad[r];
            hh_[at] += 1.0;
        }
        for (std::size_t s = 0; s < level.size(); ++s) {
            const BuildNode& node = nodes[level[s]];
            double gl = 0.0, hl = 0.0, last = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                const double h = hh_[s * nb + b];
                if (h == 0.0) continue;
                if (hl > 0.0) {
                    const double hr = node.h - hl;
                    if (hl >= cfg_.min_child_weight && hr >= cfg_.min_child_weight) {
                        const double gain = split_gain(gl, hl, node.g - gl, hr, cfg_.reg_lambda);
                        if (improves(gain, best[s].gain)) best[s] = {gain, f, midpoint(last, values[b])};
                    }
                }
                gl += hg_[s * nb + b];
                hl += h;
                last = values[b];
            }
        }
    }

    const Eigen::MatrixXd& columns_;
    const std::vector<std::vector<int>>& order_;
    const std::vector<ColumnBins>& bins_;
    const GBTConfig& cfg_;
    std::vector<int> node_of_, slot_;
    std::vector<double> gl_, hl_, last_, hg_, hh_;
};

double mse_of(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) { return (pred - y).squaredNorm() / double(y.size()); }

}  // namespace

GBTModel gbt_fit(const RowMajorMatrix& features, const Eigen::VectorXd& targets, const GBTConfig& cfg,
                 EvalSet validation) {
    cfg.validate();
    const Eigen::Index n = features.rows(), width = features.cols();
    if (targets.size() != n)
        throw std::invalid_argument("gbt: " + std::to_string(n) + " feature rows but " +
                                    std::to_string(targets.size()) + " targets");
    if (n < 2) throw std::invalid_argument("gbt: need at least 2 samples");
    if (width < 1) throw std::invalid_argument("gbt: need at least 1 feature");
    check_finite(features, targets, "training");
    const bool use_validation = validation.features != nullptr && validation.targets != nullptr;
    if (use_validation) {
        if (validation.features->cols() != width || validation.features->rows() != validation.targets->size())
            throw std::invalid_argument("gbt: validation set shape does not match training data");
        check_finite(*validation.features, *validation.targets, "validation");
    }

    GBTModel model;
    model.num_features = width;
    model.base_score = cfg.base_score.value_or(targets.mean());

    const Eigen::MatrixXd columns = features;
    std::vector<std::vector<int>> order(static_cast<std::size_t>(width));
    std::vector<ColumnBins> bins(static_cast<std::size_t>(width));
    for (Eigen::Index f = 0; f < width; ++f) {
        auto& o = order[f];
        o.resize(static_cast<std::size_t>(n));
        std::iota(o.begin(), o.end(), 0);
        const double* col = columns.col(f).data();
        std::stable_sort(o.begin(), o.end(), [col](int a, int b) { return col[a] < col[b]; });
        bins[f] = bin_column(col, o);
    }

    Eigen::VectorXd pred = Eigen::VectorXd::Constant(n, model.base_score);
    Eigen::VectorXd val_pred;
    if (use_validation) val_pred = Eigen::VectorXd::Constant(validation.targets->size(), model.base_score);
    double best_val = use_validation ? mse_of(val_pred, *validation.targets) : 0.0;
    std::size_t best_trees = 0;

    TreeBuilder builder(columns, order, bins, cfg);
    const Rng root = Rng(cfg.seed).split("gbt");
    for (int round = 0; round < cfg.n_rounds; ++round) {
        Rng rng = root.split(static_cast<std::uint64_t>(round));
        const auto rows = pick(n, cfg.subsample, rng);
        const auto cols = pick(width, cfg.colsample_bytree, rng);
        const Eigen::VectorXd grad = pred - targets;
        model.trees.push_back(builder.build(grad, rows, cols));
        const RegressionTree& tree = model.trees.back();
        for (Eigen::Index i = 0; i < n; ++i) pred[i] += tree.predict(features.row(i).data());
        model.train_curve.push_back(mse_of(pred, targets));
        if (!use_validation) continue;
        for (Eigen::Index i = 0; i < val_pred.size(); ++i) val_pred[i] += tree.predict(validation.features->row(i).data());
        const double v = mse_of(val_pred, *validation.targets);
        model.validation_curve.push_back(v);
        if (v < best_val) {
            best_val = v;
            best_trees = model.trees.size();
        } else if (cfg.early_stopping_rounds > 0 &&
                   static_cast<int>(model.trees.size() - best_trees) >= cfg.early_stopping_rounds) {
            break;
        }
    }
    if (use_validation && cfg.early_stopping_rounds > 0) model.trees.resize(best_trees);
    return model;
}

Eigen::VectorXd gbt_predict(const GBTModel& model, const RowMajorMatrix& features) {
    if (features.cols() != model.num_features)
        throw std::invalid_argument("gbt: model expects " + std::to_string(model.num_features) +
                                    " features, got " + std::to_string(features.cols()));
    Eigen::VectorXd out = Eigen::VectorXd::Constant(features.rows(), model.base_score);
    for (const auto& tree : model.trees)
        for (Eigen::Index i = 0; i < features.rows(); ++i) out[i] += tree.predict(features.row(i).data());
    return out;
}

}  // namespace efbench
