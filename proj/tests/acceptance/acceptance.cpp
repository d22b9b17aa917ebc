// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; criteria 8 and 9 share the two benchmark runs.

#include "efbench/allocator.hpp"
#include "efbench/experiment.hpp"
#include "efbench/persistence.hpp"

#include "gbt_oracle.hpp"
#include "gradcheck.hpp"
#include "metric_oracle.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace efbench;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kMetricTolerance = 1e-12;
constexpr int kMetricFixtures = 100;
constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientStep = 1e-5;
constexpr Eigen::Index kGradientSamplesPerTensor = 12;
constexpr double kGradientBudgetSeconds = 300.0;
constexpr double kRecombinationTolerance = 1e-12;
constexpr int kGbtCases = 250;
constexpr int kGbtMinimumChecked = 200;
constexpr Eigen::Index kRocketSamples = 55077;
constexpr double kRocketBudgetSeconds = 120.0;
constexpr int kAutoencoderEpochs = 10;
constexpr double kBenchmarkBudgetSeconds = 30.0 * 60.0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, const char* spec = "%.3g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

WindowedDataset synthetic(std::size_t hours, std::uint64_t seed) {
    return prepare_dataset(generate_synthetic(residence_profile(), parse_timestamp("2019-01-01T00:00:00"), hours, seed));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out[i++] = d;
    return out;
}

// 1 -------------------------------------------------------------------------
Verdict metric_oracles() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < kMetricFixtures; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng.below(500));
        Eigen::VectorXd y(n), p(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] = rng.below(20) == 0 ? 0.0 : rng.uniform(0, 400);
            p[i] = rng.below(20) == 0 ? 0.0 : rng.uniform(-20, 400);
        }
        const std::vector<double> ys(y.data(), y.data() + n), ps(p.data(), p.data() + n);
        worst = std::max({worst, oracle::relative_gap(smape(y, p), oracle::naive_smape(ys, ps)),
                          oracle::relative_gap(mae(y, p), oracle::naive_mae(ys, ps)),
                          oracle::relative_gap(rmse(y, p), oracle::naive_rmse(ys, ps))});
    }
    const bool examples = smape(vec({100}), vec({50})) == 100.0 * (2.0 * 50.0 / 150.0) &&
                          smape(vec({0}), vec({0})) == 0.0 && smape(vec({7, 9}), vec({7, 9})) == 0.0 &&
                          mae(vec({1, 5, -2}), vec({4, 8, 1})) == 3.0 && rmse(vec({1, 5, -2}), vec({4, 8, 1})) == 3.0 &&
                          mae(vec({0, 0}), vec({0, 4})) == 2.0 && rmse(vec({0, 0}), vec({0, 4})) == std::sqrt(8.0);
    return {worst <= kMetricTolerance && examples,
            std::to_string(kMetricFixtures) + " random fixtures, max relative gap " + fmt(worst) + " (tol " +
                fmt(kMetricTolerance) + "); worked examples " + (examples ? "exact" : "MISMATCH")};
}

// 2 -------------------------------------------------------------------------
Verdict gradient_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(12);
    double worst = 0.0;
    std::size_t checked = 0, hyper_checked = 0;
    bool ok = true;
    std::string failures;
    for (auto a : kAllArchitectures) {
        if (!is_neural(a)) continue;
        const auto net = make_network(default_config(a));
        std::vector<Tensor> inputs;
        for (const auto& p : net->parameters()) inputs.push_back(p.value);
        inputs.push_back(efbench::testing::random_tensor({2, 24, 6}, rng, 0.0, 1.0));
        const Tensor target = efbench::testing::random_tensor({2, 24}, rng, 0.0, 1.0);
        const std::size_t n = net->parameters().size();
        const LossKind kind = net->config().loss;
        auto build = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
            ForwardContext ctx(tape);
            Rng masks(77);
            ctx.training = true;
            ctx.rng = &masks;
            return ad::loss(net->forward_with(ctx, v.back(), std::span<const ad::Var>(v.data(), n)), target, kind);
        };
        const auto r = efbench::testing::check_gradients(inputs, build, kGradientStep, 1, kGradientSamplesPerTensor);
        checked += r.checked;
        if (a == Architecture::HyperNetLSTM) hyper_checked = r.checked;
        worst = std::max(worst, r.max_error);
        if (!(r.max_error < kGradientTolerance)) {
            ok = false;
            failures += std::string(" ") + display_name(a) + "=" + fmt(r.max_error);
        }
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < kGradientBudgetSeconds && hyper_checked > 0;
    return {ok, "10 architectures, 2-sample batches, " + std::to_string(checked) + " entries (" +
                    std::to_string(hyper_checked) + " in HyperNetLSTM incl. hypernetwork layers), max rel err " +
                    fmt(worst) + " (tol " + fmt(kGradientTolerance) + ", step " + fmt(kGradientStep) + "), " +
                    fmt(secs, "%.1f") + " s (budget " + fmt(kGradientBudgetSeconds, "%.0f") + " s)" + failures};
}

// 3 -------------------------------------------------------------------------
Verdict pipeline_counts() {
    bool ok = true;
    std::string notes;
    for (std::size_t hours : {48u, 49u, 100u, 1000u, 17544u}) {
        const auto d = synthetic(hours, hours);
        const std::size_t s = d.size();
        // Below 10 windows there is nothing to split: all of it is training data.
        const bool splittable = s >= 10;
        const std::size_t train = splittable ? s * 7 / 10 : s, val = splittable ? s / 10 : 0;
        const auto tr = d.indices(Split::Train), va = d.indices(Split::Validation), te = d.indices(Split::Test);
        bool chronological = true;
        for (std::size_t i = 0; i < s; ++i) {
            const Split want = i < train ? Split::Train : i < train + val ? Split::Validation : Split::Test;
            chronological = chronological && d.split[i] == want;
        }
        std::map<Season, std::size_t> per_season;
        for (auto season : d.season) ++per_season[season];
        std::size_t season_total = 0;
        for (auto& [season, count] : per_season) season_total += count;
        bool refuses = splittable;
        if (!splittable) {
            try {
                chronological_split_counts(s);
            } catch (const std::invalid_argument&) {
                refuses = true;
            }
        }
        const bool good = s == hours - 47 && refuses && tr.size() == train && va.size() == val && te.size() == s - train - val &&
                          chronological && season_total == s;
        ok = ok && good;
        if (!good) notes += " N=" + std::to_string(hours) + " mismatch";
    }

    // Recombination over a fixture spanning all four seasons.
    const auto d = synthetic(24 * 500, 6);
    const Forecasts f = persistence_baseline(d, Split::Train);
    const auto rows = score(f);
    std::size_t n = 0;
    double m = 0, r2 = 0, sm = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        n += rows[i].n;
        m += double(rows[i].n) * rows[i].mae;
        r2 += double(rows[i].n) * rows[i].rmse * rows[i].rmse;
        sm += double(rows[i].n) * rows[i].smape;
    }
    const double gap = std::max({oracle::relative_gap(m / double(n), rows[0].mae),
                                 oracle::relative_gap(r2 / double(n), rows[0].rmse * rows[0].rmse),
                                 oracle::relative_gap(sm / double(n), rows[0].smape)});
    ok = ok && rows.size() == 5 && n == rows[0].n && gap <= kRecombinationTolerance;
    return {ok, "N-47 windows for N in {48,49,100,1000,17544}, floor(0.7S)/floor(0.1S)/rest splits from S >= 10; "
                "season counts sum to total; " + std::to_string(rows.size() - 1) +
                    "-season recombination gap " + fmt(gap) + " (tol " + fmt(kRecombinationTolerance) + ")" + notes};
}

// 4 -------------------------------------------------------------------------
Verdict gbt_oracle() {
    int checked = 0;
    const int mismatches = oracle::run_suite(kGbtCases, 17, &checked);
    return {mismatches == 0 && checked >= kGbtMinimumChecked,
            std::to_string(checked) + " trees on <=8-sample, <=3-feature datasets (lambda in {0, 1.2}, depth 1-3), " +
                std::to_string(mismatches) + " mismatches against brute-force enumeration"};
}

// 5 -------------------------------------------------------------------------
Verdict minirocket() {
    const auto d = synthetic(static_cast<std::size_t>(kRocketSamples) + 47, 55);
    const Tensor series = to_channel_major(d.inputs);
    MiniRocketConfig cfg;
    cfg.seed = 5;
    const auto params = minirocket_fit(series, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const RowMajorMatrix features = minirocket_transform(params, series, 1);
    const double secs = seconds_since(t0);
    const bool bounded = features.minCoeff() >= 0.0 && features.maxCoeff() <= 1.0;
    const auto again = minirocket_fit(series, cfg);
    std::vector<Eigen::Index> head(2000);
    std::iota(head.begin(), head.end(), 0);
    const Tensor slice = gather_rows(series, head);
    const bool identical = again == params && minirocket_transform(again, slice, 1) == features.topRows(2000);
    const bool ok = d.size() == static_cast<std::size_t>(kRocketSamples) && features.rows() == kRocketSamples &&
                    features.cols() == 512 && params.num_features() == 512 && bounded && identical &&
                    secs <= kRocketBudgetSeconds;
    return {ok, std::to_string(features.cols()) + " features, range [" + fmt(features.minCoeff()) + ", " +
                    fmt(features.maxCoeff()) + "], refit " + (identical ? "bit-identical" : "DIFFERS") + "; " +
                    std::to_string(features.rows()) + "x24x6 transform " + fmt(secs, "%.1f") +
                    " s single-core (budget " + fmt(kRocketBudgetSeconds, "%.0f") + " s)"};
}

// 6 -------------------------------------------------------------------------
Verdict autoencoder() {
    const auto d = synthetic(24 * 120, 66);
    const auto rows = d.indices(Split::Train);
    const Tensor x = to_channel_major(d.gather_inputs(rows));
    Autoencoder ae(3);
    const auto latent = ae.encode(x);
    AutoencoderTraining cfg;
    cfg.stopping.epoch_cap = kAutoencoderEpochs;
    cfg.stopping.patience = kAutoencoderEpochs;
    cfg.seed = 3;
    const auto h = train_autoencoder(ae, x, Tensor(), cfg);
    const double after = ae.reconstruction_mse(x);
    const bool ok = latent.cols() == 32 && kLatentDim == 32 && h.history.epochs_run == kAutoencoderEpochs &&
                    after < h.initial_loss;
    return {ok, "latent " + std::to_string(latent.cols()) + " (6x24 -> 16x23 -> 16x11 -> 8x9 -> 8x4 -> 32); "
                "reconstruction MSE " + fmt(h.initial_loss, "%.5g") + " at epoch 0 -> " + fmt(after, "%.5g") +
                    " after " + std::to_string(h.history.epochs_run) + " epochs"};
}

// 7 -------------------------------------------------------------------------
/// Real parameter tensors that change every epoch; validation replays a curve.
class CraftedCurve final : public Trainable {
  public:
    explicit CraftedCurve(std::vector<double> curve) : curve_(std::move(curve)), params_({4, 4}) {}

    double train_epoch(int epoch) override {
        epoch_ = epoch;
        Rng rng(static_cast<std::uint64_t>(epoch));
        for (Eigen::Index i = 0; i < params_.size(); ++i) params_[i] = rng.normal();
        snapshots_.push_back(params_);
        return 1.0;
    }
    double validation_loss() override { return curve_.at(static_cast<std::size_t>(epoch_ - 1)); }
    void keep_best() override { best_ = params_; }
    void restore_best() override { params_ = best_; }

    const Tensor& params() const { return params_; }
    const Tensor& snapshot(int epoch) const { return snapshots_.at(static_cast<std::size_t>(epoch - 1)); }
    std::size_t epochs_trained() const { return snapshots_.size(); }

  private:
    std::vector<double> curve_;
    Tensor params_, best_;
    std::vector<Tensor> snapshots_;
    int epoch_ = 0;
};

Verdict early_stopping() {
    CraftedCurve model({5, 4, 3, 3.1, 3.2, 3.3, 3.4, 3.5, 0.1, 0.1, 0.1});
    const auto h = run_training(model, StoppingRule{200, 5, 1e-9});
    const bool ok = h.epochs_run == 8 && model.epochs_trained() == 8 && h.best_epoch == 3 && h.stopped_early &&
                    model.params() == model.snapshot(3) && !(model.params() == model.snapshot(8));
    return {ok, "stopped after epoch " + std::to_string(h.epochs_run) + ", restored epoch " +
                    std::to_string(h.best_epoch) + " parameters (" +
                    (model.params() == model.snapshot(3) ? "bit-identical" : "DIFFERENT") + ")"};
}

// 8 and 9 -------------------------------------------------------------------
struct BenchmarkRun {
    ExperimentResult result;
    double seconds = 0.0;
};

BenchmarkRun run_benchmark(const fs::path& out) {
    Manifest m = load_manifest(EFBENCH_BENCHMARK_MANIFEST);
    m.output_dir = out;
    fs::remove_all(out);
    const auto t0 = std::chrono::steady_clock::now();
    BenchmarkRun r{run_experiment(m, &std::cerr), 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

std::map<std::string, double> all_season_smape(const EvaluationReport& report) {
    std::map<std::string, double> out;
    for (const auto& r : report.rows)
        if (r.season == kAllSeasons) out[r.model] = r.smape;
    return out;
}

Verdict benchmark(const BenchmarkRun& run) {
    const auto s = all_season_smape(run.result.report);
    const double base = s.at(kPersistenceName);
    bool ok = !run.result.any_failed() && s.size() == 14 && run.seconds <= kBenchmarkBudgetSeconds;
    std::string detail = "persistence " + fmt(base, "%.3f") + "%;";
    for (const char* name : {"LSTM", "HyperNetLSTM", "MiniAutoEncXGBoost", "MiniWXGBoost", "AttentionLSTM"}) {
        const auto it = s.find(name);
        const bool beats = it != s.end() && it->second < base;
        ok = ok && beats;
        detail += std::string(" ") + name + " " + (it == s.end() ? "missing" : fmt(it->second, "%.3f") + "%") +
                  (beats ? "" : " (NOT below)");
    }
    const double weak = s.count("MiniWSGD") ? s.at("MiniWSGD") : 0.0;
    bool ordered = s.count("MiniWSGD") > 0;
    for (const char* name : {"MiniAutoEncXGBoost", "MiniWXGBoost", "HyperNetLSTM"})
        ordered = ordered && s.count(name) && s.at(name) < weak;
    ok = ok && ordered;
    detail += "; MiniWSGD " + fmt(weak, "%.3f") + "% " + (ordered ? "below" : "NOT below") +
              " ensembles and hypernetwork; 13 models in " + fmt(run.seconds, "%.0f") + " s (budget " +
              fmt(kBenchmarkBudgetSeconds, "%.0f") + " s)";
    if (run.result.any_failed())
        for (const auto& m : run.result.models)
            if (m.failed) detail += "; " + m.name + " failed: " + m.error;
    return {ok, detail};
}

std::map<std::string, std::string> csv_files(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
    return out;
}

Verdict determinism(const fs::path& a, const fs::path& b) {
    const auto first = csv_files(a), second = csv_files(b);
    std::size_t same = 0;
    std::string differing;
    for (const auto& [name, bytes] : first) {
        const auto it = second.find(name);
        if (it != second.end() && it->second == bytes) {
            ++same;
        } else {
            differing += " " + name;
        }
    }
    const bool ok = !first.empty() && first.size() == second.size() && same == first.size();
    return {ok, std::to_string(same) + "/" + std::to_string(first.size()) +
                    " CSV files byte-identical across two runs of the benchmark manifest" +
                    (differing.empty() ? "" : "; differ:" + differing)};
}

// 10 ------------------------------------------------------------------------
Verdict persistence() {
    const auto d = synthetic(24 * 60, 10);
    const Tensor x = d.gather_inputs(d.indices(Split::Test));
    const fs::path dir = fs::temp_directory_path() / "efbench_acceptance_models";
    fs::create_directories(dir);
    int good = 0;
    std::string bad;
    for (auto a : kAllArchitectures) {
        auto cfg = default_config(a);
        cfg.epoch_cap = 2;
        cfg.max_train_samples = 256;
        cfg.gbt.n_rounds = 10;
        cfg.gbt.max_depth = 3;
        cfg.sgd_epochs = 3;
        cfg.autoencoder_epoch_cap = 2;
        cfg.seed = 99;
        const TrainedModel m = fit_model(cfg, d, 1);
        const fs::path file = dir / (std::string(architecture_id(a)) + ".efb");
        save_model(m, file);
        const TrainedModel back = load_model(file);
        if (back.predict(x, 1) == m.predict(x, 1) && back.predict_kwh(x, 1) == m.predict_kwh(x, 1)) {
            ++good;
        } else {
            bad += std::string(" ") + display_name(a);
        }
    }
    fs::remove_all(dir);
    return {good == 13, std::to_string(good) + "/13 architectures predict bit-identically after save -> load" +
                            (bad.empty() ? "" : "; differ:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

    int failed = 0, ran = 0;
    auto report = [&](int id, const char* title, const std::function<Verdict()>& check) {
        if (!wanted(id)) return;
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        ++ran;
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": " << v.detail << std::endl;
    };

    report(1, "metric oracles", metric_oracles);
    report(2, "gradient checks", gradient_checks);
    report(3, "pipeline counts", pipeline_counts);
    report(4, "GBT oracle equivalence", gbt_oracle);
    report(5, "MiniRocket", minirocket);
    report(6, "autoencoder", autoencoder);
    report(7, "early stopping", early_stopping);
    if (wanted(8) || wanted(9)) {
        const fs::path root = fs::temp_directory_path() / "efbench_acceptance_benchmark";
        std::optional<BenchmarkRun> first;
        report(8, "end-to-end benchmark", [&] {
            first = run_benchmark(root / "a");
            return benchmark(*first);
        });
        report(9, "determinism", [&] {
            if (!first) first = run_benchmark(root / "a");
            run_benchmark(root / "b");
            return determinism(root / "a", root / "b");
        });
        fs::remove_all(root);
    }
    report(10, "persistence", persistence);

    std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
