#include "efbench/persistence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace efbench {

using Index = Eigen::Index;
using Json = nlohmann::json;

namespace {

class Writer {
  public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u8(unsigned char v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void text(const std::string& s, bool wide) {
        wide ? u64(s.size()) : u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::string take() { return std::move(out_); }

  private:
    std::string out_;
};

class Reader {
  public:
    explicit Reader(std::string_view in) : in_(in) {}
    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n)
            throw ModelFileError(std::string("model file is truncated (while reading ") + what + ")");
    }
    unsigned char u8(const char* what) {
        need(1, what);
        return static_cast<unsigned char>(in_[pos_++]);
    }
    std::uint64_t uint(int width, const char* what) {
        need(static_cast<std::size_t>(width), what);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(uint(8, what)); }
    std::string text(bool wide, const char* what) {
        const auto n = uint(wide ? 8 : 4, what);
        need(n, what);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

  private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

using TensorMap = std::map<std::string, Tensor>;

Tensor vec_tensor(const std::vector<double>& v) {
    Tensor t({static_cast<Index>(v.size())});
    for (std::size_t i = 0; i < v.size(); ++i) t[static_cast<Index>(i)] = v[i];
    return t;
}

// --- component encoders -----------------------------------------------------

void put_minirocket(const MiniRocketParams& p, std::vector<std::pair<std::string, Tensor>>& out) {
    const auto n = static_cast<Index>(p.combos.size());
    Tensor table({n, 4 + p.channels});
    std::vector<double> biases;
    for (Index i = 0; i < n; ++i) {
        const auto& c = p.combos[static_cast<std::size_t>(i)];
        auto row = table.matrix().row(i);
        row(0) = c.kernel;
        row(1) = double(c.dilation);
        row(2) = c.padded ? 1.0 : 0.0;
        row(3) = double(c.biases.size());
        for (int ch : c.channels) row(4 + ch) = 1.0;
        biases.insert(biases.end(), c.biases.begin(), c.biases.end());
    }
    out.emplace_back("minirocket.shape", Tensor({2}, {double(p.channels), double(p.length)}));
    out.emplace_back("minirocket.combos", std::move(table));
    out.emplace_back("minirocket.biases", vec_tensor(biases));
}

void put_regressor(const MultiOutputModel& m, std::vector<std::pair<std::string, Tensor>>& out) {
    const Index outputs = m.outputs(), width = m.num_features();
    if (m.kind == RegressorKind::SGD) {
        Tensor w({outputs, width}), b({outputs});
        for (Index h = 0; h < outputs; ++h) {
            w.matrix().row(h) = m.linear[h].weights.transpose();
            b[h] = m.linear[h].bias;
        }
        out.emplace_back("sgd.weights", std::move(w));
        out.emplace_back("sgd.bias", std::move(b));
        return;
    }
    for (Index h = 0; h < outputs; ++h) {
        const GBTModel& g = m.trees[h];
        Index total = 0;
        for (const auto& t : g.trees) total += static_cast<Index>(t.nodes.size());
        Tensor nodes({total, 6});
        Index r = 0;
        for (std::size_t t = 0; t < g.trees.size(); ++t)
            for (const auto& n : g.trees[t].nodes) {
                auto row = nodes.matrix().row(r++);
                row << double(t), n.feature, n.threshold, n.value, n.left, n.right;
            }
        const std::string prefix = "gbt.h" + std::to_string(h);
        out.emplace_back(prefix + ".meta", Tensor({3}, {g.base_score, double(g.num_features), double(g.trees.size())}));
        out.emplace_back(prefix + ".nodes", std::move(nodes));
    }
}

// --- component decoders -----------------------------------------------------

const Tensor& take(const TensorMap& m, const std::string& name, const Shape* shape = nullptr) {
    const auto it = m.find(name);
    if (it == m.end()) throw ModelFileError("model file lacks tensor '" + name + "'");
    if (shape && it->second.shape() != *shape)
        throw ModelFileError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", config implies " +
                             shape_str(*shape));
    return it->second;
}

int as_int(double v, const std::string& what) {
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ModelFileError("non-integer " + what + " in model file");
    return static_cast<int>(v);
}

MiniRocketParams get_minirocket(const TensorMap& m) {
    const Tensor& shape = take(m, "minirocket.shape");
    if (shape.size() != 2) throw ModelFileError("bad minirocket.shape");
    MiniRocketParams p;
    p.channels = as_int(shape[0], "channel count");
    p.length = as_int(shape[1], "series length");
    const Tensor& table = take(m, "minirocket.combos");
    const Tensor& biases = take(m, "minirocket.biases");
    if (table.rank() != 2 || table.dim(1) != 4 + p.channels) throw ModelFileError("bad minirocket.combos shape");
    Index next = 0;
    for (Index i = 0; i < table.dim(0); ++i) {
        const auto row = table.matrix().row(i);
        MiniRocketCombo c;
        c.kernel = as_int(row(0), "kernel index");
        c.dilation = as_int(row(1), "dilation");
        c.padded = row(2) != 0.0;
        const int nb = as_int(row(3), "bias count");
        if (c.kernel < 0 || c.kernel >= kMiniRocketKernels || c.dilation < 1 || nb < 0)
            throw ModelFileError("invalid minirocket combo in model file");
        for (Index ch = 0; ch < p.channels; ++ch)
            if (row(4 + ch) != 0.0) c.channels.push_back(static_cast<int>(ch));
        if (next + nb > biases.size()) throw ModelFileError("minirocket bias table is too short");
        for (int b = 0; b < nb; ++b) c.biases.push_back(biases[next++]);
        p.combos.push_back(std::move(c));
    }
    if (next != biases.size()) throw ModelFileError("minirocket bias table has extra values");
    return p;
}

MultiOutputModel get_regressor(const TensorMap& m, bool linear, Index width) {
    MultiOutputModel out;
    if (linear) {
        out.kind = RegressorKind::SGD;
        const Tensor& w = take(m, "sgd.weights");
        if (w.rank() != 2 || w.dim(1) != width) throw ModelFileError("sgd.weights width does not match config");
        const Shape bias_shape{w.dim(0)};
        const Tensor& b = take(m, "sgd.bias", &bias_shape);
        for (Index h = 0; h < w.dim(0); ++h) out.linear.push_back({w.matrix().row(h).transpose(), b[h]});
        return out;
    }
    out.kind = RegressorKind::GBT;
    for (Index h = 0;; ++h) {
        const std::string prefix = "gbt.h" + std::to_string(h);
        if (!m.contains(prefix + ".meta")) break;
        const Shape meta_shape{3};
        const Tensor& meta = take(m, prefix + ".meta", &meta_shape);
        const Tensor& nodes = take(m, prefix + ".nodes");
        if (nodes.rank() != 2 || nodes.dim(1) != 6) throw ModelFileError("bad " + prefix + ".nodes shape");
        GBTModel g;
        g.base_score = meta[0];
        g.num_features = as_int(meta[1], "feature count");
        if (g.num_features != width) throw ModelFileError("tree feature width does not match config");
        g.trees.resize(static_cast<std::size_t>(as_int(meta[2], "tree count")));
        for (Index r = 0; r < nodes.dim(0); ++r) {
            const auto row = nodes.matrix().row(r);
            const int t = as_int(row(0), "tree index");
            if (t < 0 || t >= static_cast<int>(g.trees.size())) throw ModelFileError("tree index out of range");
            g.trees[t].nodes.push_back({as_int(row(1), "split feature"), row(2), row(3), as_int(row(4), "child index"),
                                        as_int(row(5), "child index")});
        }
        for (const auto& t : g.trees) {
            const int n = static_cast<int>(t.nodes.size());
            if (n == 0) throw ModelFileError("empty tree in model file");
            for (const auto& node : t.nodes)
                if (node.feature >= width ||
                    (node.feature >= 0 && (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)))
                    throw ModelFileError("tree node out of range in model file");
        }
        out.trees.push_back(std::move(g));
    }
    if (out.trees.empty()) throw ModelFileError("model file holds no trees");
    return out;
}

Json summary_json(const TrainingSummary& s) {
    Json j;
    j["epochs_run"] = s.epochs_run;
    j["best_epoch"] = s.best_epoch;
    j["best_validation"] = s.best_validation;
    j["stopped_early"] = s.stopped_early;
    j["train_loss"] = s.train_loss;
    j["validation_loss"] = s.validation_loss;
    if (s.autoencoder_initial_loss) j["autoencoder_initial_loss"] = *s.autoencoder_initial_loss;
    j["autoencoder_loss"] = s.autoencoder_loss;
    j["rounds_kept"] = s.rounds_kept;
    return j;
}

TrainingSummary summary_from(const Json& j) {
    TrainingSummary s;
    s.epochs_run = j.at("epochs_run").get<int>();
    s.best_epoch = j.at("best_epoch").get<int>();
    s.best_validation = j.at("best_validation").get<double>();
    s.stopped_early = j.at("stopped_early").get<bool>();
    s.train_loss = j.at("train_loss").get<std::vector<double>>();
    s.validation_loss = j.at("validation_loss").get<std::vector<double>>();
    if (j.contains("autoencoder_initial_loss")) s.autoencoder_initial_loss = j.at("autoencoder_initial_loss").get<double>();
    s.autoencoder_loss = j.at("autoencoder_loss").get<std::vector<double>>();
    s.rounds_kept = j.at("rounds_kept").get<std::vector<int>>();
    return s;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.emplace_back("scaler.min", Tensor({kNumFeatures}));
    tensors.emplace_back("scaler.max", Tensor({kNumFeatures}));
    for (int f = 0; f < kNumFeatures; ++f) {
        tensors[0].second[f] = model.scaler.min[f];
        tensors[1].second[f] = model.scaler.max[f];
    }
    if (is_neural(model.config.architecture)) {
        if (!model.network) throw std::logic_error("cannot save an unfitted network");
        for (const auto& p : model.network->parameters()) tensors.emplace_back("net." + p.name, p.value);
    } else {
        if (!model.minirocket || !model.regressor) throw std::logic_error("cannot save an unfitted ensemble");
        put_minirocket(*model.minirocket, tensors);
        if (model.autoencoder)
            for (const auto& p : model.autoencoder->parameters()) tensors.emplace_back("autoencoder." + p.name, p.value);
        put_regressor(*model.regressor, tensors);
    }

    Json header;
    header["config"] = to_json(model.config);
    header["summary"] = summary_json(model.summary);

    Writer w;
    w.bytes(kModelMagic, sizeof kModelMagic);
    w.u8(kModelFormatVersion);
    w.text(header.dump(), true);
    w.u64(tensors.size());
    for (const auto& [name, t] : tensors) {
        w.text(name, false);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (Index d : t.shape()) w.u64(static_cast<std::uint64_t>(d));
        for (Index i = 0; i < t.size(); ++i) w.f64(t[i]);
    }
    return w.take();
}

TrainedModel deserialize_model(std::string_view bytes) {
    if (bytes.size() < sizeof kModelMagic || std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0) {
        if (bytes.size() < sizeof kModelMagic && std::string_view(kModelMagic, bytes.size()) == bytes)
            throw ModelFileError("model file is truncated (while reading magic)");
        throw ModelVersionError("not a model file: magic mismatch (expected EFBENCH1)");
    }
    Reader r(bytes.substr(sizeof kModelMagic));
    const unsigned version = r.u8("version");
    if (version != kModelFormatVersion)
        throw ModelVersionError("unsupported model format version " + std::to_string(version) + " (this build reads " +
                                std::to_string(kModelFormatVersion) + ")");
    Json header;
    try {
        header = Json::parse(r.text(true, "header"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFileError(std::string("model header is not valid JSON: ") + e.what());
    }
    TensorMap tensors;
    const auto count = r.uint(8, "tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.text(false, "tensor name");
        const auto rank = r.uint(4, "tensor rank");
        if (rank > 8) throw ModelFileError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
        Shape shape;
        std::uint64_t size = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<Index>(r.uint(8, "tensor shape")));
            size *= static_cast<std::uint64_t>(shape.back());
        }
        r.need(size * 8, "tensor values");
        Tensor t(shape);
        for (Index k = 0; k < t.size(); ++k) t[k] = r.f64("tensor values");
        tensors.emplace(std::move(name), std::move(t));
    }
    if (!r.done()) throw ModelFileError("model file has trailing bytes");

    TrainedModel m;
    try {
        m.config = config_from_json(header.at("config"));
        m.summary = summary_from(header.at("summary"));
    } catch (const std::exception& e) {
        throw ModelFileError(std::string("model header is inconsistent: ") + e.what());
    }
    const Shape scaler_shape{kNumFeatures};
    const Tensor& lo = take(tensors, "scaler.min", &scaler_shape);
    const Tensor& hi = take(tensors, "scaler.max", &scaler_shape);
    for (int f = 0; f < kNumFeatures; ++f) {
        m.scaler.min[f] = lo[f];
        m.scaler.max[f] = hi[f];
    }
    if (is_neural(m.config.architecture)) {
        m.network = make_network(m.config);
        for (auto& p : m.network->parameters()) p.value = take(tensors, "net." + p.name, &p.value.shape());
    } else {
        m.minirocket = get_minirocket(tensors);
        if (m.minirocket->num_features() != m.config.num_features)
            throw ModelFileError("MiniRocket feature count does not match config");
        if (m.config.architecture == Architecture::MiniAutoEncXGBoost) {
            m.autoencoder.emplace();
            for (auto& p : m.autoencoder->parameters())
                p.value = take(tensors, "autoencoder." + p.name, &p.value.shape());
        }
        m.regressor = get_regressor(tensors, m.config.architecture == Architecture::MiniWSGD,
                                    ensemble_feature_width(m.config));
    }
    return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace efbench
