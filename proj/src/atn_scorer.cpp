#include "poai/atn_scorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <utility>

#include <zlib.h>

#include "poai/errors.hpp"
#include "poai/rng.hpp"
#include "poai/stats.hpp"

namespace poai {

namespace {

struct ConvShape {
    std::size_t in, out, kernel;
};
constexpr std::array<ConvShape, kNumConvLayers> kConvShapes = {{{1, 8, 2}, {8, 16, 2}, {16, 16, 1}}};
constexpr std::array<std::pair<std::size_t, std::size_t>, kNumDenseLayers> kDenseShapes = {{{16, 8}, {8, 1}}};

// Spatial side length entering each conv layer.
constexpr std::array<std::size_t, kNumConvLayers + 1> kSides = {3, 2, 1, 1};

template <typename T>
void conv_forward(const ConvLayer& L, std::span<const T> in, std::size_t in_side, std::span<T> out) {
    const std::size_t out_side = in_side - L.kernel + 1;
    const std::size_t k = L.kernel;
    for (std::size_t o = 0; o < L.out_channels; ++o) {
        for (std::size_t y = 0; y < out_side; ++y) {
            for (std::size_t x = 0; x < out_side; ++x) {
                T acc = L.bias[o];
                for (std::size_t c = 0; c < L.in_channels; ++c) {
                    const double* w = &L.weights[((o * L.in_channels) + c) * k * k];
                    const T* a = &in[c * in_side * in_side];
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx)
                            acc += T(w[ky * k + kx]) * a[(y + ky) * in_side + (x + kx)];
                }
                out[(o * out_side + y) * out_side + x] = acc;
            }
        }
    }
}

// Accumulates dW, db; writes d(in) when din is non-empty.
void conv_backward(const ConvLayer& L, std::span<const double> in, std::size_t in_side,
                   std::span<const double> dz, ConvLayer& grad, std::span<double> din) {
    const std::size_t out_side = in_side - L.kernel + 1;
    const std::size_t k = L.kernel;
    std::fill(din.begin(), din.end(), 0.0);
    for (std::size_t o = 0; o < L.out_channels; ++o) {
        for (std::size_t y = 0; y < out_side; ++y) {
            for (std::size_t x = 0; x < out_side; ++x) {
                const double g = dz[(o * out_side + y) * out_side + x];
                if (g == 0.0) continue;
                grad.bias[o] += g;
                for (std::size_t c = 0; c < L.in_channels; ++c) {
                    const std::size_t wbase = ((o * L.in_channels) + c) * k * k;
                    const std::size_t abase = c * in_side * in_side;
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::size_t ai = abase + (y + ky) * in_side + (x + kx);
                            grad.weights[wbase + ky * k + kx] += g * in[ai];
                            if (!din.empty()) din[ai] += g * L.weights[wbase + ky * k + kx];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void dense_forward(const DenseLayer& L, std::span<const T> in, std::span<T> out) {
    for (std::size_t o = 0; o < L.outputs; ++o) {
        T acc = L.bias[o];
        for (std::size_t i = 0; i < L.inputs; ++i) acc += T(L.weights[o * L.inputs + i]) * in[i];
        out[o] = acc;
    }
}

void dense_backward(const DenseLayer& L, std::span<const double> in, std::span<const double> dz,
                    DenseLayer& grad, std::span<double> din) {
    std::fill(din.begin(), din.end(), 0.0);
    for (std::size_t o = 0; o < L.outputs; ++o) {
        const double g = dz[o];
        if (g == 0.0) continue;
        grad.bias[o] += g;
        for (std::size_t i = 0; i < L.inputs; ++i) {
            grad.weights[o * L.inputs + i] += g * in[i];
            din[i] += g * L.weights[o * L.inputs + i];
        }
    }
}

template <typename T>
void relu(std::span<const T> z, std::span<T> a) {
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > T(0) ? z[i] : T(0);
}

void relu_backward(std::span<const double> z, std::span<double> d) {
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!(z[i] > 0.0)) d[i] = 0.0;
}

// Per-sample forward state. Sizes follow the fixed architecture. T = long double
// is used only to evaluate finite differences with less cancellation error.
template <typename T>
struct Trace {
    std::array<T, 9> a0{};
    std::array<T, 32> z1{}, a1{};
    std::array<T, 16> z2{}, a2{};
    std::array<T, 16> z3{}, a3{};
    std::array<T, 8> z4{}, a4{};
    T out = 0;
};

template <typename T>
void forward(const ScorerModel& m, const FeatureMatrix& x, Trace<T>& t) {
    std::copy(x.values.begin(), x.values.end(), t.a0.begin());
    conv_forward<T>(m.conv[0], t.a0, kSides[0], t.z1);
    relu<T>(t.z1, t.a1);
    conv_forward<T>(m.conv[1], t.a1, kSides[1], t.z2);
    relu<T>(t.z2, t.a2);
    conv_forward<T>(m.conv[2], t.a2, kSides[2], t.z3);
    relu<T>(t.z3, t.a3);
    dense_forward<T>(m.dense[0], t.a3, t.z4);
    relu<T>(t.z4, t.a4);
    std::array<T, 1> out{};
    dense_forward<T>(m.dense[1], t.a4, out);
    t.out = out[0];
}

// Backpropagates d(objective)/d(out) = g into grad.
void backward(const ScorerModel& m, const Trace<double>& t, double g, ScorerModel& grad) {
    std::array<double, 1> d5 = {g};
    std::array<double, 8> d4{};
    dense_backward(m.dense[1], t.a4, d5, grad.dense[1], d4);
    relu_backward(t.z4, d4);
    std::array<double, 16> d3{};
    dense_backward(m.dense[0], t.a3, d4, grad.dense[0], d3);
    relu_backward(t.z3, d3);
    std::array<double, 16> d2{};
    conv_backward(m.conv[2], t.a2, kSides[2], d3, grad.conv[2], d2);
    relu_backward(t.z2, d2);
    std::array<double, 32> d1{};
    conv_backward(m.conv[1], t.a1, kSides[1], d2, grad.conv[1], d1);
    relu_backward(t.z1, d1);
    conv_backward(m.conv[0], t.a0, kSides[0], d1, grad.conv[0], std::span<double>{});
}

template <typename T = double>
T conv_weight_sq(const ScorerModel& m) {
    T s = 0;
    for (const auto& L : m.conv)
        for (double w : L.weights) s += T(w) * T(w);
    return s;
}

// training_objective without gradient, accumulated in T.
template <typename T>
T objective_value(const ScorerModel& m, std::span<const LabeledMatrix> batch, double l2_lambda) {
    Trace<T> t;
    T sse = 0;
    for (const auto& s : batch) {
        forward(m, s.features, t);
        const T r = t.out - T(s.label) / T(kLabelScale);
        sse += r * r;
    }
    return sse / T(batch.size()) + T(l2_lambda) * conv_weight_sq<T>(m);
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ConvLayer ConvLayer::zeros(std::size_t in, std::size_t out, std::size_t kernel) {
    ConvLayer L;
    L.in_channels = in;
    L.out_channels = out;
    L.kernel = kernel;
    L.weights.assign(out * in * kernel * kernel, 0.0);
    L.bias.assign(out, 0.0);
    return L;
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out) {
    DenseLayer L;
    L.inputs = in;
    L.outputs = out;
    L.weights.assign(in * out, 0.0);
    L.bias.assign(out, 0.0);
    return L;
}

ScorerModel ScorerModel::zeros() {
    ScorerModel m;
    for (std::size_t i = 0; i < kNumConvLayers; ++i)
        m.conv[i] = ConvLayer::zeros(kConvShapes[i].in, kConvShapes[i].out, kConvShapes[i].kernel);
    for (std::size_t i = 0; i < kNumDenseLayers; ++i)
        m.dense[i] = DenseLayer::zeros(kDenseShapes[i].first, kDenseShapes[i].second);
    return m;
}

std::vector<std::span<double>> ScorerModel::parameters() {
    std::vector<std::span<double>> out;
    for (auto& L : conv) {
        out.emplace_back(L.weights);
        out.emplace_back(L.bias);
    }
    for (auto& L : dense) {
        out.emplace_back(L.weights);
        out.emplace_back(L.bias);
    }
    return out;
}

std::vector<std::span<const double>> ScorerModel::parameters() const {
    std::vector<std::span<const double>> out;
    for (const auto& L : conv) {
        out.emplace_back(L.weights);
        out.emplace_back(L.bias);
    }
    for (const auto& L : dense) {
        out.emplace_back(L.weights);
        out.emplace_back(L.bias);
    }
    return out;
}

std::size_t ScorerModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& block : parameters()) n += block.size();
    return n;
}

void validate(const ScorerModel& model) {
    for (std::size_t i = 0; i < kNumConvLayers; ++i) {
        const ConvLayer& L = model.conv[i];
        const ConvShape& want = kConvShapes[i];
        const std::string name = "conv" + std::to_string(i);
        if (L.in_channels != want.in || L.out_channels != want.out || L.kernel != want.kernel)
            throw StructureError(name + ": layer shape does not chain");
        if (kSides[i] < L.kernel || kSides[i] - L.kernel + 1 != kSides[i + 1])
            throw StructureError(name + ": spatial size does not chain");
        if (L.weights.size() != L.weight_count() || L.bias.size() != L.out_channels)
            throw StructureError(name + ": tensor size mismatch");
    }
    for (std::size_t i = 0; i < kNumDenseLayers; ++i) {
        const DenseLayer& L = model.dense[i];
        const std::string name = "dense" + std::to_string(i);
        if (L.inputs != kDenseShapes[i].first || L.outputs != kDenseShapes[i].second)
            throw StructureError(name + ": layer shape does not chain");
        if (L.weights.size() != L.inputs * L.outputs || L.bias.size() != L.outputs)
            throw StructureError(name + ": tensor size mismatch");
    }
}

ScorerModel init_model(std::uint64_t seed) {
    Rng rng(seed);
    ScorerModel m = ScorerModel::zeros();
    for (auto& L : m.conv) {
        const std::size_t area = L.kernel * L.kernel;
        const double limit = glorot_limit(L.in_channels * area, L.out_channels * area);
        for (double& w : L.weights) w = rng.uniform(-limit, limit);
    }
    for (auto& L : m.dense) {
        const double limit = glorot_limit(L.inputs, L.outputs);
        for (double& w : L.weights) w = rng.uniform(-limit, limit);
    }
    return m;
}

double predict(const ScorerModel& model, const FeatureMatrix& m) {
    validate(model);
    Trace<double> t;
    forward(model, m, t);
    return kLabelScale * t.out;
}

double loss(const ScorerModel& model, std::span<const LabeledMatrix> batch, double l2_lambda) {
    validate(model);
    if (batch.empty()) throw ValidationError("loss: empty batch");
    Trace<double> t;
    double sse = 0.0;
    for (const auto& s : batch) {
        forward(model, s.features, t);
        const double r = kLabelScale * t.out - s.label;
        sse += r * r;
    }
    return sse / static_cast<double>(batch.size()) + l2_lambda * conv_weight_sq(model);
}

double training_objective(const ScorerModel& model, std::span<const LabeledMatrix> batch,
                          double l2_lambda, ScorerModel* grad) {
    validate(model);
    if (batch.empty()) throw ValidationError("loss: empty batch");
    if (grad) *grad = ScorerModel::zeros();

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Trace<double> t;
    double sse = 0.0;
    for (const auto& s : batch) {
        forward(model, s.features, t);
        const double r = t.out - s.label / kLabelScale;
        sse += r * r;
        if (grad) backward(model, t, 2.0 * r * inv_n, *grad);
    }
    if (grad) {
        for (std::size_t i = 0; i < kNumConvLayers; ++i)
            for (std::size_t k = 0; k < model.conv[i].weights.size(); ++k)
                grad->conv[i].weights[k] += 2.0 * l2_lambda * model.conv[i].weights[k];
    }
    return sse * inv_n + l2_lambda * conv_weight_sq(model);
}

double gradient_check(const ScorerModel& model, const LabeledMatrix& sample, double eps,
                      double l2_lambda) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ValidationError("gradient_check: eps outside [1e-7, 1e-3]");
    const std::span<const LabeledMatrix> batch(&sample, 1);

    ScorerModel analytic;
    training_objective(model, batch, l2_lambda, &analytic);

    ScorerModel probe = model;
    auto probe_blocks = probe.parameters();
    const auto grad_blocks = std::as_const(analytic).parameters();

    double worst = 0.0;
    for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
        for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
            double& p = probe_blocks[b][i];
            const double saved = p;
            p = saved + eps;
            const long double up = objective_value<long double>(probe, batch, l2_lambda);
            const long double step_up = static_cast<long double>(p) - saved;
            p = saved - eps;
            const long double down = objective_value<long double>(probe, batch, l2_lambda);
            const long double step_down = static_cast<long double>(saved) - p;
            p = saved;

            const auto numeric = static_cast<double>((up - down) / (step_up + step_down));
            const double ga = grad_blocks[b][i];
            const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(ga - numeric) / denom);
        }
    }
    return worst;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
        throw FieldError("learning_rate", "must be a finite non-negative number");
    if (cfg.epochs == 0) throw FieldError("epochs", "must be >= 1");
    if (cfg.batch_size == 0) throw FieldError("batch_size", "must be >= 1");
    if (!(cfg.l2_lambda >= 0.0) || !std::isfinite(cfg.l2_lambda))
        throw FieldError("l2_lambda", "must be a finite non-negative number");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0))
        throw FieldError("train_fraction", "must lie in (0, 1]");
}

std::vector<LabeledMatrix> to_labeled(const Dataset& dataset, const FeatureRanges& ranges) {
    std::vector<LabeledMatrix> out;
    out.reserve(dataset.size());
    for (const Sample& s : dataset.samples)
        out.push_back({normalize_features(s.features, ranges), s.atn_label});
    return out;
}

TrainResult train(ScorerModel model, const Dataset& dataset, const TrainConfig& cfg,
                  const FeatureRanges& ranges) {
    validate(cfg);
    validate(model);
    if (dataset.size() < 2 * cfg.batch_size)
        throw ValidationError("train: dataset has " + std::to_string(dataset.size()) +
                              " samples, need at least 2 * batch_size = " +
                              std::to_string(2 * cfg.batch_size));

    const auto all = to_labeled(dataset, ranges);
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);

    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(all.size()))), 1,
        all.size());
    std::vector<LabeledMatrix> train_set, valid_set;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? train_set : valid_set).push_back(all[order[i]]);

    TrainReport report;
    report.train_samples = train_set.size();
    report.validation_samples = valid_set.size();
    report.initial_train_loss = training_objective(model, train_set, cfg.l2_lambda);

    std::vector<std::size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<LabeledMatrix> batch;
    batch.reserve(cfg.batch_size);
    ScorerModel grad;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);

        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(idx.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[idx[k]]);

            const double batch_loss = training_objective(model, batch, cfg.l2_lambda, &grad);
            if (!std::isfinite(batch_loss)) throw DivergenceError(epoch, "non-finite batch loss");

            auto params = model.parameters();
            const auto grads = std::as_const(grad).parameters();
            for (std::size_t b = 0; b < params.size(); ++b)
                for (std::size_t k = 0; k < params[b].size(); ++k)
                    params[b][k] -= cfg.learning_rate * grads[b][k];
        }

        const double epoch_loss = training_objective(model, train_set, cfg.l2_lambda);
        if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch, "non-finite training loss");
        report.epoch_train_loss.push_back(epoch_loss);
    }

    if (!valid_set.empty()) {
        report.validation_loss = loss(model, valid_set, 0.0);
        std::vector<double> pred, label;
        for (const auto& s : valid_set) {
            pred.push_back(predict(model, s.features));
            label.push_back(s.label);
        }
        report.validation_spearman = spearman(pred, label);
    }
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Model container

namespace {

constexpr std::string_view kMagic = "POAIATN\x01";
constexpr std::uint8_t kKindConv = 1;
constexpr std::uint8_t kKindDense = 2;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { buf_.append(s); }
    std::string& buffer() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(data_[pos_++])} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(data_[pos_++])} << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw FormatError("model payload truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void write_layer(Writer& w, std::uint8_t kind, std::size_t in, std::size_t out, std::size_t kernel,
                 const std::vector<double>& weights, const std::vector<double>& bias) {
    w.u8(kind);
    w.u32(static_cast<std::uint32_t>(in));
    w.u32(static_cast<std::uint32_t>(out));
    w.u32(static_cast<std::uint32_t>(kernel));
    w.u32(static_cast<std::uint32_t>(weights.size()));
    w.u32(static_cast<std::uint32_t>(bias.size()));
    for (double v : weights) w.f64(v);
    for (double v : bias) w.f64(v);
}

void read_values(Reader& r, std::vector<double>& out, std::uint32_t count) {
    if (static_cast<std::size_t>(count) * 8 > r.remaining()) throw FormatError("model payload truncated");
    out.resize(count);
    for (double& v : out) v = r.f64();
}

}  // namespace

std::string save_model(const ScorerModel& model) {
    validate(model);
    Writer w;
    w.raw(kMagic);
    w.u32(kModelFormatVersion);
    w.u32(kNumConvLayers + kNumDenseLayers);
    for (const auto& L : model.conv)
        write_layer(w, kKindConv, L.in_channels, L.out_channels, L.kernel, L.weights, L.bias);
    for (const auto& L : model.dense)
        write_layer(w, kKindDense, L.inputs, L.outputs, 1, L.weights, L.bias);
    const std::uint32_t crc = checksum(w.buffer());
    w.u32(crc);
    return std::move(w.buffer());
}

ScorerModel load_model(std::string_view bytes) {
    if (bytes.empty()) throw FormatError("empty model payload");
    if (bytes.size() < kMagic.size() + 4) throw FormatError("model payload truncated");
    if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("not a scorer model (bad magic)");

    Reader header(bytes.substr(kMagic.size()));
    const std::uint32_t version = header.u32();
    if (version != kModelFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version) +
                          " (expected " + std::to_string(kModelFormatVersion) + ")");

    if (bytes.size() < kMagic.size() + 12) throw FormatError("model payload truncated");
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader trailer(bytes.substr(bytes.size() - 4));
    if (trailer.u32() != checksum(body)) throw FormatError("model checksum mismatch (corrupted or truncated)");

    Reader r(body.substr(kMagic.size() + 4));
    const std::uint32_t layers = r.u32();
    if (layers != kNumConvLayers + kNumDenseLayers)
        throw FormatError("expected 5 layers, found " + std::to_string(layers));

    ScorerModel m;
    for (std::size_t i = 0; i < layers; ++i) {
        const std::uint8_t kind = r.u8();
        const std::uint32_t in = r.u32(), out = r.u32(), kernel = r.u32();
        const std::uint32_t nw = r.u32(), nb = r.u32();
        const bool want_conv = i < kNumConvLayers;
        if (kind != (want_conv ? kKindConv : kKindDense))
            throw FormatError("layer " + std::to_string(i) + ": unexpected layer kind");
        if (want_conv) {
            ConvLayer& L = m.conv[i];
            L.in_channels = in;
            L.out_channels = out;
            L.kernel = kernel;
            read_values(r, L.weights, nw);
            read_values(r, L.bias, nb);
        } else {
            DenseLayer& L = m.dense[i - kNumConvLayers];
            L.inputs = in;
            L.outputs = out;
            read_values(r, L.weights, nw);
            read_values(r, L.bias, nb);
        }
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after last layer");
    try {
        validate(m);
    } catch (const StructureError& e) {
        throw FormatError(std::string("model layout invalid: ") + e.what());
    }
    return m;
}

}  // namespace poai
