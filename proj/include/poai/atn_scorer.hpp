#pragma once

// Convolutional regression network mapping a node's 3x3 feature matrix to
// its predicted average transaction number (ATN).
//
// Architecture (input 1 channel, 3x3):
//   conv 8@2x2 -> relu -> conv 16@2x2 -> relu -> conv 16@1x1 -> relu
//   -> dense 16->8 -> relu -> dense 8->1 (linear)
//
// Pooling and local response normalization are omitted: a 3x3 input leaves
// no spatial extent to pool over. Only the convolution weights carry the L2
// penalty.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poai/node_model.hpp"

namespace poai {

struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::vector<double> weights;  // [out][in][ky][kx]
    std::vector<double> bias;     // [out]

    static ConvLayer zeros(std::size_t in, std::size_t out, std::size_t kernel);
    std::size_t weight_count() const { return out_channels * in_channels * kernel * kernel; }

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out]

    static DenseLayer zeros(std::size_t in, std::size_t out);

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

inline constexpr std::size_t kInputSide = 3;
inline constexpr std::size_t kNumConvLayers = 3;
inline constexpr std::size_t kNumDenseLayers = 2;

// Training targets are label / kLabelScale; predict() undoes the scaling.
inline constexpr double kLabelScale = 200.0;

struct ScorerModel {
    std::array<ConvLayer, kNumConvLayers> conv;
    std::array<DenseLayer, kNumDenseLayers> dense;

    // Every weight and bias zero, canonical shapes.
    static ScorerModel zeros();

    // Parameter blocks in a fixed order: conv0.w, conv0.b, ..., dense1.w, dense1.b.
    std::vector<std::span<double>> parameters();
    std::vector<std::span<const double>> parameters() const;
    std::size_t parameter_count() const;

    friend bool operator==(const ScorerModel&, const ScorerModel&) = default;
};

// Throws StructureError unless shapes chain 3x3x1 -> 2x2x8 -> 1x1x16 -> 1x1x16 -> 8 -> 1.
void validate(const ScorerModel& model);

// Glorot-uniform weights, zero biases.
ScorerModel init_model(std::uint64_t seed);

double predict(const ScorerModel& model, const FeatureMatrix& m);

struct LabeledMatrix {
    FeatureMatrix features;
    double label = 0.0;
};

// Mean squared error in ATN units plus l2_lambda * sum of squared conv weights.
double loss(const ScorerModel& model, std::span<const LabeledMatrix> batch, double l2_lambda);

// The objective minimized during training: MSE against label / kLabelScale
// plus the same conv-weight penalty. When grad is non-null it is overwritten
// with the analytic gradient (same shapes as model).
double training_objective(const ScorerModel& model, std::span<const LabeledMatrix> batch,
                          double l2_lambda, ScorerModel* grad = nullptr);

// Max over all parameters of |g_a - g_n| / max(|g_a|, |g_n|, 1e-8), where g_n is
// the central difference of training_objective at step eps, evaluated in
// extended precision.
double gradient_check(const ScorerModel& model, const LabeledMatrix& sample, double eps,
                      double l2_lambda = 1e-4);

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double l2_lambda = 1e-4;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
};

void validate(const TrainConfig& cfg);

struct TrainReport {
    double initial_train_loss = 0.0;
    std::vector<double> epoch_train_loss;  // training objective over the train split, after each epoch
    std::optional<double> validation_loss;   // loss() in ATN units, held-out split
    std::optional<double> validation_spearman;
    std::size_t train_samples = 0;
    std::size_t validation_samples = 0;
};

struct TrainResult {
    ScorerModel model;
    TrainReport report;
};

// Mini-batch gradient descent. The split into train/validation and the
// per-epoch shuffles are drawn from cfg.seed.
TrainResult train(ScorerModel model, const Dataset& dataset, const TrainConfig& cfg,
                  const FeatureRanges& ranges = FeatureRanges::defaults());

std::vector<LabeledMatrix> to_labeled(const Dataset& dataset,
                                      const FeatureRanges& ranges = FeatureRanges::defaults());

// Binary container; layout documented in README.md.
inline constexpr std::uint32_t kModelFormatVersion = 1;
std::string save_model(const ScorerModel& model);
ScorerModel load_model(std::string_view bytes);

}  // namespace poai
