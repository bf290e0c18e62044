#pragma once

// Node state, feature normalization, dataset I/O and the synthetic
// ground-truth ATN used to label generated data.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "poai/rng.hpp"

namespace poai {

using NodeId = std::uint64_t;

inline constexpr std::size_t kNumFeatures = 9;

// Matrix order: row 0 node properties (CRT), row 1 network nature (HCL),
// row 2 safety elements (DAA).
enum class Feature : std::size_t {
    ComputingPowerRatio = 0,
    OnlineTime,
    Payoff,
    Hop,
    ConnectionNumber,
    Latency,
    DiscardedProbability,
    AttackedProbability,
    AttractProbability,
};

std::string_view feature_name(Feature f);

struct NodeFeatures {
    NodeId node_id = 0;
    double computing_power_ratio = 0.0;  // share of network compute, [0,1]
    double online_time = 0.0;            // seconds
    double payoff = 0.0;                 // coin-seconds
    double hop = 0.0;                    // count
    double connection_number = 0.0;      // count
    double latency = 0.0;                // seconds
    double discarded_probability = 0.0;
    double attacked_probability = 0.0;
    double attract_probability = 0.0;

    double get(Feature f) const;
    void set(Feature f, double value);

    friend bool operator==(const NodeFeatures&, const NodeFeatures&) = default;
};

// Throws FieldError naming the first offending field.
void validate(const NodeFeatures& node);

enum class ScaleKind { Linear, Log10 };

struct FeatureScale {
    ScaleKind kind = ScaleKind::Linear;
    double max = 1.0;
};

struct FeatureRanges {
    std::array<FeatureScale, kNumFeatures> scales;

    const FeatureScale& operator[](Feature f) const { return scales[static_cast<std::size_t>(f)]; }

    static FeatureRanges defaults();
};

void validate(const FeatureRanges& ranges);

struct FeatureMatrix {
    std::array<double, kNumFeatures> values{};  // row-major 3x3

    double operator()(std::size_t row, std::size_t col) const { return values[row * 3 + col]; }
    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// Throws ValidationError if any entry lies outside [0,1].
void validate(const FeatureMatrix& m);

FeatureMatrix normalize_features(const NodeFeatures& raw,
                                 const FeatureRanges& ranges = FeatureRanges::defaults());

// Weights of the linear score inside the logistic ground truth, matrix order.
inline constexpr std::array<double, kNumFeatures> kOracleWeights = {
    0.35, 0.10, 0.25,    // cpr, online, payoff
    -0.15, 0.10, -0.20,  // hop, connections, latency
    -0.10, -0.30, -0.05  // discarded, attacked, attract
};
inline constexpr double kOracleScale = 200.0;

// 200 * sigmoid(4 * w.m - 1) + N(0, noise_std^2), floored at 0.
// Always consumes two draws, so features generated under different noise
// levels with the same seed coincide.
double oracle_atn(const FeatureMatrix& m, double noise_std, Rng& rng);
double oracle_atn(const FeatureMatrix& m);

struct Sample {
    NodeFeatures features;
    double atn_label = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// n nodes with ids 1..n; each sample consumes the generator in a fixed
// pattern, so generate_dataset(n, s) is a prefix of generate_dataset(n + k, s).
Dataset generate_dataset(std::size_t n, std::uint64_t seed, double noise_std,
                         const FeatureRanges& ranges = FeatureRanges::defaults());

inline constexpr std::string_view kDatasetHeader =
    "node_id,computing_power_ratio,online_time_s,payoff,hop,connection_number,latency_s,"
    "discarded_probability,attacked_probability,attract_probability,atn_label";

void save_dataset(const Dataset& d, std::ostream& out);
std::string save_dataset(const Dataset& d);

// Throws ParseError (with 1-based line number) on malformed input.
Dataset load_dataset(std::istream& in);
Dataset load_dataset(std::string_view text);

}  // namespace poai
