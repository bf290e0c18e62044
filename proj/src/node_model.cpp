#include "poai/node_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "poai/errors.hpp"
#include "poai/text.hpp"

namespace poai {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "computing_power_ratio", "online_time", "payoff",
    "hop", "connection_number", "latency",
    "discarded_probability", "attacked_probability", "attract_probability",
};

constexpr bool is_fraction(Feature f) {
    return f == Feature::ComputingPowerRatio || f == Feature::DiscardedProbability ||
           f == Feature::AttackedProbability || f == Feature::AttractProbability;
}

constexpr bool is_count(Feature f) { return f == Feature::Hop || f == Feature::ConnectionNumber; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

double NodeFeatures::get(Feature f) const {
    switch (f) {
        case Feature::ComputingPowerRatio: return computing_power_ratio;
        case Feature::OnlineTime: return online_time;
        case Feature::Payoff: return payoff;
        case Feature::Hop: return hop;
        case Feature::ConnectionNumber: return connection_number;
        case Feature::Latency: return latency;
        case Feature::DiscardedProbability: return discarded_probability;
        case Feature::AttackedProbability: return attacked_probability;
        case Feature::AttractProbability: return attract_probability;
    }
    return 0.0;
}

void NodeFeatures::set(Feature f, double value) {
    switch (f) {
        case Feature::ComputingPowerRatio: computing_power_ratio = value; break;
        case Feature::OnlineTime: online_time = value; break;
        case Feature::Payoff: payoff = value; break;
        case Feature::Hop: hop = value; break;
        case Feature::ConnectionNumber: connection_number = value; break;
        case Feature::Latency: latency = value; break;
        case Feature::DiscardedProbability: discarded_probability = value; break;
        case Feature::AttackedProbability: attacked_probability = value; break;
        case Feature::AttractProbability: attract_probability = value; break;
    }
}

void validate(const NodeFeatures& node) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const auto f = static_cast<Feature>(i);
        const double v = node.get(f);
        const std::string name(feature_name(f));
        if (!std::isfinite(v)) throw FieldError(name, "value is not finite");
        if (v < 0.0) throw FieldError(name, "negative value " + format_real(v));
        if (is_fraction(f) && v > 1.0)
            throw FieldError(name, "value " + format_real(v) + " outside [0,1]");
    }
}

FeatureRanges FeatureRanges::defaults() {
    FeatureRanges r;
    r.scales = {{
        {ScaleKind::Linear, 1.0},      // computing power ratio
        {ScaleKind::Linear, 86400.0},  // online time, one day
        {ScaleKind::Log10, 5.0},       // payoff
        {ScaleKind::Linear, 256.0},    // hop
        {ScaleKind::Log10, 6.0},       // connection number
        {ScaleKind::Linear, 1.0},      // latency, seconds
        {ScaleKind::Linear, 1.0},
        {ScaleKind::Linear, 1.0},
        {ScaleKind::Linear, 1.0},
    }};
    return r;
}

void validate(const FeatureRanges& ranges) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double max = ranges.scales[i].max;
        if (!(max > 0.0) || !std::isfinite(max))
            throw FieldError(std::string(feature_name(static_cast<Feature>(i))),
                             "range max must be positive");
    }
}

void validate(const FeatureMatrix& m) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double v = m.values[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw FieldError(std::string(feature_name(static_cast<Feature>(i))),
                             "matrix entry outside [0,1]");
    }
}

FeatureMatrix normalize_features(const NodeFeatures& raw, const FeatureRanges& ranges) {
    validate(raw);
    validate(ranges);
    FeatureMatrix m;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const auto f = static_cast<Feature>(i);
        const FeatureScale& scale = ranges[f];
        const double v = raw.get(f);
        const double scaled = scale.kind == ScaleKind::Log10 ? std::log10(1.0 + v) / scale.max
                                                             : v / scale.max;
        m.values[i] = std::clamp(scaled, 0.0, 1.0);
    }
    return m;
}

double oracle_atn(const FeatureMatrix& m, double noise_std, Rng& rng) {
    validate(m);
    if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
    const double eps = rng.normal(0.0, 1.0) * noise_std;
    double linear = 0.0;
    for (std::size_t i = 0; i < kNumFeatures; ++i) linear += kOracleWeights[i] * m.values[i];
    return std::max(0.0, kOracleScale * sigmoid(4.0 * linear - 1.0) + eps);
}

double oracle_atn(const FeatureMatrix& m) {
    Rng unused(0);
    return oracle_atn(m, 0.0, unused);
}

Dataset generate_dataset(std::size_t n, std::uint64_t seed, double noise_std,
                         const FeatureRanges& ranges) {
    if (n == 0) throw ValidationError("dataset size must be >= 1");
    if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
    validate(ranges);

    Rng rng(seed);
    Dataset d;
    d.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.features.node_id = i + 1;
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            const auto f = static_cast<Feature>(k);
            const FeatureScale& scale = ranges[f];
            const double u = rng.uniform();
            double v = scale.kind == ScaleKind::Log10 ? std::pow(10.0, u * scale.max) - 1.0
                                                      : u * scale.max;
            if (is_count(f)) v = std::round(v);
            if (is_fraction(f)) v = std::min(v, 1.0);
            s.features.set(f, v);
        }
        s.atn_label = oracle_atn(normalize_features(s.features, ranges), noise_std, rng);
        d.samples.push_back(s);
    }
    return d;
}

void save_dataset(const Dataset& d, std::ostream& out) {
    out << kDatasetHeader << '\n';
    for (const Sample& s : d.samples) {
        out << s.features.node_id;
        for (std::size_t k = 0; k < kNumFeatures; ++k)
            out << ',' << format_real(s.features.get(static_cast<Feature>(k)));
        out << ',' << format_real(s.atn_label) << '\n';
    }
}

std::string save_dataset(const Dataset& d) {
    std::ostringstream out;
    save_dataset(d, out);
    return out.str();
}

Dataset load_dataset(std::istream& in) {
    constexpr std::size_t kColumns = kNumFeatures + 2;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetHeader) {
        const auto got = split_fields(line);
        const auto want = split_fields(kDatasetHeader);
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (i >= got.size()) throw ParseError(1, "missing column '" + std::string(want[i]) + "'");
            if (got[i] != want[i])
                throw ParseError(1, "expected column '" + std::string(want[i]) + "', found '" +
                                        std::string(got[i]) + "'");
        }
        throw ParseError(1, "unexpected extra columns in header");
    }

    Dataset d;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != kColumns)
            throw ParseError(line_no, "expected " + std::to_string(kColumns) + " columns, found " +
                                          std::to_string(fields.size()));

        const auto id = parse_real(fields[0]);
        if (!id || *id < 0 || *id != std::floor(*id) || *id > 9.007199254740992e15)
            throw ParseError(line_no, "node_id: not a non-negative integer");

        Sample s;
        s.features.node_id = static_cast<NodeId>(*id);
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            const auto f = static_cast<Feature>(k);
            const auto v = parse_real(fields[k + 1]);
            if (!v) throw ParseError(line_no, std::string(feature_name(f)) + ": non-numeric cell");
            s.features.set(f, *v);
        }
        const auto label = parse_real(fields[kColumns - 1]);
        if (!label) throw ParseError(line_no, "atn_label: non-numeric cell");
        if (*label < 0.0) throw ParseError(line_no, "atn_label: negative value");
        s.atn_label = *label;

        try {
            validate(s.features);
        } catch (const FieldError& e) {
            throw ParseError(line_no, e.what());
        }
        d.samples.push_back(s);
    }
    return d;
}

Dataset load_dataset(std::string_view text) {
    std::istringstream in{std::string(text)};
    return load_dataset(in);
}

}  // namespace poai
