#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aircast/error.hpp"
#include "aircast/tensor.hpp"

namespace aircast {

// Floor constant of the scaled log transform, in raw concentration units.
constexpr double kLogFloor = 1e-4;

// (log(max(x, 1e-4)) - log(1e-4)) / log(1e-4). Zero at the floor, -1 at x = 1,
// and non-positive for x >= 1e-4 (the denominator is negative).
inline double scaled_log(double x) {
    if (std::isnan(x)) throw NumericError("scaled_log: NaN input");
    const double l = std::log(kLogFloor);
    return (std::log(std::max(x, kLogFloor)) - l) / l;
}

// exp(L * (y + 1)) with L = log(1e-4); exact inverse of scaled_log above the
// floor.
inline double inverse_scaled_log(double y) {
    if (std::isnan(y)) throw NumericError("inverse_scaled_log: NaN input");
    const double l = std::log(kLogFloor);
    return std::exp(l * (y + 1.0));
}

enum class TransformKind { zscore, log_then_zscore };

inline const char* transform_kind_name(TransformKind k) {
    return k == TransformKind::zscore ? "zscore" : "log_then_zscore";
}

inline TransformKind transform_kind_from_name(const std::string& s) {
    if (s == "zscore") return TransformKind::zscore;
    if (s == "log_then_zscore") return TransformKind::log_then_zscore;
    throw DataError("unknown transform kind '" + s + "'");
}

struct ChannelStats {
    TransformKind kind = TransformKind::zscore;
    double mean = 0.0;
    double std = 1.0;
};

// Per-channel normalization statistics, fitted on the training split only.
// Weather channels are z-scored; air-quality channels go through the scaled
// log transform first and are z-scored in log space (disable the log-space
// z-score with aq_zscore = false to keep the bare log transform).
class NormStats {
public:
    NormStats() = default;

    void set(const std::string& channel, ChannelStats cs) { stats_[channel] = cs; }

    const ChannelStats& get(const std::string& channel) const {
        const auto it = stats_.find(channel);
        if (it == stats_.end()) throw DataError("no normalization stats for channel '" + channel + "'");
        return it->second;
    }

    bool has(const std::string& channel) const { return stats_.count(channel) > 0; }
    std::size_t size() const { return stats_.size(); }
    const std::map<std::string, ChannelStats>& all() const { return stats_; }

    double apply_value(const std::string& channel, double x) const {
        const auto& cs = get(channel);
        const double v = cs.kind == TransformKind::log_then_zscore ? scaled_log(x) : x;
        return (v - cs.mean) / cs.std;
    }

    double invert_value(const std::string& channel, double y) const {
        const auto& cs = get(channel);
        const double v = y * cs.std + cs.mean;
        return cs.kind == TransformKind::log_then_zscore ? inverse_scaled_log(v) : v;
    }

    void apply(const std::string& channel, Tensor& t) const {
        const auto& cs = get(channel);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double v =
                cs.kind == TransformKind::log_then_zscore ? scaled_log(t[i]) : t[i];
            t[i] = (v - cs.mean) / cs.std;
        }
    }

    void invert(const std::string& channel, Tensor& t) const {
        const auto& cs = get(channel);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double v = t[i] * cs.std + cs.mean;
            t[i] = cs.kind == TransformKind::log_then_zscore ? inverse_scaled_log(v) : v;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["floor"] = kLogFloor;
        auto& chans = j["channels"];
        for (const auto& [name, cs] : stats_) {
            chans[name] = {{"kind", transform_kind_name(cs.kind)},
                           {"mean", cs.mean},
                           {"std", cs.std}};
        }
        return j;
    }

    static NormStats from_json(const nlohmann::json& j) {
        NormStats ns;
        for (const auto& [name, v] : j.at("channels").items()) {
            ChannelStats cs;
            cs.kind = transform_kind_from_name(v.at("kind").get<std::string>());
            cs.mean = v.at("mean").get<double>();
            cs.std = v.at("std").get<double>();
            ns.set(name, cs);
        }
        return ns;
    }

private:
    std::map<std::string, ChannelStats> stats_;
};

// Fit mean/std for one channel from training-split values. For the log path
// the moments are taken in log space. Degenerate (zero-variance) channels are
// rejected by name.
template <typename Iterable>
inline ChannelStats fit_channel_stats(const std::string& channel, const Iterable& values,
                                      TransformKind kind, bool zscore = true) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : values) {
        if (std::isnan(x)) throw NumericError("fit_stats: NaN in channel '" + channel + "'");
        sum += kind == TransformKind::log_then_zscore ? scaled_log(x) : x;
        ++n;
    }
    if (n == 0) throw DataError("fit_stats: channel '" + channel + "' has no training values");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double x : values) {
        const double v = kind == TransformKind::log_then_zscore ? scaled_log(x) : x;
        ss += (v - mean) * (v - mean);
    }
    const double var = ss / static_cast<double>(n);
    ChannelStats cs;
    cs.kind = kind;
    if (!zscore) return cs;  // identity affine part, log only
    cs.mean = mean;
    cs.std = std::sqrt(var);
    if (!(cs.std > 0.0))
        throw DataError("fit_stats: channel '" + channel + "' has zero variance");
    return cs;
}

}  // namespace aircast
