#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aircast/error.hpp"

namespace aircast {

// Linear-interpolation quantile between order statistics (the numpy default).
// Bin edges depend on this choice, so it is part of the contract.
inline double quantile_linear(std::vector<double> sorted_values, double p) {
    const auto n = sorted_values.size();
    if (n == 0) throw DataError("quantile of empty sample");
    const double h = static_cast<double>(n - 1) * p;
    const auto i = static_cast<std::size_t>(h);
    if (i + 1 >= n) return sorted_values[n - 1];
    const double frac = h - static_cast<double>(i);
    return sorted_values[i] + frac * (sorted_values[i + 1] - sorted_values[i]);
}

// Freedman-Diaconis bin width: 2 * IQR * n^(-1/3) over the finite values.
// Returns 0 when the IQR is degenerate; callers fall back to a single bin.
inline double fd_bin_width(const std::vector<double>& values) {
    std::vector<double> finite;
    finite.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) throw NumericError("fd_bin_width: no finite values");
    if (finite.size() < 2) throw DataError("fd_bin_width: need at least 2 values");
    std::sort(finite.begin(), finite.end());
    const double q1 = quantile_linear(finite, 0.25);
    const double q3 = quantile_linear(finite, 0.75);
    const double iqr = q3 - q1;
    return 2.0 * iqr * std::pow(static_cast<double>(finite.size()), -1.0 / 3.0);
}

// Per-channel value histogram with the inverse-effective-number weights
//   w = (1 - beta) / (1 - beta^count),  w = 0 for empty bins.
// beta -> 0 recovers equal weighting, beta -> 1 inverse-frequency weighting.
struct FrequencyTable {
    std::string channel;
    std::vector<double> edges;        // strictly increasing, len = bins + 1
    std::vector<std::int64_t> counts; // len = bins
    double beta = 0.8;
    std::vector<double> weights;      // len = bins

    std::size_t bins() const { return counts.size(); }

    // Bin index for a value; out-of-range values clamp to the edge bins
    // (unseen extremes are exactly what the weighting should emphasize).
    std::size_t bin_of(double value) const {
        if (std::isnan(value)) throw NumericError("frequency table lookup: NaN value");
        if (value <= edges.front()) return 0;
        if (value >= edges.back()) return bins() - 1;
        const auto it = std::upper_bound(edges.begin(), edges.end(), value);
        const auto idx = static_cast<std::size_t>(it - edges.begin()) - 1;
        return std::min(idx, bins() - 1);
    }

    double weight_of(double value) const { return weights[bin_of(value)]; }

    nlohmann::json to_json() const {
        return {{"channel", channel},
                {"beta", beta},
                {"edges", edges},
                {"counts", counts},
                {"weights", weights}};
    }

    static FrequencyTable from_json(const nlohmann::json& j) {
        FrequencyTable t;
        t.channel = j.at("channel").get<std::string>();
        t.beta = j.at("beta").get<double>();
        t.edges = j.at("edges").get<std::vector<double>>();
        t.counts = j.at("counts").get<std::vector<std::int64_t>>();
        t.weights = j.at("weights").get<std::vector<double>>();
        return t;
    }
};

inline double effective_number_weight(std::int64_t count, double beta) {
    if (count <= 0) return 0.0;
    if (beta == 0.0) return 1.0;
    return (1.0 - beta) / (1.0 - std::pow(beta, static_cast<double>(count)));
}

inline FrequencyTable build_frequency_table(const std::string& channel,
                                            const std::vector<double>& values, double beta) {
    if (beta < 0.0 || beta >= 1.0)
        throw UsageError("beta must lie in [0, 1), got " + std::to_string(beta));

    std::vector<double> finite;
    finite.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) throw DataError("frequency table: no finite training values");

    const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double width = finite.size() >= 2 ? fd_bin_width(finite) : 0.0;

    FrequencyTable t;
    t.channel = channel;
    t.beta = beta;
    if (width <= 0.0 || hi <= lo) {
        // degenerate spread: one bin spanning [min, max + eps]
        const double eps = std::max(1e-12, std::abs(hi) * 1e-12);
        t.edges = {lo, hi + eps};
    } else {
        const auto nbins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
        t.edges.resize(nbins + 1);
        for (std::size_t i = 0; i < nbins; ++i) t.edges[i] = lo + width * static_cast<double>(i);
        t.edges[nbins] = hi;  // last bin may be short
        if (t.edges[nbins] <= t.edges[nbins - 1]) {
            t.edges.pop_back();
            t.edges.back() = hi;
        }
    }
    t.counts.assign(t.edges.size() - 1, 0);
    for (double v : finite) t.counts[t.bin_of(v)] += 1;
    t.weights.resize(t.counts.size());
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        t.weights[i] = effective_number_weight(t.counts[i], beta);
    return t;
}

inline double frequency_weight(double value, const FrequencyTable& table) {
    return table.weight_of(value);
}

// Frequency tables for a set of channels, keyed by channel name.
struct FrequencyTableSet {
    std::map<std::string, FrequencyTable> tables;

    const FrequencyTable& get(const std::string& channel) const {
        const auto it = tables.find(channel);
        if (it == tables.end())
            throw DataError("no frequency table for channel '" + channel + "'");
        return it->second;
    }

    bool has(const std::string& channel) const { return tables.count(channel) > 0; }

    void set(FrequencyTable t) { tables[t.channel] = std::move(t); }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [name, t] : tables) arr.push_back(t.to_json());
        return {{"tables", arr}};
    }

    static FrequencyTableSet from_json(const nlohmann::json& j) {
        FrequencyTableSet s;
        for (const auto& t : j.at("tables")) s.set(FrequencyTable::from_json(t));
        return s;
    }
};

// CSV export (bin_lo, bin_hi, count, count_clipped, weight). The clipped
// column reproduces the distribution plots, which cap the frequency axis.
inline std::string frequency_table_csv(const FrequencyTable& t, std::int64_t clip = 0) {
    std::string out = "bin_lo,bin_hi,count,count_clipped,weight\n";
    char buf[160];
    for (std::size_t i = 0; i < t.bins(); ++i) {
        const std::int64_t clipped = clip > 0 ? std::min(t.counts[i], clip) : t.counts[i];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld,%lld,%.17g\n", t.edges[i], t.edges[i + 1],
                      static_cast<long long>(t.counts[i]), static_cast<long long>(clipped),
                      t.weights[i]);
        out += buf;
    }
    return out;
}

}  // namespace aircast
