#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aircast/autograd.hpp"
#include "aircast/error.hpp"
#include "aircast/histo.hpp"
#include "aircast/tensor.hpp"

namespace aircast {

// Loss value split into its two family terms plus per-channel partials.
// total = weather_term + chemical_term.
struct LossBreakdown {
    double total = 0.0;
    double weather_term = 0.0;
    double chemical_term = 0.0;
    std::vector<std::pair<std::string, double>> per_channel;
};

namespace detail {

// Broadcast W_lat over [C, H, W].
inline Tensor lat_weight_raster(const std::vector<std::size_t>& shape,
                                const std::vector<double>& wlat) {
    if (shape.size() != 3) throw DataError("loss: expected [C, H, W] tensors");
    if (wlat.size() != shape[1])
        throw DataError("loss: latitude weight length " + std::to_string(wlat.size()) +
                        " != grid rows " + std::to_string(shape[1]));
    Tensor w({shape[0], shape[1], shape[2]});
    for (std::size_t c = 0; c < shape[0]; ++c)
        for (std::size_t i = 0; i < shape[1]; ++i)
            for (std::size_t j = 0; j < shape[2]; ++j) w.at(c, i, j) = wlat[i];
    return w;
}

}  // namespace detail

// Mean over channels, rows, cols of W_lat[i] * |pred - target|.
inline double lat_weighted_mae(const Tensor& pred, const Tensor& target,
                               const std::vector<double>& wlat) {
    require_same_shape(pred, target, "lat_weighted_mae");
    if (pred.rank() != 3) throw DataError("lat_weighted_mae: expected [C, H, W]");
    if (wlat.size() != pred.dim(1)) throw DataError("lat_weighted_mae: W_lat length mismatch");
    double acc = 0.0;
    for (std::size_t c = 0; c < pred.dim(0); ++c)
        for (std::size_t i = 0; i < pred.dim(1); ++i)
            for (std::size_t j = 0; j < pred.dim(2); ++j)
                acc += wlat[i] * std::abs(pred.at(c, i, j) - target.at(c, i, j));
    return acc / static_cast<double>(pred.size());
}

// Per-channel latitude-weighted RMSE of one sample:
// sqrt(mean over pixels of W_lat * err^2). Averaging across samples is the
// caller's job (RMSE-per-forecast convention).
inline std::vector<double> lat_weighted_rmse(const Tensor& pred, const Tensor& target,
                                             const std::vector<double>& wlat) {
    require_same_shape(pred, target, "lat_weighted_rmse");
    if (pred.rank() != 3) throw DataError("lat_weighted_rmse: expected [C, H, W]");
    if (wlat.size() != pred.dim(1)) throw DataError("lat_weighted_rmse: W_lat length mismatch");
    std::vector<double> out(pred.dim(0));
    const auto pixels = static_cast<double>(pred.dim(1) * pred.dim(2));
    for (std::size_t c = 0; c < pred.dim(0); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.dim(1); ++i)
            for (std::size_t j = 0; j < pred.dim(2); ++j) {
                const double e = pred.at(c, i, j) - target.at(c, i, j);
                acc += wlat[i] * e * e;
            }
        out[c] = std::sqrt(acc / pixels);
    }
    return out;
}

inline std::vector<double> plain_rmse(const Tensor& pred, const Tensor& target) {
    const std::vector<double> ones(pred.rank() == 3 ? pred.dim(1) : 0, 1.0);
    return lat_weighted_rmse(pred, target, ones);
}

// Differentiable Eq.-style combined objective on a tape.
//
//   L = W_lat x MAE(weather) + W_freq x W_lat x MAE(chemical)
//
// The weather half is the latitude-weighted mean absolute error. Each
// chemical channel is a weight-normalized mean: sum(W_freq*W_lat*|err|) /
// sum(W_freq*W_lat), averaged over channels (set normalized = false for the
// unnormalized mean ablation). Frequency weights come from the raw-unit
// target values, never from predictions.
//
// pred_w/pred_aq may be invalid Vars when a family is absent (V = 0).
inline Var fmae_loss_var(Tape& tape, Var pred_w, Var pred_aq, const Tensor& tgt_w,
                         const Tensor& tgt_aq, const Tensor& tgt_aq_raw,
                         const std::vector<double>& wlat,
                         const std::vector<std::string>& weather_channels,
                         const std::vector<std::string>& aq_channels,
                         const FrequencyTableSet& tables, LossBreakdown* breakdown = nullptr,
                         bool normalized = true, bool use_freq_weights = true) {
    std::vector<Var> terms;
    LossBreakdown bd;

    if (pred_w.valid() && tgt_w.size() > 0) {
        require_same_shape(tape.value(pred_w), tgt_w, "fmae_loss weather");
        const Tensor w = detail::lat_weight_raster(tgt_w.shape(), wlat);
        const Var wterm =
            tape.weighted_abs_error(pred_w, tgt_w, w, static_cast<double>(tgt_w.size()));
        bd.weather_term = tape.scalar(wterm);
        terms.push_back(wterm);
        if (weather_channels.size() != tgt_w.dim(0))
            throw DataError("fmae_loss: weather channel list does not match tensor");
        // per-channel partials (diagnostics only, not part of the graph)
        for (std::size_t c = 0; c < tgt_w.dim(0); ++c) {
            double acc = 0.0;
            const auto& vp = tape.value(pred_w);
            for (std::size_t i = 0; i < tgt_w.dim(1); ++i)
                for (std::size_t j = 0; j < tgt_w.dim(2); ++j)
                    acc += wlat[i] * std::abs(vp.at(c, i, j) - tgt_w.at(c, i, j));
            bd.per_channel.emplace_back(weather_channels[c],
                                        acc / static_cast<double>(tgt_w.size()));
        }
    }

    if (pred_aq.valid() && tgt_aq.size() > 0) {
        require_same_shape(tape.value(pred_aq), tgt_aq, "fmae_loss chemical");
        require_same_shape(tgt_aq, tgt_aq_raw, "fmae_loss chemical raw target");
        if (aq_channels.size() != tgt_aq.dim(0))
            throw DataError("fmae_loss: aq channel list does not match tensor");
        const auto vc = tgt_aq.dim(0);
        const auto h = tgt_aq.dim(1);
        const auto w = tgt_aq.dim(2);
        std::vector<Var> channel_terms;
        for (std::size_t c = 0; c < vc; ++c) {
            const FrequencyTable& table = tables.get(aq_channels[c]);
            // combined per-pixel weights over the full [C, H, W] raster with
            // zeros outside channel c, so one fused node serves each channel
            Tensor cw({vc, h, w});
            double wsum = 0.0;
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    const double wf =
                        use_freq_weights ? table.weight_of(tgt_aq_raw.at(c, i, j)) : 1.0;
                    const double cwv = wf * wlat[i];
                    cw.at(c, i, j) = cwv;
                    wsum += cwv;
                }
            const double denom = normalized ? wsum : static_cast<double>(h * w);
            const Var term = tape.weighted_abs_error(pred_aq, tgt_aq, cw, denom);
            channel_terms.push_back(term);
            bd.per_channel.emplace_back(aq_channels[c], tape.scalar(term));
        }
        const Var chem =
            tape.scale(tape.add_scalars(channel_terms), 1.0 / static_cast<double>(vc));
        bd.chemical_term = tape.scalar(chem);
        terms.push_back(chem);
    }

    const Var total = tape.add_scalars(terms);
    bd.total = tape.scalar(total);
    if (breakdown) *breakdown = bd;
    return total;
}

// Plain-value wrapper over the differentiable path: one throwaway tape.
inline LossBreakdown fmae_loss(const Tensor& pred_w, const Tensor& pred_aq, const Tensor& tgt_w,
                               const Tensor& tgt_aq, const Tensor& tgt_aq_raw,
                               const std::vector<double>& wlat,
                               const std::vector<std::string>& weather_channels,
                               const std::vector<std::string>& aq_channels,
                               const FrequencyTableSet& tables, bool normalized = true,
                               bool use_freq_weights = true) {
    Tape tape;
    const Var pw = pred_w.size() > 0 ? tape.leaf(pred_w) : Var{};
    const Var pa = pred_aq.size() > 0 ? tape.leaf(pred_aq) : Var{};
    LossBreakdown bd;
    fmae_loss_var(tape, pw, pa, tgt_w, tgt_aq, tgt_aq_raw, wlat, weather_channels, aq_channels,
                  tables, &bd, normalized, use_freq_weights);
    return bd;
}

}  // namespace aircast
