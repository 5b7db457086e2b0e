#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aircast/autograd.hpp"
#include "aircast/error.hpp"
#include "aircast/rng.hpp"
#include "aircast/tensor.hpp"

namespace aircast {

struct ModelConfig {
    std::size_t patch = 2;
    std::size_t embed_dim = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;
    double mlp_ratio = 4.0;
    std::size_t weather_channels = 0;
    std::size_t aq_channels = 0;
    std::size_t rows = 8;
    std::size_t cols = 14;
    std::size_t lead_hidden = 0;  // 0 -> embed_dim
    std::uint64_t seed = 42;

    std::size_t channels() const { return weather_channels + aq_channels; }
    std::size_t tokens() const { return (rows / patch) * (cols / patch); }
    std::size_t mlp_dim() const {
        return static_cast<std::size_t>(mlp_ratio * static_cast<double>(embed_dim));
    }
    std::size_t lead_dim() const { return lead_hidden == 0 ? embed_dim : lead_hidden; }

    void validate() const {
        if (patch == 0 || rows % patch != 0 || cols % patch != 0)
            throw DataError("model: input " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " not divisible by patch size " + std::to_string(patch));
        if (embed_dim == 0 || embed_dim % heads != 0)
            throw DataError("model: embed_dim must be a positive multiple of heads");
        if (channels() < 1) throw DataError("model: need at least one input channel");
    }

    nlohmann::json to_json() const {
        return {{"patch", patch},
                {"embed_dim", embed_dim},
                {"depth", depth},
                {"heads", heads},
                {"mlp_ratio", mlp_ratio},
                {"weather_channels", weather_channels},
                {"aq_channels", aq_channels},
                {"rows", rows},
                {"cols", cols},
                {"lead_hidden", lead_hidden},
                {"seed", seed}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.patch = j.at("patch").get<std::size_t>();
        c.embed_dim = j.at("embed_dim").get<std::size_t>();
        c.depth = j.at("depth").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.mlp_ratio = j.at("mlp_ratio").get<double>();
        c.weather_channels = j.at("weather_channels").get<std::size_t>();
        c.aq_channels = j.at("aq_channels").get<std::size_t>();
        c.rows = j.at("rows").get<std::size_t>();
        c.cols = j.at("cols").get<std::size_t>();
        c.lead_hidden = j.at("lead_hidden").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        return c;
    }
};

// Named parameter tensors with matching gradient buffers, in a deterministic
// creation order.
class ParamStore {
public:
    Tensor& add(const std::string& name, std::vector<std::size_t> shape) {
        if (index_.count(name)) throw DataError("duplicate parameter '" + name + "'");
        index_[name] = names_.size();
        names_.push_back(name);
        values_.emplace_back(shape);
        grads_.emplace_back(std::move(shape));
        return values_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Tensor& value(const std::string& name) { return values_[at(name)]; }
    const Tensor& value(const std::string& name) const { return values_[at(name)]; }
    Tensor& grad(const std::string& name) { return grads_[at(name)]; }
    const Tensor& grad(const std::string& name) const { return grads_[at(name)]; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t count() const { return names_.size(); }

    Tensor& value_at(std::size_t i) { return values_[i]; }
    const Tensor& value_at(std::size_t i) const { return values_[i]; }
    Tensor& grad_at(std::size_t i) { return grads_[i]; }

    std::size_t total_parameters() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    void zero_grad() {
        for (auto& g : grads_) g.fill(0.0);
    }

private:
    std::size_t at(const std::string& name) const {
        const auto it = index_.find(name);
        if (it == index_.end()) throw DataError("unknown parameter '" + name + "'");
        return it->second;
    }

    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
};

// Forward-pass handles: output rasters plus the tape leaves of every
// parameter, for gradient extraction after backward().
struct ModelOutput {
    Var weather;  // [V_w, H, W], invalid when V_w = 0
    Var aq;       // [V_a, H, W], invalid when V_a = 0
    std::map<std::string, Var> params;
    Tensor agg_attention;  // [N, V] aggregation probabilities (instrumentation)
};

// Dual-head Vision Transformer forecaster: per-variable patch embedding,
// cross-attention variable aggregation, lead-time conditioned pre-norm
// encoder, and separate weather/air-quality linear decoders.
class AirCastModel {
public:
    explicit AirCastModel(ModelConfig config) : cfg_(config) {
        cfg_.validate();
        build_params();
        init_params();
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Deterministic init from the config seed: truncated normal (std 0.02)
    // for weights, zeros for biases, ones for LayerNorm gains.
    void init_params() {
        Rng rng(cfg_.seed);
        for (const auto& name : store_.names()) {
            Tensor& t = store_.value(name);
            const bool is_gain = ends_with(name, ".gamma");
            const bool is_bias = ends_with(name, ".bias") || ends_with(name, ".beta");
            if (is_gain)
                t.fill(1.0);
            else if (is_bias)
                t.fill(0.0);
            else
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.truncated_normal(0.02);
        }
    }

    // --- stage 1: per-variable patch embedding -------------------------
    std::vector<Var> tokenize_variables(Tape& tape, const Tensor& input, ModelOutput& out) const {
        if (input.rank() != 3 || input.dim(0) != cfg_.channels() || input.dim(1) != cfg_.rows ||
            input.dim(2) != cfg_.cols)
            throw DataError("forward: input shape " + input.shape_str() + " does not match config");
        if (!input.all_finite()) throw NumericError("forward: non-finite input");
        std::vector<Var> tokens;
        for (std::size_t v = 0; v < cfg_.channels(); ++v) {
            const Var patches = tape.leaf(patchify(input, v, cfg_.patch));
            const Var w = pvar(tape, out, "embed." + std::to_string(v) + ".weight");
            const Var b = pvar(tape, out, "embed." + std::to_string(v) + ".bias");
            tokens.push_back(tape.add_rowvec(tape.matmul(patches, w), b));
        }
        return tokens;
    }

    // --- stage 2: cross-attention aggregation over variables ------------
    Var aggregate_variables(Tape& tape, const std::vector<Var>& tokens, ModelOutput& out) const {
        return tape.aggregate_attention(tokens, pvar(tape, out, "agg.query"),
                                        pvar(tape, out, "agg.key.weight"),
                                        pvar(tape, out, "agg.key.bias"),
                                        pvar(tape, out, "agg.value.weight"),
                                        pvar(tape, out, "agg.value.bias"), &out.agg_attention);
    }

    // --- stage 3: embeddings + pre-norm transformer blocks --------------
    Var encode(Tape& tape, Var x, double lead_hours, ModelOutput& out) const {
        if (!(lead_hours > 0.0)) throw DataError("encode: lead time must be positive");
        x = tape.add(x, pvar(tape, out, "pos_embed"));
        x = tape.add_rowvec(x, lead_embedding(tape, lead_hours, out));
        for (std::size_t b = 0; b < cfg_.depth; ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            const Var normed1 = tape.layer_norm(x, pvar(tape, out, p + "ln1.gamma"),
                                                pvar(tape, out, p + "ln1.beta"));
            const Var attn = tape.self_attention(
                normed1, pvar(tape, out, p + "attn.qkv.weight"),
                pvar(tape, out, p + "attn.qkv.bias"), pvar(tape, out, p + "attn.out.weight"),
                pvar(tape, out, p + "attn.out.bias"), cfg_.heads);
            x = tape.add(x, attn);
            const Var normed2 = tape.layer_norm(x, pvar(tape, out, p + "ln2.gamma"),
                                                pvar(tape, out, p + "ln2.beta"));
            Var h = tape.add_rowvec(tape.matmul(normed2, pvar(tape, out, p + "mlp.fc1.weight")),
                                    pvar(tape, out, p + "mlp.fc1.bias"));
            h = tape.gelu(h);
            h = tape.add_rowvec(tape.matmul(h, pvar(tape, out, p + "mlp.fc2.weight")),
                                pvar(tape, out, p + "mlp.fc2.bias"));
            x = tape.add(x, h);
            if (!tape.value(x).all_finite())
                throw NumericError("encode: non-finite activations in block " + std::to_string(b));
        }
        return x;
    }

    // --- stage 4: dual linear heads + un-patching -----------------------
    void decode_dual(Tape& tape, Var encoded, ModelOutput& out) const {
        if (cfg_.weather_channels > 0) {
            const Var logits =
                tape.add_rowvec(tape.matmul(encoded, pvar(tape, out, "head.weather.weight")),
                                pvar(tape, out, "head.weather.bias"));
            out.weather =
                tape.unpatch(logits, cfg_.weather_channels, cfg_.rows, cfg_.cols, cfg_.patch);
        }
        if (cfg_.aq_channels > 0) {
            const Var logits =
                tape.add_rowvec(tape.matmul(encoded, pvar(tape, out, "head.aq.weight")),
                                pvar(tape, out, "head.aq.bias"));
            out.aq = tape.unpatch(logits, cfg_.aq_channels, cfg_.rows, cfg_.cols, cfg_.patch);
        }
    }

    ModelOutput forward(Tape& tape, const Tensor& input, double lead_hours) const {
        ModelOutput out;
        const auto tokens = tokenize_variables(tape, input, out);
        const Var agg = aggregate_variables(tape, tokens, out);
        const Var enc = encode(tape, agg, lead_hours, out);
        decode_dual(tape, enc, out);
        return out;
    }

    // Pull tape gradients back into the store after tape.backward(loss).
    void accumulate_grads(const Tape& tape, const ModelOutput& out) {
        for (const auto& [name, var] : out.params) {
            Tensor& g = store_.grad(name);
            const Tensor& tg = tape.grad(var);
            if (tg.size() != g.size()) throw DataError("gradient shape mismatch for " + name);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += tg[i];
        }
    }

    // Closed-form parameter count for the config (asserted in tests).
    static std::size_t expected_parameters(const ModelConfig& c) {
        const auto d = c.embed_dim;
        const auto p2 = c.patch * c.patch;
        const auto n = c.tokens();
        const auto m = c.mlp_dim();
        const auto dh = c.lead_dim();
        std::size_t total = 0;
        total += c.channels() * (p2 * d + d);       // per-variable embeddings
        total += d + 2 * (d * d + d);               // aggregation query + k/v projections
        total += n * d;                             // positional embedding
        total += dh + dh + dh * d + d;              // lead-time MLP (1->dh->d)
        total += c.depth * (4 * d                   // two layer norms
                            + 3 * d * d + 3 * d     // qkv
                            + d * d + d             // attention out
                            + d * m + m + m * d + d);  // mlp
        if (c.weather_channels > 0) total += d * p2 * c.weather_channels + p2 * c.weather_channels;
        if (c.aq_channels > 0) total += d * p2 * c.aq_channels + p2 * c.aq_channels;
        return total;
    }

private:
    static bool ends_with(const std::string& s, const std::string& suffix) {
        return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(),
                                                      suffix) == 0;
    }

    Var lead_embedding(Tape& tape, double lead_hours, ModelOutput& out) const {
        Tensor lt({1, 1});
        lt[0] = lead_hours / 24.0;  // one day = unit scale
        Var h = tape.add_rowvec(tape.matmul(tape.leaf(lt), pvar(tape, out, "lead.fc1.weight")),
                                pvar(tape, out, "lead.fc1.bias"));
        h = tape.gelu(h);
        return tape.add_rowvec(tape.matmul(h, pvar(tape, out, "lead.fc2.weight")),
                               pvar(tape, out, "lead.fc2.bias"));
    }

    // Parameter leaf, registered once per tape.
    Var pvar(Tape& tape, ModelOutput& out, const std::string& name) const {
        const auto it = out.params.find(name);
        if (it != out.params.end()) return it->second;
        const Var v = tape.leaf(store_.value(name));
        out.params.emplace(name, v);
        return v;
    }

    void build_params() {
        const auto d = cfg_.embed_dim;
        const auto p2 = cfg_.patch * cfg_.patch;
        for (std::size_t v = 0; v < cfg_.channels(); ++v) {
            store_.add("embed." + std::to_string(v) + ".weight", {p2, d});
            store_.add("embed." + std::to_string(v) + ".bias", {d});
        }
        store_.add("agg.query", {d});
        store_.add("agg.key.weight", {d, d});
        store_.add("agg.key.bias", {d});
        store_.add("agg.value.weight", {d, d});
        store_.add("agg.value.bias", {d});
        store_.add("pos_embed", {cfg_.tokens(), d});
        store_.add("lead.fc1.weight", {1, cfg_.lead_dim()});
        store_.add("lead.fc1.bias", {cfg_.lead_dim()});
        store_.add("lead.fc2.weight", {cfg_.lead_dim(), d});
        store_.add("lead.fc2.bias", {d});
        for (std::size_t b = 0; b < cfg_.depth; ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            store_.add(p + "ln1.gamma", {d});
            store_.add(p + "ln1.beta", {d});
            store_.add(p + "attn.qkv.weight", {d, 3 * d});
            store_.add(p + "attn.qkv.bias", {3 * d});
            store_.add(p + "attn.out.weight", {d, d});
            store_.add(p + "attn.out.bias", {d});
            store_.add(p + "ln2.gamma", {d});
            store_.add(p + "ln2.beta", {d});
            store_.add(p + "mlp.fc1.weight", {d, cfg_.mlp_dim()});
            store_.add(p + "mlp.fc1.bias", {cfg_.mlp_dim()});
            store_.add(p + "mlp.fc2.weight", {cfg_.mlp_dim(), d});
            store_.add(p + "mlp.fc2.bias", {d});
        }
        if (cfg_.weather_channels > 0) {
            store_.add("head.weather.weight", {d, p2 * cfg_.weather_channels});
            store_.add("head.weather.bias", {p2 * cfg_.weather_channels});
        }
        if (cfg_.aq_channels > 0) {
            store_.add("head.aq.weight", {d, p2 * cfg_.aq_channels});
            store_.add("head.aq.bias", {p2 * cfg_.aq_channels});
        }
    }

    ModelConfig cfg_;
    ParamStore store_;
};

// ---------------------------------------------------------------------------
// Checkpoint container: magic + JSON header + named little-endian float32
// tensors, in store order.
// ---------------------------------------------------------------------------
namespace detail {

constexpr char kCkptMagic[8] = {'A', 'I', 'R', 'C', 'K', 'P', 'T', '1'};

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

inline void write_f32_le(std::ostream& os, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 4);
}

inline float read_f32_le(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

// extra: free-form JSON merged into the header (epoch, val_loss, norm stats
// reference, channel names).
inline void save_checkpoint(const std::string& path, const AirCastModel& model,
                            const nlohmann::json& extra = {}) {
    nlohmann::json header;
    header["config"] = model.config().to_json();
    if (!extra.is_null()) header["extra"] = extra;
    auto& tensors = header["tensors"];
    for (const auto& name : model.params().names()) {
        tensors.push_back({{"name", name}, {"shape", model.params().value(name).shape()}});
    }
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(detail::kCkptMagic, 8);
    detail::write_u64_le(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& name : model.params().names()) {
        const Tensor& t = model.params().value(name);
        for (std::size_t i = 0; i < t.size(); ++i)
            detail::write_f32_le(os, static_cast<float>(t[i]));
    }
    if (!os) throw DataError("checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
    ModelConfig config;
    nlohmann::json extra;
};

// Loads into a freshly constructed model; returns the config and extras.
inline LoadedCheckpoint load_checkpoint(const std::string& path, AirCastModel** model_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw DataError("not an aircast checkpoint: " + path);
    const auto hlen = detail::read_u64_le(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw DataError("truncated checkpoint header: " + path);
    const auto header = nlohmann::json::parse(hs);

    LoadedCheckpoint out;
    out.config = ModelConfig::from_json(header.at("config"));
    if (header.contains("extra")) out.extra = header.at("extra");

    auto* model = new AirCastModel(out.config);
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        Tensor& t = model->params().value(name);
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape()) throw DataError("checkpoint shape mismatch for " + name);
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = static_cast<double>(detail::read_f32_le(is));
    }
    if (!is) throw DataError("truncated checkpoint tensors: " + path);
    *model_out = model;
    return out;
}

}  // namespace aircast
