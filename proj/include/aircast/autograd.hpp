#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "aircast/error.hpp"
#include "aircast/tensor.hpp"

namespace aircast {

// Reverse-mode automatic differentiation on a flat tape. Nodes are created in
// topological order by construction, so the backward pass is a single reverse
// sweep. Attention and the weighted-MAE loss are fused nodes with hand-written
// adjoints; everything is single-threaded and bitwise deterministic.
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

class Tape {
public:
    Var leaf(Tensor value) {
        nodes_.push_back({std::move(value), Tensor{}, nullptr});
        return {static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }

    double scalar(Var v) const {
        const auto& t = value(v);
        if (t.size() != 1) throw DataError("scalar() on non-scalar var " + t.shape_str());
        return t[0];
    }

    std::size_t size() const { return nodes_.size(); }

    // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. Root must be
    // a scalar.
    void backward(Var root) {
        const auto r = static_cast<std::size_t>(check(root));
        if (nodes_[r].value.size() != 1)
            throw DataError("backward: root must be scalar, got " + nodes_[r].value.shape_str());
        for (auto& n : nodes_) {
            n.grad = Tensor(n.value.shape());
        }
        nodes_[r].grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i].backward) nodes_[i].backward(*this, i);
        }
    }

    // ---------------------------------------------------------------
    // Elementwise and linear algebra primitives
    // ---------------------------------------------------------------
    Var add(Var a, Var b) {
        require_same_shape(value(a), value(b), "add");
        Tensor out = value(a);
        const auto& vb = value(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
        return push(std::move(out), [ia = a.idx, ib = b.idx](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            auto& ga = t.nodes_[ia].grad;
            auto& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        });
    }

    Var sub(Var a, Var b) {
        require_same_shape(value(a), value(b), "sub");
        Tensor out = value(a);
        const auto& vb = value(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
        return push(std::move(out), [ia = a.idx, ib = b.idx](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            auto& ga = t.nodes_[ia].grad;
            auto& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        require_same_shape(value(a), value(b), "mul");
        Tensor out = value(a);
        const auto& vb = value(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
        return push(std::move(out), [ia = a.idx, ib = b.idx](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            const auto& va = t.nodes_[ia].value;
            const auto& vb2 = t.nodes_[ib].value;
            auto& ga = t.nodes_[ia].grad;
            auto& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * vb2[i];
                gb[i] += g[i] * va[i];
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
        return push(std::move(out), [ia = a.idx, c](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            auto& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }

    // x: [N, D], row: any tensor with D entries (bias vectors, broadcasts).
    Var add_rowvec(Var x, Var row) {
        const auto& vx = value(x);
        const auto& vr = value(row);
        if (vx.rank() != 2 || vr.size() != vx.dim(1))
            throw DataError("add_rowvec: need [N, D] and D-sized row");
        Tensor out = vx;
        const auto n = vx.dim(0);
        const auto d = vx.dim(1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] += vr[j];
        return push(std::move(out), [ix = x.idx, ir = row.idx, n, d](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            auto& gx = t.nodes_[ix].grad;
            auto& gr = t.nodes_[ir].grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    gx[i * d + j] += g[i * d + j];
                    gr[j] += g[i * d + j];
                }
        });
    }

    // a: [M, K], b: [K, N] -> [M, N]
    Var matmul(Var a, Var b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
            throw DataError("matmul: incompatible shapes " + va.shape_str() + " x " +
                            vb.shape_str());
        const auto m = va.dim(0), k = va.dim(1), n = vb.dim(1);
        Tensor out({m, n});
        matmul_into(va, vb, out);
        return push(std::move(out), [ia = a.idx, ib = b.idx, m, k, n](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;     // [M, N]
            const auto& va2 = t.nodes_[ia].value;    // [M, K]
            const auto& vb2 = t.nodes_[ib].value;    // [K, N]
            auto& ga = t.nodes_[ia].grad;
            auto& gb = t.nodes_[ib].grad;
            // dA = g . B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * vb2[p * n + j];
                }
            // dB = A^T . g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = va2[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                }
        });
    }

    // ---------------------------------------------------------------
    // Nonlinearities
    // ---------------------------------------------------------------
    Var gelu(Var x) {
        const auto& vx = value(x);
        Tensor out = vx;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_fwd(vx[i]);
        return push(std::move(out), [ix = x.idx](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            const auto& vx2 = t.nodes_[ix].value;
            auto& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_bwd(vx2[i]);
        });
    }

    // Row-wise softmax over the last dimension of a rank-2 tensor.
    Var softmax_rows(Var x) {
        const auto& vx = value(x);
        if (vx.rank() != 2) throw DataError("softmax_rows: need rank-2 input");
        const auto n = vx.dim(0), d = vx.dim(1);
        Tensor out = vx;
        for (std::size_t i = 0; i < n; ++i) softmax_inplace(out.data() + i * d, d);
        return push(std::move(out), [n, d, ix = x.idx](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            const auto& p = t.nodes_[self].value;
            auto& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * p[i * d + j];
                for (std::size_t j = 0; j < d; ++j)
                    gx[i * d + j] += p[i * d + j] * (g[i * d + j] - dot);
            }
        });
    }

    // Pre-norm LayerNorm over the last dim of [N, D] with learned gain/bias.
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
        const auto& vx = value(x);
        const auto& vg = value(gamma);
        const auto& vb = value(beta);
        if (vx.rank() != 2 || vg.size() != vx.dim(1) || vb.size() != vx.dim(1))
            throw DataError("layer_norm: need [N, D] input with D-sized gain/bias");
        const auto n = vx.dim(0), d = vx.dim(1);
        Tensor out({n, d});
        Tensor xhat({n, d});
        Tensor inv_sigma({n});
        for (std::size_t i = 0; i < n; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += vx[i * d + j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = vx[i * d + j] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_sigma[i] = is;
            for (std::size_t j = 0; j < d; ++j) {
                const double h = (vx[i * d + j] - mean) * is;
                xhat[i * d + j] = h;
                out[i * d + j] = vg[j] * h + vb[j];
            }
        }
        return push(std::move(out), [ix = x.idx, ig = gamma.idx, ib = beta.idx, n, d,
                                     xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
                                        Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;
            const auto& vg2 = t.nodes_[ig].value;
            auto& gx = t.nodes_[ix].grad;
            auto& gg = t.nodes_[ig].grad;
            auto& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < n; ++i) {
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double go = g[i * d + j];
                    const double h = xhat[i * d + j];
                    gg[j] += go * h;
                    gb[j] += go;
                    const double dh = go * vg2[j];
                    mean_dh += dh;
                    mean_dh_h += dh * h;
                }
                mean_dh /= static_cast<double>(d);
                mean_dh_h /= static_cast<double>(d);
                for (std::size_t j = 0; j < d; ++j) {
                    const double dh = g[i * d + j] * vg2[j];
                    gx[i * d + j] +=
                        inv_sigma[i] * (dh - mean_dh - xhat[i * d + j] * mean_dh_h);
                }
            }
        });
    }

    // ---------------------------------------------------------------
    // Fused attention nodes
    // ---------------------------------------------------------------

    // Multi-head self-attention: x [N, D], wqkv [D, 3D], bqkv [3D],
    // wo [D, D], bo [D]. Returns [N, D].
    Var self_attention(Var x, Var wqkv, Var bqkv, Var wo, Var bo, std::size_t heads) {
        const auto& vx = value(x);
        if (vx.rank() != 2) throw DataError("self_attention: need [N, D] input");
        const auto n = vx.dim(0), d = vx.dim(1);
        if (d % heads != 0) throw DataError("self_attention: D not divisible by heads");
        const auto hd = d / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

        // qkv = x . wqkv + bqkv  -> [N, 3D]
        Tensor qkv({n, 3 * d});
        matmul_into(vx, value(wqkv), qkv);
        {
            const auto& b = value(bqkv);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < 3 * d; ++j) qkv[i * 3 * d + j] += b[j];
        }
        // attention per head
        Tensor probs({heads, n, n});
        Tensor ctx({n, d});  // concatenated head outputs
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < n; ++i) {
                double* row = probs.data() + (h * n + i) * n;
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    const double* qi = qkv.data() + i * 3 * d + h * hd;
                    const double* kj = qkv.data() + j * 3 * d + d + h * hd;
                    for (std::size_t p = 0; p < hd; ++p) s += qi[p] * kj[p];
                    row[j] = s * inv_sqrt;
                }
                softmax_inplace(row, n);
                double* out = ctx.data() + i * d + h * hd;
                for (std::size_t p = 0; p < hd; ++p) out[p] = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double pj = row[j];
                    const double* vj = qkv.data() + j * 3 * d + 2 * d + h * hd;
                    for (std::size_t p = 0; p < hd; ++p) out[p] += pj * vj[p];
                }
            }
        }
        // y = ctx . wo + bo
        Tensor y({n, d});
        matmul_into(ctx, value(wo), y);
        {
            const auto& b = value(bo);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) y[i * d + j] += b[j];
        }
        return push(std::move(y), [ix = x.idx, iw = wqkv.idx, ibq = bqkv.idx, io = wo.idx,
                                   ibo = bo.idx, n, d, hd, heads, inv_sqrt, qkv = std::move(qkv),
                                   probs = std::move(probs),
                                   ctx = std::move(ctx)](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;  // [N, D]
            auto& gx = t.nodes_[ix].grad;
            auto& gw = t.nodes_[iw].grad;
            auto& gbq = t.nodes_[ibq].grad;
            auto& go = t.nodes_[io].grad;
            auto& gbo = t.nodes_[ibo].grad;
            const auto& vx2 = t.nodes_[ix].value;
            const auto& wqkv2 = t.nodes_[iw].value;
            const auto& wo2 = t.nodes_[io].value;

            // y = ctx . wo + bo
            Tensor dctx({n, d});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double gij = g[i * d + j];
                    gbo[j] += gij;
                    for (std::size_t p = 0; p < d; ++p) {
                        go[p * d + j] += ctx[i * d + p] * gij;
                        dctx[i * d + p] += gij * wo2[p * d + j];
                    }
                }

            Tensor dqkv({n, 3 * d});
            for (std::size_t h = 0; h < heads; ++h) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double* prow = probs.data() + (h * n + i) * n;
                    const double* dout = dctx.data() + i * d + h * hd;
                    // dV and dP
                    std::vector<double> dp(n);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double* vj = qkv.data() + j * 3 * d + 2 * d + h * hd;
                        double acc = 0.0;
                        for (std::size_t p = 0; p < hd; ++p) acc += dout[p] * vj[p];
                        dp[j] = acc;
                        double* dvj = dqkv.data() + j * 3 * d + 2 * d + h * hd;
                        for (std::size_t p = 0; p < hd; ++p) dvj[p] += prow[j] * dout[p];
                    }
                    // softmax adjoint
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += dp[j] * prow[j];
                    for (std::size_t j = 0; j < n; ++j) {
                        const double ds = prow[j] * (dp[j] - dot) * inv_sqrt;
                        const double* kj = qkv.data() + j * 3 * d + d + h * hd;
                        const double* qi = qkv.data() + i * 3 * d + h * hd;
                        double* dqi = dqkv.data() + i * 3 * d + h * hd;
                        double* dkj = dqkv.data() + j * 3 * d + d + h * hd;
                        for (std::size_t p = 0; p < hd; ++p) {
                            dqi[p] += ds * kj[p];
                            dkj[p] += ds * qi[p];
                        }
                    }
                }
            }
            // qkv = x . wqkv + bqkv
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < 3 * d; ++j) {
                    const double gij = dqkv[i * 3 * d + j];
                    if (gij == 0.0) continue;
                    gbq[j] += gij;
                    for (std::size_t p = 0; p < d; ++p) {
                        gw[p * 3 * d + j] += vx2[i * d + p] * gij;
                        gx[i * d + p] += gij * wqkv2[p * 3 * d + j];
                    }
                }
        });
    }

    // Cross-attention aggregation over variables: tokens are V vars of shape
    // [N, D]; a learned D-sized query attends over the V variable tokens at
    // each spatial position. Returns [N, D]. If attn_out is non-null the
    // attention probabilities [N, V] are copied out (test instrumentation).
    Var aggregate_attention(const std::vector<Var>& tokens, Var query, Var wk, Var bk, Var wv,
                            Var bv, Tensor* attn_out = nullptr) {
        const auto v = tokens.size();
        if (v == 0) throw DataError("aggregate_attention: no variables");
        const auto& t0 = value(tokens[0]);
        if (t0.rank() != 2) throw DataError("aggregate_attention: tokens must be [N, D]");
        const auto n = t0.dim(0), d = t0.dim(1);
        for (const auto& tok : tokens) require_same_shape(value(tok), t0, "aggregate_attention");
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));

        // keys/values per variable
        Tensor keys({v, n, d});
        Tensor vals({v, n, d});
        for (std::size_t a = 0; a < v; ++a) {
            Tensor k({n, d}), val({n, d});
            matmul_into(value(tokens[a]), value(wk), k);
            matmul_into(value(tokens[a]), value(wv), val);
            const auto& vbk = value(bk);
            const auto& vbv = value(bv);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    keys[(a * n + i) * d + j] = k[i * d + j] + vbk[j];
                    vals[(a * n + i) * d + j] = val[i * d + j] + vbv[j];
                }
        }
        // attention over variables at each position
        const auto& q = value(query);
        if (q.size() != d) throw DataError("aggregate_attention: query must be D-sized");
        Tensor probs({n, v});
        Tensor out({n, d});
        for (std::size_t i = 0; i < n; ++i) {
            double* prow = probs.data() + i * v;
            for (std::size_t a = 0; a < v; ++a) {
                double s = 0.0;
                const double* ka = keys.data() + (a * n + i) * d;
                for (std::size_t j = 0; j < d; ++j) s += q[j] * ka[j];
                prow[a] = s * inv_sqrt;
            }
            softmax_inplace(prow, v);
            double* orow = out.data() + i * d;
            for (std::size_t a = 0; a < v; ++a) {
                const double* va = vals.data() + (a * n + i) * d;
                for (std::size_t j = 0; j < d; ++j) orow[j] += prow[a] * va[j];
            }
        }
        if (attn_out) *attn_out = probs;

        std::vector<int> tok_idx(v);
        for (std::size_t a = 0; a < v; ++a) tok_idx[a] = tokens[a].idx;
        return push(std::move(out), [tok_idx, iq = query.idx, iwk = wk.idx, ibk = bk.idx,
                                     iwv = wv.idx, ibv = bv.idx, n, d, v, inv_sqrt,
                                     keys = std::move(keys), vals = std::move(vals),
                                     probs = std::move(probs)](Tape& t, std::size_t self) {
            const auto& g = t.nodes_[self].grad;  // [N, D]
            const auto& q2 = t.nodes_[iq].value;
            auto& gq = t.nodes_[iq].grad;
            Tensor dkeys({v, n, d});
            Tensor dvals({v, n, d});
            for (std::size_t i = 0; i < n; ++i) {
                const double* prow = probs.data() + i * v;
                const double* grow = g.data() + i * d;
                std::vector<double> dp(v);
                for (std::size_t a = 0; a < v; ++a) {
                    const double* va = vals.data() + (a * n + i) * d;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d; ++j) acc += grow[j] * va[j];
                    dp[a] = acc;
                    double* dva = dvals.data() + (a * n + i) * d;
                    for (std::size_t j = 0; j < d; ++j) dva[j] += prow[a] * grow[j];
                }
                double dot = 0.0;
                for (std::size_t a = 0; a < v; ++a) dot += dp[a] * prow[a];
                for (std::size_t a = 0; a < v; ++a) {
                    const double ds = prow[a] * (dp[a] - dot) * inv_sqrt;
                    const double* ka = keys.data() + (a * n + i) * d;
                    double* dka = dkeys.data() + (a * n + i) * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        gq[j] += ds * ka[j];
                        dka[j] += ds * q2[j];
                    }
                }
            }
            // keys = tok . wk + bk, vals = tok . wv + bv
            const auto& wk2 = t.nodes_[iwk].value;
            const auto& wv2 = t.nodes_[iwv].value;
            auto& gwk = t.nodes_[iwk].grad;
            auto& gbk = t.nodes_[ibk].grad;
            auto& gwv = t.nodes_[iwv].grad;
            auto& gbv = t.nodes_[ibv].grad;
            for (std::size_t a = 0; a < v; ++a) {
                const auto& tok = t.nodes_[tok_idx[a]].value;
                auto& gtok = t.nodes_[tok_idx[a]].grad;
                for (std::size_t i = 0; i < n; ++i) {
                    const double* dka = dkeys.data() + (a * n + i) * d;
                    const double* dva = dvals.data() + (a * n + i) * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        gbk[j] += dka[j];
                        gbv[j] += dva[j];
                        for (std::size_t p = 0; p < d; ++p) {
                            gwk[p * d + j] += tok[i * d + p] * dka[j];
                            gwv[p * d + j] += tok[i * d + p] * dva[j];
                            gtok[i * d + p] += dka[j] * wk2[p * d + j] + dva[j] * wv2[p * d + j];
                        }
                    }
                }
            }
        });
    }

    // ---------------------------------------------------------------
    // Patch bookkeeping and losses
    // ---------------------------------------------------------------

    // x: [N, p*p*C] per-token head output -> [C, H, W] raster. Column layout
    // within a token is channel-major: c*p*p + pi*p + pj.
    Var unpatch(Var x, std::size_t channels, std::size_t h, std::size_t w, std::size_t p) {
        const auto& vx = value(x);
        const auto bh = h / p, bw = w / p;
        if (vx.rank() != 2 || vx.dim(0) != bh * bw || vx.dim(1) != p * p * channels)
            throw DataError("unpatch: shape mismatch");
        Tensor out({channels, h, w});
        const auto cols = vx.dim(1);
        for (std::size_t n = 0; n < bh * bw; ++n) {
            const auto bi = n / bw, bj = n % bw;
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t pi = 0; pi < p; ++pi)
                    for (std::size_t pj = 0; pj < p; ++pj)
                        out[(c * h + bi * p + pi) * w + bj * p + pj] =
                            vx[n * cols + c * p * p + pi * p + pj];
        }
        return push(std::move(out),
                    [ix = x.idx, channels, h, w, p, bw, cols](Tape& t, std::size_t self) {
                        const auto& g = t.nodes_[self].grad;
                        auto& gx = t.nodes_[ix].grad;
                        const auto bh2 = h / p;
                        for (std::size_t n = 0; n < bh2 * bw; ++n) {
                            const auto bi = n / bw, bj = n % bw;
                            for (std::size_t c = 0; c < channels; ++c)
                                for (std::size_t pi = 0; pi < p; ++pi)
                                    for (std::size_t pj = 0; pj < p; ++pj)
                                        gx[n * cols + c * p * p + pi * p + pj] +=
                                            g[(c * h + bi * p + pi) * w + bj * p + pj];
                        }
                    });
    }

    // sum_i weights[i] * |pred[i] - target[i]| / denom, with subgradient 0 at
    // exactly zero error. Target and weights are plain tensors (constants).
    Var weighted_abs_error(Var pred, const Tensor& target, const Tensor& weights, double denom) {
        const auto& vp = value(pred);
        require_same_shape(vp, target, "weighted_abs_error");
        require_same_shape(vp, weights, "weighted_abs_error");
        if (denom == 0.0) return leaf(Tensor::scalar(0.0));
        double acc = 0.0;
        for (std::size_t i = 0; i < vp.size(); ++i)
            acc += weights[i] * std::abs(vp[i] - target[i]);
        return push(Tensor::scalar(acc / denom),
                    [ip = pred.idx, target, weights, denom](Tape& t, std::size_t self) {
                        const double g = t.nodes_[self].grad[0];
                        const auto& vp2 = t.nodes_[ip].value;
                        auto& gp = t.nodes_[ip].grad;
                        for (std::size_t i = 0; i < vp2.size(); ++i) {
                            const double e = vp2[i] - target[i];
                            const double s = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
                            gp[i] += g * weights[i] * s / denom;
                        }
                    });
    }

    Var sum_all(Var x) {
        const auto& vx = value(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < vx.size(); ++i) acc += vx[i];
        return push(Tensor::scalar(acc), [ix = x.idx](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad[0];
            auto& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }

    Var add_scalars(const std::vector<Var>& terms) {
        if (terms.empty()) return leaf(Tensor::scalar(0.0));
        double acc = 0.0;
        for (Var v : terms) acc += scalar(v);
        std::vector<int> idx;
        for (Var v : terms) idx.push_back(v.idx);
        return push(Tensor::scalar(acc), [idx](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad[0];
            for (int i : idx) t.nodes_[i].grad[0] += g;
        });
    }

    static void softmax_inplace(double* row, std::size_t n) {
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, std::size_t)> backward;
    };

    int check(Var v) const {
        if (!v.valid() || static_cast<std::size_t>(v.idx) >= nodes_.size())
            throw DataError("invalid tape variable");
        return v.idx;
    }

    Var push(Tensor value, std::function<void(Tape&, std::size_t)> backward) {
        nodes_.push_back({std::move(value), Tensor{}, std::move(backward)});
        return {static_cast<int>(nodes_.size()) - 1};
    }

    static void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
        const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
        out.fill(0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = a[i * k + p];
                if (aip == 0.0) continue;
                const double* brow = b.data() + p * n;
                double* orow = out.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
            }
    }

    static double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

    static double gelu_bwd(double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        return cdf + x * pdf;
    }

    std::vector<Node> nodes_;
};

// Plain-tensor patch extraction: [C, H, W] -> per-channel token matrix
// [N, p*p] with N = (H/p)*(W/p). The inverse of Tape::unpatch's layout.
inline Tensor patchify(const Tensor& raster, std::size_t channel, std::size_t p) {
    const auto h = raster.dim(1), w = raster.dim(2);
    if (h % p != 0 || w % p != 0)
        throw DataError("patchify: raster " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by patch size " + std::to_string(p));
    const auto bh = h / p, bw = w / p;
    Tensor out({bh * bw, p * p});
    for (std::size_t n = 0; n < bh * bw; ++n) {
        const auto bi = n / bw, bj = n % bw;
        for (std::size_t pi = 0; pi < p; ++pi)
            for (std::size_t pj = 0; pj < p; ++pj)
                out[n * p * p + pi * p + pj] =
                    raster[(channel * h + bi * p + pi) * w + bj * p + pj];
    }
    return out;
}

}  // namespace aircast
