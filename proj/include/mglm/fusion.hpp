#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "mglm/tensor.hpp"
#include "mglm/tokenizer.hpp"

namespace mglm {

enum class FusionMode { max_pool, mean_pool, concat, single_grained };

const char* fusion_mode_name(FusionMode m);

// How the fine-grained and coarse-grained embedding vectors merge into one
// d_model-wide vector per position. Pooling modes keep both tables at
// d_model; concat splits it as d_fine + d_coarse.
struct FusionConfig {
    FusionMode mode = FusionMode::max_pool;
    int d_model = 64;
    int d_fine = 64;
    int d_coarse = 64;

    static FusionConfig pooled(FusionMode mode, int d_model) {
        return {mode, d_model, d_model, d_model};
    }
    static FusionConfig cat(int d_fine, int d_coarse) {
        return {FusionMode::concat, d_fine + d_coarse, d_fine, d_coarse};
    }

    void validate() const {
        if (d_model <= 0) throw ConfigError("fusion: d_model must be positive");
        if (mode == FusionMode::concat) {
            if (d_fine <= 0 || d_coarse <= 0)
                throw ConfigError("fusion: concat dimensions must be positive");
            if (d_fine + d_coarse != d_model)
                throw ConfigError("fusion: concat dimensions must sum to d_model");
        } else {
            if (d_fine != d_model || d_coarse != d_model)
                throw ConfigError("fusion: pooled modes require d_fine == d_coarse == d_model");
        }
    }
};

// Per-position fusion kernels. `fine` has length d_fine, `coarse` length
// d_coarse; the result has length d_model.
template <typename T>
std::vector<T> fuse_forward(const FusionConfig& cfg, const std::vector<T>& fine,
                            const std::vector<T>& coarse) {
    std::vector<T> out(static_cast<size_t>(cfg.d_model));
    switch (cfg.mode) {
        case FusionMode::max_pool:
            for (int j = 0; j < cfg.d_model; ++j)
                out[j] = std::max(fine[static_cast<size_t>(j)], coarse[static_cast<size_t>(j)]);
            break;
        case FusionMode::mean_pool:
            for (int j = 0; j < cfg.d_model; ++j)
                out[j] = (fine[static_cast<size_t>(j)] + coarse[static_cast<size_t>(j)]) * T(0.5);
            break;
        case FusionMode::concat:
            for (int j = 0; j < cfg.d_fine; ++j) out[j] = fine[static_cast<size_t>(j)];
            for (int j = 0; j < cfg.d_coarse; ++j)
                out[static_cast<size_t>(cfg.d_fine) + j] = coarse[static_cast<size_t>(j)];
            break;
        case FusionMode::single_grained:
            for (int j = 0; j < cfg.d_model; ++j) out[j] = fine[static_cast<size_t>(j)];
            break;
    }
    return out;
}

// Routes an upstream gradient to the two inputs. Max-pool ties send the
// gradient to the fine-grained input.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> fuse_backward(const FusionConfig& cfg,
                                                        const std::vector<T>& grad,
                                                        const std::vector<T>& fine,
                                                        const std::vector<T>& coarse) {
    std::vector<T> gf(static_cast<size_t>(cfg.d_fine), T(0));
    std::vector<T> gc(static_cast<size_t>(cfg.d_coarse), T(0));
    switch (cfg.mode) {
        case FusionMode::max_pool:
            for (int j = 0; j < cfg.d_model; ++j) {
                if (fine[static_cast<size_t>(j)] >= coarse[static_cast<size_t>(j)])
                    gf[j] = grad[static_cast<size_t>(j)];
                else
                    gc[j] = grad[static_cast<size_t>(j)];
            }
            break;
        case FusionMode::mean_pool:
            for (int j = 0; j < cfg.d_model; ++j) {
                gf[j] = grad[static_cast<size_t>(j)] * T(0.5);
                gc[j] = grad[static_cast<size_t>(j)] * T(0.5);
            }
            break;
        case FusionMode::concat:
            for (int j = 0; j < cfg.d_fine; ++j) gf[j] = grad[static_cast<size_t>(j)];
            for (int j = 0; j < cfg.d_coarse; ++j)
                gc[j] = grad[static_cast<size_t>(cfg.d_fine) + j];
            break;
        case FusionMode::single_grained:
            for (int j = 0; j < cfg.d_model; ++j) gf[j] = grad[static_cast<size_t>(j)];
            break;
    }
    return {std::move(gf), std::move(gc)};
}

namespace ops {

// Embedding + fusion for a whole sequence: per position i inside span
// (j,k,c), fused(fine_table[id_i], coarse_table[c]) + position_table[i].
// The coarse row is broadcast across its span, so its gradient accumulates
// over every position of the span.
template <typename T>
TensorT<T> embed_sequence(const std::vector<int>& fine_ids, const std::vector<Span>& spans,
                          const TensorT<T>& fine_table, const TensorT<T>& coarse_table,
                          const TensorT<T>& pos_table, const FusionConfig& cfg) {
    cfg.validate();
    const int len = static_cast<int>(fine_ids.size());
    const int d = cfg.d_model;
    if (fine_table.dim(1) != cfg.d_fine || coarse_table.dim(1) != cfg.d_coarse ||
        pos_table.dim(1) != d)
        throw ConfigError("embed_sequence: table widths do not match the fusion config");
    if (len > pos_table.dim(0))
        throw ConfigError("embed_sequence: sequence longer than the position table");

    std::vector<int> coarse_of(static_cast<size_t>(len), -1);
    for (const Span& s : spans) {
        if (s.start < 0 || s.end > len || s.end <= s.start)
            throw DataError("embed_sequence: span out of range");
        if (s.coarse_id < 0 || s.coarse_id >= coarse_table.dim(0))
            throw DataError("embed_sequence: coarse id out of range");
        for (int i = s.start; i < s.end; ++i) coarse_of[static_cast<size_t>(i)] = s.coarse_id;
    }
    std::vector<T> y(static_cast<size_t>(len) * d);
    const int df = cfg.d_fine, dc = cfg.d_coarse;
    for (int i = 0; i < len; ++i) {
        const int fid = fine_ids[static_cast<size_t>(i)];
        if (fid < 0 || fid >= fine_table.dim(0))
            throw DataError("embed_sequence: fine id out of range");
        const int cid = coarse_of[static_cast<size_t>(i)];
        if (cid < 0) throw DataError("embed_sequence: spans do not cover position " +
                                     std::to_string(i));
        const T* f = fine_table.values().data() + static_cast<size_t>(fid) * df;
        const T* c = coarse_table.values().data() + static_cast<size_t>(cid) * dc;
        const T* p = pos_table.values().data() + static_cast<size_t>(i) * d;
        T* row = y.data() + static_cast<size_t>(i) * d;
        switch (cfg.mode) {
            case FusionMode::max_pool:
                for (int j = 0; j < d; ++j) row[j] = std::max(f[j], c[j]) + p[j];
                break;
            case FusionMode::mean_pool:
                for (int j = 0; j < d; ++j) row[j] = (f[j] + c[j]) * T(0.5) + p[j];
                break;
            case FusionMode::concat:
                for (int j = 0; j < df; ++j) row[j] = f[j] + p[j];
                for (int j = 0; j < dc; ++j) row[df + j] = c[j] + p[df + j];
                break;
            case FusionMode::single_grained:
                for (int j = 0; j < d; ++j) row[j] = f[j] + p[j];
                break;
        }
    }
    TensorT<T> out =
        TensorT<T>::make_op({len, d}, std::move(y), {fine_table, coarse_table, pos_table});
    auto fn = fine_table.node(), cn = coarse_table.node(), pn = pos_table.node(),
         on = out.node();
    out.set_backward([fn, cn, pn, on, fine_ids, coarse_of = std::move(coarse_of), cfg, len, d,
                      df, dc] {
        const auto& g = on->grad;
        if (pn->requires_grad) pn->ensure_grad();
        if (fn->requires_grad) fn->ensure_grad();
        if (cn->requires_grad) cn->ensure_grad();
        for (int i = 0; i < len; ++i) {
            const int fid = fine_ids[static_cast<size_t>(i)];
            const int cid = coarse_of[static_cast<size_t>(i)];
            const T* grow = g.data() + static_cast<size_t>(i) * d;
            if (pn->requires_grad) {
                T* pg = pn->grad.data() + static_cast<size_t>(i) * d;
                for (int j = 0; j < d; ++j) pg[j] += grow[j];
            }
            T* fg = fn->requires_grad ? fn->grad.data() + static_cast<size_t>(fid) * df : nullptr;
            T* cg = cn->requires_grad ? cn->grad.data() + static_cast<size_t>(cid) * dc : nullptr;
            const T* f = fn->values.data() + static_cast<size_t>(fid) * df;
            const T* c = cn->values.data() + static_cast<size_t>(cid) * dc;
            switch (cfg.mode) {
                case FusionMode::max_pool:
                    for (int j = 0; j < d; ++j) {
                        if (f[j] >= c[j]) {
                            if (fg) fg[j] += grow[j];
                        } else if (cg) {
                            cg[j] += grow[j];
                        }
                    }
                    break;
                case FusionMode::mean_pool:
                    for (int j = 0; j < d; ++j) {
                        if (fg) fg[j] += grow[j] * T(0.5);
                        if (cg) cg[j] += grow[j] * T(0.5);
                    }
                    break;
                case FusionMode::concat:
                    for (int j = 0; j < df; ++j)
                        if (fg) fg[j] += grow[j];
                    for (int j = 0; j < dc; ++j)
                        if (cg) cg[j] += grow[df + j];
                    break;
                case FusionMode::single_grained:
                    for (int j = 0; j < d; ++j)
                        if (fg) fg[j] += grow[j];
                    break;
            }
        }
    });
    return out;
}

}  // namespace ops

}  // namespace mglm
