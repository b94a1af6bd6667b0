#include "mvlab/model.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "mvlab/common.hpp"
#include "mvlab/io.hpp"

namespace mvlab {

using json = nlohmann::json;

void DenoiserConfig::validate() const {
    MV_CHECK_ARG(layers >= 1, "DenoiserConfig: layers must be >= 1");
    MV_CHECK_ARG(heads >= 1, "DenoiserConfig: heads must be >= 1");
    MV_CHECK_ARG(head_dim >= 2 && head_dim % 2 == 0, "DenoiserConfig: head_dim must be even");
    MV_CHECK_ARG(channels >= 1, "DenoiserConfig: channels must be >= 1");
    MV_CHECK_ARG(vocab_size >= 1, "DenoiserConfig: vocab_size must be >= 1");
    MV_CHECK_ARG(cond_dropout >= 0.0 && cond_dropout < 1.0,
                 "DenoiserConfig: cond_dropout must be in [0,1)");
    MV_CHECK_ARG(total_steps >= 1, "DenoiserConfig: total_steps must be >= 1");
    if (scheme.kind == SchemeKind::TS) {
        MV_CHECK_ARG(scheme.ts_delta >= 1, "DenoiserConfig: ts_delta must be >= 1");
    }
}

Eigen::MatrixXd& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    MV_CHECK_ARG(index_.find(name) == index_.end(), "duplicate parameter: " + name);
    index_[name] = params_.size();
    params_.push_back({name, Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols)});
    return params_.back().value;
}

Parameter& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    MV_CHECK_ARG(it != index_.end(), "unknown parameter: " + name);
    return params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    MV_CHECK_ARG(it != index_.end(), "unknown parameter: " + name);
    return params_[it->second];
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p.grad.setZero();
}

std::int64_t ParamStore::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

namespace {

Eigen::RowVectorXd sinusoidal_embedding(double s, int dim) {
    const int half = dim / 2;
    Eigen::RowVectorXd out(dim);
    for (int j = 0; j < half; ++j) {
        const double freq = std::exp(-std::log(10000.0) * j / half);
        out[j] = std::sin(s * freq);
        out[half + j] = std::cos(s * freq);
    }
    return out;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
    const double sig = 1.0 / (1.0 + std::exp(-x));
    return sig * (1.0 + x * (1.0 - sig));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

constexpr double kLnEps = 1e-6;

LayerNormCache layer_norm(const Eigen::MatrixXd& x) {
    LayerNormCache cache;
    cache.normed.resize(x.rows(), x.cols());
    cache.inv_std.resize(x.rows());
    const double d = static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).mean();
        Eigen::RowVectorXd centered = x.row(i).array() - mu;
        const double var = centered.squaredNorm() / d;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.normed.row(i) = centered * inv;
        cache.inv_std(i) = inv;
    }
    return cache;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormCache& cache) {
    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const auto y = cache.normed.row(i).array();
        const auto g = dy.row(i).array();
        const double m1 = g.mean();
        const double m2 = (g * y).mean();
        dx.row(i) = (cache.inv_std(i) * (g - m1 - y * m2)).matrix();
    }
    return dx;
}

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd scores) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp();
        scores.row(i) /= scores.row(i).sum();
    }
    return scores;
}

Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& dprobs) {
    Eigen::MatrixXd ds(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double dot = probs.row(i).dot(dprobs.row(i));
        ds.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
    }
    return ds;
}

// u * (1 + scale) + shift over a contiguous row block.
void modulate_block(Eigen::MatrixXd& out, const Eigen::MatrixXd& u, Eigen::Index row0,
                    Eigen::Index nrows, const Eigen::RowVectorXd& shift,
                    const Eigen::RowVectorXd& scale) {
    if (nrows == 0) return;
    out.middleRows(row0, nrows) =
        ((u.middleRows(row0, nrows).array().rowwise() * (1.0 + scale.array())).rowwise() +
         shift.array())
            .matrix();
}

void modulate_block_backward(const Eigen::MatrixXd& dmod, const Eigen::MatrixXd& u,
                             Eigen::Index row0, Eigen::Index nrows,
                             const Eigen::RowVectorXd& scale, Eigen::MatrixXd& du,
                             Eigen::RowVectorXd& dshift, Eigen::RowVectorXd& dscale) {
    if (nrows == 0) {
        dshift.setZero();
        dscale.setZero();
        return;
    }
    du.middleRows(row0, nrows) =
        (dmod.middleRows(row0, nrows).array().rowwise() * (1.0 + scale.array())).matrix();
    dshift = dmod.middleRows(row0, nrows).colwise().sum();
    dscale = (dmod.middleRows(row0, nrows).array() * u.middleRows(row0, nrows).array())
                 .colwise()
                 .sum();
}

void gate_block(Eigen::MatrixXd& h, const Eigen::MatrixXd& z, Eigen::Index row0,
                Eigen::Index nrows, const Eigen::RowVectorXd& gate) {
    if (nrows == 0) return;
    h.middleRows(row0, nrows) +=
        (z.middleRows(row0, nrows).array().rowwise() * gate.array()).matrix();
}

}  // namespace

Denoiser::Denoiser(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    freqs_ = rope_frequencies(cfg_.head_dim);
    const int d = cfg_.model_dim();
    const int f = cfg_.hidden_dim();
    const int c = cfg_.channels;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    auto randomize = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
    };

    randomize(params_.add("in_proj.w", c, d));
    params_.add("in_proj.b", 1, d);
    randomize(params_.add("t_mlp.w1", d, d));
    params_.add("t_mlp.b1", 1, d);
    randomize(params_.add("t_mlp.w2", d, d));
    params_.add("t_mlp.b2", 1, d);
    randomize(params_.add("text_emb", cfg_.vocab_size, d));
    for (int i = 0; i < cfg_.layers; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        params_.add(p + "mod.w", d, 6 * d);
        params_.add(p + "mod.b", 1, 6 * d);
        randomize(params_.add(p + "qkv.w", d, 3 * d));
        params_.add(p + "qkv.b", 1, 3 * d);
        randomize(params_.add(p + "att_out.w", d, d));
        params_.add(p + "att_out.b", 1, d);
        randomize(params_.add(p + "cr_q.w", d, d));
        params_.add(p + "cr_q.b", 1, d);
        randomize(params_.add(p + "cr_kv.w", d, 2 * d));
        params_.add(p + "cr_kv.b", 1, 2 * d);
        params_.add(p + "cr_out.w", d, d);
        params_.add(p + "cr_out.b", 1, d);
        randomize(params_.add(p + "mlp.w1", d, f));
        params_.add(p + "mlp.b1", 1, f);
        randomize(params_.add(p + "mlp.w2", f, d));
        params_.add(p + "mlp.b2", 1, d);
    }
    params_.add("final.mod.w", d, 2 * d);
    params_.add("final.mod.b", 1, 2 * d);
    params_.add("head.w", d, c);
    params_.add("head.b", 1, c);
}

LatentVideo Denoiser::forward(const LatentVideo& xt, double t, const ReferenceSet* refs,
                              const Prompt* prompt) const {
    DenoiseCache cache;
    return forward(xt, t, refs, prompt, cache);
}

LatentVideo Denoiser::forward(const LatentVideo& xt, double t, const ReferenceSet* refs,
                              const Prompt* prompt, DenoiseCache& cache) const {
    xt.validate();
    MV_CHECK_ARG(xt.grid.channels == cfg_.channels, "denoise: channel count mismatch");
    MV_CHECK_ARG(t >= 0.0 && t <= 1.0, "denoise: t out of [0,1]");

    const int d = cfg_.model_dim();
    const int dh = cfg_.head_dim;
    const int heads = cfg_.heads;
    const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));

    const bool has_ref = refs != nullptr && !refs->empty();
    ReferenceShape ref_shape;
    if (has_ref) {
        refs->validate(xt.grid);
        ref_shape = refs->shape();
    }
    cache.layout = build_layout(xt.grid, ref_shape, cfg_.scheme);
    cache.n_video = xt.grid.video_tokens();
    cache.n_ref = static_cast<int>(cache.layout.size()) - cache.n_video;
    const Eigen::Index nv = cache.n_video;
    const Eigen::Index nr = cache.n_ref;
    const Eigen::Index n = nv + nr;

    cache.x_tokens.resize(n, cfg_.channels);
    cache.x_tokens.topRows(nv) = video_token_features(xt);
    if (has_ref) cache.x_tokens.bottomRows(nr) = reference_token_features(*refs);

    cache.has_text = prompt != nullptr && !prompt->ids.empty();
    if (cache.has_text) {
        prompt->validate(cfg_.vocab_size);
        cache.prompt_ids = prompt->ids;
        const Eigen::Index l = static_cast<Eigen::Index>(cache.prompt_ids.size());
        cache.text_tokens.resize(l, d);
        const auto& table = params_.at("text_emb").value;
        for (Eigen::Index i = 0; i < l; ++i) {
            cache.text_tokens.row(i) = table.row(cache.prompt_ids[static_cast<std::size_t>(i)]);
        }
    }

    // Conditioning vectors; reference tokens are clean, so they take t = 0.
    auto run_cond = [&](double tv, ConditioningCache& cc) {
        cc.sincos = sinusoidal_embedding(tv * cfg_.total_steps, d);
        cc.hidden_pre = cc.sincos * params_.at("t_mlp.w1").value + params_.at("t_mlp.b1").value;
        Eigen::RowVectorXd hidden = cc.hidden_pre.unaryExpr([](double x) { return silu(x); });
        cc.c = hidden * params_.at("t_mlp.w2").value + params_.at("t_mlp.b2").value;
        cc.mod_final = cc.c * params_.at("final.mod.w").value + params_.at("final.mod.b").value;
        cc.mod_blocks.resize(static_cast<std::size_t>(cfg_.layers));
        for (int i = 0; i < cfg_.layers; ++i) {
            const std::string p = "blk" + std::to_string(i) + ".";
            cc.mod_blocks[static_cast<std::size_t>(i)] =
                cc.c * params_.at(p + "mod.w").value + params_.at(p + "mod.b").value;
        }
    };
    run_cond(t, cache.cond_video);
    if (nr > 0) run_cond(0.0, cache.cond_ref);

    Eigen::MatrixXd h = (cache.x_tokens * params_.at("in_proj.w").value).rowwise() +
                        params_.at("in_proj.b").value.row(0);

    cache.blocks.resize(static_cast<std::size_t>(cfg_.layers));
    for (int blk = 0; blk < cfg_.layers; ++blk) {
        const std::string p = "blk" + std::to_string(blk) + ".";
        BlockCache& bc = cache.blocks[static_cast<std::size_t>(blk)];
        const Eigen::RowVectorXd& mod_v = cache.cond_video.mod_blocks[static_cast<std::size_t>(blk)];
        const Eigen::RowVectorXd mod_r =
            nr > 0 ? cache.cond_ref.mod_blocks[static_cast<std::size_t>(blk)]
                   : Eigen::RowVectorXd::Zero(6 * d);

        bc.h_in = h;
        bc.ln1 = layer_norm(h);
        bc.att.input.resize(n, d);
        modulate_block(bc.att.input, bc.ln1.normed, 0, nv, mod_v.segment(0, d),
                       mod_v.segment(d, d));
        modulate_block(bc.att.input, bc.ln1.normed, nv, nr, mod_r.segment(0, d),
                       mod_r.segment(d, d));

        Eigen::MatrixXd qkv = (bc.att.input * params_.at(p + "qkv.w").value).rowwise() +
                              params_.at(p + "qkv.b").value.row(0);
        bc.att.q = qkv.leftCols(d);
        bc.att.k = qkv.middleCols(d, d);
        bc.att.v = qkv.rightCols(d);
        for (int hd = 0; hd < heads; ++hd) {
            apply_rope(bc.att.q.middleCols(hd * dh, dh), cache.layout, freqs_);
            apply_rope(bc.att.k.middleCols(hd * dh, dh), cache.layout, freqs_);
        }
        bc.att.probs.resize(static_cast<std::size_t>(heads));
        bc.att.concat.resize(n, d);
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = bc.att.q.middleCols(hd * dh, dh);
            const auto kh = bc.att.k.middleCols(hd * dh, dh);
            const auto vh = bc.att.v.middleCols(hd * dh, dh);
            Eigen::MatrixXd& probs = bc.att.probs[static_cast<std::size_t>(hd)];
            probs = softmax_rows(qh * kh.transpose() * alpha);
            bc.att.concat.middleCols(hd * dh, dh) = probs * vh;
        }
        bc.att_out = (bc.att.concat * params_.at(p + "att_out.w").value).rowwise() +
                     params_.at(p + "att_out.b").value.row(0);
        gate_block(h, bc.att_out, 0, nv, mod_v.segment(2 * d, d));
        gate_block(h, bc.att_out, nv, nr, mod_r.segment(2 * d, d));
        bc.h_mid = h;

        if (cache.has_text) {
            bc.ln_cross = layer_norm(h);
            bc.cross.q = (bc.ln_cross.normed * params_.at(p + "cr_q.w").value).rowwise() +
                         params_.at(p + "cr_q.b").value.row(0);
            Eigen::MatrixXd kv = (cache.text_tokens * params_.at(p + "cr_kv.w").value).rowwise() +
                                 params_.at(p + "cr_kv.b").value.row(0);
            bc.cross.k = kv.leftCols(d);
            bc.cross.v = kv.rightCols(d);
            bc.cross.probs.resize(static_cast<std::size_t>(heads));
            bc.cross.concat.resize(n, d);
            for (int hd = 0; hd < heads; ++hd) {
                const auto qh = bc.cross.q.middleCols(hd * dh, dh);
                const auto kh = bc.cross.k.middleCols(hd * dh, dh);
                const auto vh = bc.cross.v.middleCols(hd * dh, dh);
                Eigen::MatrixXd& probs = bc.cross.probs[static_cast<std::size_t>(hd)];
                probs = softmax_rows(qh * kh.transpose() * alpha);
                bc.cross.concat.middleCols(hd * dh, dh) = probs * vh;
            }
            h += (bc.cross.concat * params_.at(p + "cr_out.w").value).rowwise() +
                 params_.at(p + "cr_out.b").value.row(0);
        }
        bc.h_mid2 = h;

        bc.ln2 = layer_norm(h);
        bc.mlp_input.resize(n, d);
        modulate_block(bc.mlp_input, bc.ln2.normed, 0, nv, mod_v.segment(3 * d, d),
                       mod_v.segment(4 * d, d));
        modulate_block(bc.mlp_input, bc.ln2.normed, nv, nr, mod_r.segment(3 * d, d),
                       mod_r.segment(4 * d, d));
        bc.mlp_pre = (bc.mlp_input * params_.at(p + "mlp.w1").value).rowwise() +
                     params_.at(p + "mlp.b1").value.row(0);
        bc.mlp_act = bc.mlp_pre.unaryExpr([](double x) { return gelu(x); });
        bc.mlp_out = (bc.mlp_act * params_.at(p + "mlp.w2").value).rowwise() +
                     params_.at(p + "mlp.b2").value.row(0);
        gate_block(h, bc.mlp_out, 0, nv, mod_v.segment(5 * d, d));
        gate_block(h, bc.mlp_out, nv, nr, mod_r.segment(5 * d, d));
    }

    cache.ln_final = layer_norm(h);
    cache.final_modulated.resize(n, d);
    modulate_block(cache.final_modulated, cache.ln_final.normed, 0, nv,
                   cache.cond_video.mod_final.segment(0, d),
                   cache.cond_video.mod_final.segment(d, d));
    if (nr > 0) {
        modulate_block(cache.final_modulated, cache.ln_final.normed, nv, nr,
                       cache.cond_ref.mod_final.segment(0, d),
                       cache.cond_ref.mod_final.segment(d, d));
    }
    const Eigen::MatrixXd out =
        (cache.final_modulated.topRows(nv) * params_.at("head.w").value).rowwise() +
        params_.at("head.b").value.row(0);
    LatentVideo pred = video_from_token_rows(out, xt.grid);
    MV_CHECK(pred.data.allFinite(), "denoise: non-finite prediction");
    return pred;
}

void Denoiser::backward(const LatentVideo& dpred, const DenoiseCache& cache) {
    const int d = cfg_.model_dim();
    const int dh = cfg_.head_dim;
    const int heads = cfg_.heads;
    const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index nv = cache.n_video;
    const Eigen::Index nr = cache.n_ref;
    const Eigen::Index n = nv + nr;

    auto& P = params_;
    const Eigen::MatrixXd dout = video_token_features(dpred);

    // Conditioning gradients accumulate across every modulation site.
    Eigen::RowVectorXd dc_v = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd dc_r = Eigen::RowVectorXd::Zero(d);

    // Final head.
    P.at("head.w").grad += cache.final_modulated.topRows(nv).transpose() * dout;
    P.at("head.b").grad.row(0) += dout.colwise().sum();
    Eigen::MatrixXd dmodulated = Eigen::MatrixXd::Zero(n, d);
    dmodulated.topRows(nv) = dout * P.at("head.w").value.transpose();

    Eigen::MatrixXd du(n, d);
    du.setZero();
    Eigen::RowVectorXd dshift(d), dscale(d);
    modulate_block_backward(dmodulated, cache.ln_final.normed, 0, nv,
                            cache.cond_video.mod_final.segment(d, d), du, dshift, dscale);
    {
        Eigen::RowVectorXd dmod_f(2 * d);
        dmod_f << dshift, dscale;
        P.at("final.mod.w").grad += cache.cond_video.c.transpose() * dmod_f;
        P.at("final.mod.b").grad.row(0) += dmod_f;
        dc_v += dmod_f * P.at("final.mod.w").value.transpose();
    }
    if (nr > 0) {
        modulate_block_backward(dmodulated, cache.ln_final.normed, nv, nr,
                                cache.cond_ref.mod_final.segment(d, d), du, dshift, dscale);
        Eigen::RowVectorXd dmod_f(2 * d);
        dmod_f << dshift, dscale;
        P.at("final.mod.w").grad += cache.cond_ref.c.transpose() * dmod_f;
        P.at("final.mod.b").grad.row(0) += dmod_f;
        dc_r += dmod_f * P.at("final.mod.w").value.transpose();
    }
    Eigen::MatrixXd dstream = layer_norm_backward(du, cache.ln_final);

    for (int blk = cfg_.layers - 1; blk >= 0; --blk) {
        const std::string p = "blk" + std::to_string(blk) + ".";
        const BlockCache& bc = cache.blocks[static_cast<std::size_t>(blk)];
        const Eigen::RowVectorXd& mod_v = cache.cond_video.mod_blocks[static_cast<std::size_t>(blk)];
        const Eigen::RowVectorXd mod_r =
            nr > 0 ? cache.cond_ref.mod_blocks[static_cast<std::size_t>(blk)]
                   : Eigen::RowVectorXd::Zero(6 * d);
        Eigen::RowVectorXd dmod_v = Eigen::RowVectorXd::Zero(6 * d);
        Eigen::RowVectorXd dmod_r = Eigen::RowVectorXd::Zero(6 * d);

        // MLP branch: h_out = h_mid2 + gate2 * mlp_out.
        Eigen::MatrixXd dz(n, d);
        dz.topRows(nv) = (dstream.topRows(nv).array().rowwise() *
                          mod_v.segment(5 * d, d).array()).matrix();
        if (nr > 0) {
            dz.bottomRows(nr) =
                (dstream.bottomRows(nr).array().rowwise() * mod_r.segment(5 * d, d).array()).matrix();
        }
        dmod_v.segment(5 * d, d) =
            (dstream.topRows(nv).array() * bc.mlp_out.topRows(nv).array()).colwise().sum();
        if (nr > 0) {
            dmod_r.segment(5 * d, d) =
                (dstream.bottomRows(nr).array() * bc.mlp_out.bottomRows(nr).array()).colwise().sum();
        }
        P.at(p + "mlp.w2").grad += bc.mlp_act.transpose() * dz;
        P.at(p + "mlp.b2").grad.row(0) += dz.colwise().sum();
        Eigen::MatrixXd dact = dz * P.at(p + "mlp.w2").value.transpose();
        Eigen::MatrixXd dpre =
            dact.array() * bc.mlp_pre.unaryExpr([](double x) { return gelu_grad(x); }).array();
        P.at(p + "mlp.w1").grad += bc.mlp_input.transpose() * dpre;
        P.at(p + "mlp.b1").grad.row(0) += dpre.colwise().sum();
        Eigen::MatrixXd dmlp_in = dpre * P.at(p + "mlp.w1").value.transpose();
        du.setZero();
        modulate_block_backward(dmlp_in, bc.ln2.normed, 0, nv, mod_v.segment(4 * d, d), du,
                                dshift, dscale);
        dmod_v.segment(3 * d, d) = dshift;
        dmod_v.segment(4 * d, d) = dscale;
        modulate_block_backward(dmlp_in, bc.ln2.normed, nv, nr, mod_r.segment(4 * d, d), du,
                                dshift, dscale);
        dmod_r.segment(3 * d, d) = dshift;
        dmod_r.segment(4 * d, d) = dscale;
        dstream += layer_norm_backward(du, bc.ln2);

        // Cross-attention branch: h_mid2 = h_mid + cross projection.
        if (cache.has_text) {
            const Eigen::MatrixXd& dcr = dstream;
            P.at(p + "cr_out.w").grad += bc.cross.concat.transpose() * dcr;
            P.at(p + "cr_out.b").grad.row(0) += dcr.colwise().sum();
            const Eigen::MatrixXd dconcat = dcr * P.at(p + "cr_out.w").value.transpose();
            const Eigen::Index l = cache.text_tokens.rows();
            Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, d);
            Eigen::MatrixXd dkv = Eigen::MatrixXd::Zero(l, 2 * d);
            for (int hd = 0; hd < heads; ++hd) {
                const auto qh = bc.cross.q.middleCols(hd * dh, dh);
                const auto kh = bc.cross.k.middleCols(hd * dh, dh);
                const auto vh = bc.cross.v.middleCols(hd * dh, dh);
                const Eigen::MatrixXd& probs = bc.cross.probs[static_cast<std::size_t>(hd)];
                const auto dch = dconcat.middleCols(hd * dh, dh);
                const Eigen::MatrixXd dprobs = dch * vh.transpose();
                dkv.middleCols(d + hd * dh, dh) += probs.transpose() * dch;
                const Eigen::MatrixXd ds = softmax_rows_backward(probs, dprobs);
                dq.middleCols(hd * dh, dh) = ds * kh * alpha;
                dkv.middleCols(hd * dh, dh) += ds.transpose() * qh * alpha;
            }
            P.at(p + "cr_q.w").grad += bc.ln_cross.normed.transpose() * dq;
            P.at(p + "cr_q.b").grad.row(0) += dq.colwise().sum();
            const Eigen::MatrixXd dw = dq * P.at(p + "cr_q.w").value.transpose();
            P.at(p + "cr_kv.w").grad += cache.text_tokens.transpose() * dkv;
            P.at(p + "cr_kv.b").grad.row(0) += dkv.colwise().sum();
            const Eigen::MatrixXd dtext = dkv * P.at(p + "cr_kv.w").value.transpose();
            auto& emb_grad = P.at("text_emb").grad;
            for (Eigen::Index i = 0; i < l; ++i) {
                emb_grad.row(cache.prompt_ids[static_cast<std::size_t>(i)]) += dtext.row(i);
            }
            dstream += layer_norm_backward(dw, bc.ln_cross);
        }

        // Self-attention branch: h_mid = h_in + gate1 * att_out.
        dz.topRows(nv) =
            (dstream.topRows(nv).array().rowwise() * mod_v.segment(2 * d, d).array()).matrix();
        if (nr > 0) {
            dz.bottomRows(nr) =
                (dstream.bottomRows(nr).array().rowwise() * mod_r.segment(2 * d, d).array()).matrix();
        }
        dmod_v.segment(2 * d, d) =
            (dstream.topRows(nv).array() * bc.att_out.topRows(nv).array()).colwise().sum();
        if (nr > 0) {
            dmod_r.segment(2 * d, d) =
                (dstream.bottomRows(nr).array() * bc.att_out.bottomRows(nr).array()).colwise().sum();
        }
        P.at(p + "att_out.w").grad += bc.att.concat.transpose() * dz;
        P.at(p + "att_out.b").grad.row(0) += dz.colwise().sum();
        const Eigen::MatrixXd dconcat = dz * P.at(p + "att_out.w").value.transpose();
        Eigen::MatrixXd dqkv = Eigen::MatrixXd::Zero(n, 3 * d);
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = bc.att.q.middleCols(hd * dh, dh);
            const auto kh = bc.att.k.middleCols(hd * dh, dh);
            const auto vh = bc.att.v.middleCols(hd * dh, dh);
            const Eigen::MatrixXd& probs = bc.att.probs[static_cast<std::size_t>(hd)];
            const auto dch = dconcat.middleCols(hd * dh, dh);
            const Eigen::MatrixXd dprobs = dch * vh.transpose();
            dqkv.middleCols(2 * d + hd * dh, dh) = probs.transpose() * dch;
            const Eigen::MatrixXd ds = softmax_rows_backward(probs, dprobs);
            dqkv.middleCols(hd * dh, dh) = ds * kh * alpha;
            dqkv.middleCols(d + hd * dh, dh) = ds.transpose() * qh * alpha;
            // Rotations are orthogonal, so the adjoint is the inverse rotation.
            apply_rope(dqkv.middleCols(hd * dh, dh), cache.layout, freqs_,
                       RopeDirection::Inverse);
            apply_rope(dqkv.middleCols(d + hd * dh, dh), cache.layout, freqs_,
                       RopeDirection::Inverse);
        }
        P.at(p + "qkv.w").grad += bc.att.input.transpose() * dqkv;
        P.at(p + "qkv.b").grad.row(0) += dqkv.colwise().sum();
        const Eigen::MatrixXd datt_in = dqkv * P.at(p + "qkv.w").value.transpose();
        du.setZero();
        modulate_block_backward(datt_in, bc.ln1.normed, 0, nv, mod_v.segment(d, d), du, dshift,
                                dscale);
        dmod_v.segment(0, d) = dshift;
        dmod_v.segment(d, d) = dscale;
        modulate_block_backward(datt_in, bc.ln1.normed, nv, nr, mod_r.segment(d, d), du, dshift,
                                dscale);
        dmod_r.segment(0, d) = dshift;
        dmod_r.segment(d, d) = dscale;
        dstream += layer_norm_backward(du, bc.ln1);

        P.at(p + "mod.w").grad += cache.cond_video.c.transpose() * dmod_v;
        P.at(p + "mod.b").grad.row(0) += dmod_v;
        dc_v += dmod_v * P.at(p + "mod.w").value.transpose();
        if (nr > 0) {
            P.at(p + "mod.w").grad += cache.cond_ref.c.transpose() * dmod_r;
            P.at(p + "mod.b").grad.row(0) += dmod_r;
            dc_r += dmod_r * P.at(p + "mod.w").value.transpose();
        }
    }

    P.at("in_proj.w").grad += cache.x_tokens.transpose() * dstream;
    P.at("in_proj.b").grad.row(0) += dstream.colwise().sum();

    auto cond_backward = [&](const ConditioningCache& cc, const Eigen::RowVectorXd& dc) {
        Eigen::RowVectorXd hidden = cc.hidden_pre.unaryExpr([](double x) { return silu(x); });
        P.at("t_mlp.w2").grad += hidden.transpose() * dc;
        P.at("t_mlp.b2").grad.row(0) += dc;
        Eigen::RowVectorXd dhidden = dc * P.at("t_mlp.w2").value.transpose();
        Eigen::RowVectorXd dpre =
            dhidden.array() *
            cc.hidden_pre.unaryExpr([](double x) { return silu_grad(x); }).array();
        P.at("t_mlp.w1").grad += cc.sincos.transpose() * dpre;
        P.at("t_mlp.b1").grad.row(0) += dpre;
    };
    cond_backward(cache.cond_video, dc_v);
    if (nr > 0) cond_backward(cache.cond_ref, dc_r);
}

std::string config_to_json(const DenoiserConfig& cfg) {
    json j{{"layers", cfg.layers},
           {"heads", cfg.heads},
           {"head_dim", cfg.head_dim},
           {"ffn_dim", cfg.ffn_dim},
           {"channels", cfg.channels},
           {"vocab_size", cfg.vocab_size},
           {"scheme", scheme_name(cfg.scheme.kind)},
           {"delta", cfg.scheme.ts_delta},
           {"cond_dropout", cfg.cond_dropout},
           {"total_steps", cfg.total_steps}};
    return j.dump();
}

DenoiserConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    DenoiserConfig cfg;
    cfg.layers = j.at("layers").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.head_dim = j.at("head_dim").get<int>();
    cfg.ffn_dim = j.value("ffn_dim", 0);
    cfg.channels = j.at("channels").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.scheme.kind = parse_scheme(j.at("scheme").get<std::string>());
    cfg.scheme.ts_delta = j.value("delta", 16);
    cfg.cond_dropout = j.value("cond_dropout", 0.1);
    cfg.total_steps = j.value("total_steps", 1000);
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::string& path, const Denoiser& model) {
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors;
    for (const auto& p : model.params().all()) {
        tensors.emplace_back(p.name, &p.value);
    }
    save_tensors(path, tensors, {{"config", config_to_json(model.config())}});
}

Denoiser load_checkpoint(const std::string& path) {
    LoadedTensors loaded = load_tensors(path);
    auto it = loaded.metadata.find("config");
    MV_CHECK(it != loaded.metadata.end(), "checkpoint missing config metadata");
    Denoiser model(config_from_json(it->second), 0);
    for (auto& p : model.params().all()) {
        auto t = loaded.tensors.find(p.name);
        MV_CHECK(t != loaded.tensors.end(), "checkpoint missing tensor: " + p.name);
        MV_CHECK(t->second.rows() == p.value.rows() && t->second.cols() == p.value.cols(),
                 "checkpoint tensor shape mismatch: " + p.name);
        p.value = t->second;
    }
    return model;
}

}  // namespace mvlab
