#ifndef MVLAB_MODEL_HPP
#define MVLAB_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvlab/data.hpp"
#include "mvlab/rope.hpp"

namespace mvlab {

struct DenoiserConfig {
    int layers = 2;
    int heads = 4;
    int head_dim = 16;
    int ffn_dim = 0;  // 0 selects 4 * model_dim
    int channels = 4;
    int vocab_size = 64;
    LayoutScheme scheme;
    double cond_dropout = 0.1;
    int total_steps = 1000;

    int model_dim() const { return heads * head_dim; }
    int hidden_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim(); }
    void validate() const;
};

struct Parameter {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
};

/// Named parameter arrays with matching gradient buffers.
class ParamStore {
public:
    Eigen::MatrixXd& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    void zero_grads();
    std::int64_t parameter_count() const;

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

struct LayerNormCache {
    Eigen::MatrixXd normed;
    Eigen::VectorXd inv_std;
};

struct SelfAttentionCache {
    Eigen::MatrixXd input;  // modulated pre-attention activations
    Eigen::MatrixXd q, k, v;  // q, k carry rotary encoding
    std::vector<Eigen::MatrixXd> probs;
    Eigen::MatrixXd concat;
};

struct CrossAttentionCache {
    Eigen::MatrixXd q;
    Eigen::MatrixXd k, v;
    std::vector<Eigen::MatrixXd> probs;
    Eigen::MatrixXd concat;
};

struct BlockCache {
    Eigen::MatrixXd h_in;
    LayerNormCache ln1;
    SelfAttentionCache att;
    Eigen::MatrixXd att_out;
    Eigen::MatrixXd h_mid;
    LayerNormCache ln_cross;
    CrossAttentionCache cross;
    Eigen::MatrixXd h_mid2;
    LayerNormCache ln2;
    Eigen::MatrixXd mlp_input;
    Eigen::MatrixXd mlp_pre;
    Eigen::MatrixXd mlp_act;
    Eigen::MatrixXd mlp_out;
};

struct ConditioningCache {
    Eigen::RowVectorXd sincos;
    Eigen::RowVectorXd hidden_pre;
    Eigen::RowVectorXd c;
    Eigen::RowVectorXd mod_final;           // [shift | scale]
    std::vector<Eigen::RowVectorXd> mod_blocks;  // per block [sh1|sc1|g1|sh2|sc2|g2]
};

struct DenoiseCache {
    TokenLayout layout;
    int n_video = 0;
    int n_ref = 0;
    bool has_text = false;
    std::vector<int> prompt_ids;
    Eigen::MatrixXd x_tokens;
    Eigen::MatrixXd text_tokens;
    ConditioningCache cond_video;
    ConditioningCache cond_ref;
    std::vector<BlockCache> blocks;
    LayerNormCache ln_final;
    Eigen::MatrixXd final_modulated;
};

/// Toy diffusion transformer over the unified video + reference token list.
/// Timestep conditioning enters through adaptive layer-norm modulation
/// (video tokens use the sampled t, reference tokens a fixed t = 0); text
/// conditioning enters through cross-attention. The output projection is
/// zero-initialized, so a fresh model predicts zero velocity everywhere.
class Denoiser {
public:
    Denoiser(const DenoiserConfig& cfg, std::uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const FrequencyTable& freqs() const { return freqs_; }

    /// Velocity prediction for the video tokens. Reference tokens are inputs
    /// only; no output is produced for them.
    LatentVideo forward(const LatentVideo& xt, double t, const ReferenceSet* refs,
                        const Prompt* prompt) const;
    LatentVideo forward(const LatentVideo& xt, double t, const ReferenceSet* refs,
                        const Prompt* prompt, DenoiseCache& cache) const;

    /// Accumulates parameter gradients for d(loss)/d(prediction).
    void backward(const LatentVideo& dpred, const DenoiseCache& cache);

private:
    DenoiserConfig cfg_;
    ParamStore params_;
    FrequencyTable freqs_;
};

void save_checkpoint(const std::string& path, const Denoiser& model);
Denoiser load_checkpoint(const std::string& path);

std::string config_to_json(const DenoiserConfig& cfg);
DenoiserConfig config_from_json(const std::string& text);

}  // namespace mvlab

#endif  // MVLAB_MODEL_HPP
