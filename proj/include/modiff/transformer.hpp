#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "modiff/adam.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/matrix.hpp"

namespace modiff {

// Model shape. The desk profile is small enough to train in minutes on one
// CPU core; the full profile is the production size.
struct TransformerConfig {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t n_enc_m = 1;  // motion encoder depth
    std::size_t n_enc_c = 1;  // control encoder depth
    std::size_t n_x = 2;      // cross-modal fusion depth
    std::size_t n_dec = 1;    // decoder depth
    std::size_t t_h = 10;
    std::size_t t_p = 10;
    std::size_t motion_dim = 63;
    std::size_t control_dim = 3;

    void validate() const;
    static TransformerConfig desk();
    static TransformerConfig full();
};

namespace detail {

// Relative time offsets are clamped to [-31, 31] before the bias lookup.
inline constexpr int kRelBiasClamp = 31;
inline constexpr std::size_t kRelBiasSize = 2 * kRelBiasClamp + 1;

enum class InitKind { Zero, One, TruncNormal };

// One trainable tensor with its gradient and Adam moments. Registered in
// declaration order; that order is the checkpoint layout.
template <typename T>
struct ParamTensor {
    std::string name;
    InitKind init = InitKind::TruncNormal;
    Matrix<T> w, g, m, v;

    void setup(std::string n, std::size_t rows, std::size_t cols, InitKind kind);
};

template <typename T>
using Registry = std::vector<ParamTensor<T>*>;

// y = x W^T + b with W stored [out, in]. Caches its input for backward.
template <typename T>
struct LinearLayer {
    ParamTensor<T> weight;
    ParamTensor<T> bias;
    Matrix<T> x_cache;

    void setup(const std::string& prefix, std::size_t in, std::size_t out, Registry<T>& reg,
               InitKind weight_init = InitKind::TruncNormal);
    Matrix<T> forward(const Matrix<T>& x);
    Matrix<T> backward(const Matrix<T>& dy);
};

template <typename T>
struct LayerNormLayer {
    ParamTensor<T> gamma;
    ParamTensor<T> beta;
    Matrix<T> xhat_cache;
    std::vector<T> inv_std_cache;

    void setup(const std::string& prefix, std::size_t dim, Registry<T>& reg);
    Matrix<T> forward(const Matrix<T>& x);
    Matrix<T> backward(const Matrix<T>& dy);
};

// Multi-head attention with a learned relative position bias per head,
// indexed by the clamped difference of query and key time coordinates.
// Serves both self attention (q_in == kv_in) and cross attention.
template <typename T>
struct AttentionLayer {
    std::size_t heads = 1;
    std::size_t dm = 0;
    std::size_t dh = 0;
    LinearLayer<T> wq, wk, wv, wo;
    ParamTensor<T> rel_bias;  // [heads, kRelBiasSize]

    Matrix<T> q_cache, k_cache, v_cache;
    std::vector<Matrix<T>> probs_cache;  // per head, [Tq, Tk]
    const std::vector<int>* tq_cache = nullptr;
    const std::vector<int>* tk_cache = nullptr;

    void setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
               Registry<T>& reg);
    Matrix<T> forward(const Matrix<T>& q_in, const Matrix<T>& kv_in, const std::vector<int>& tq,
                      const std::vector<int>& tk);
    // Returns the gradient w.r.t. q_in; the kv_in gradient is added into
    // dkv_accum (for self attention the caller sums the two).
    Matrix<T> backward(const Matrix<T>& dy, Matrix<T>& dkv_accum);
};

// GELU feed-forward of width 4 * d_model.
template <typename T>
struct FeedForwardLayer {
    LinearLayer<T> fc1, fc2;
    Matrix<T> pre_act_cache;

    void setup(const std::string& prefix, std::size_t d_model, Registry<T>& reg);
    Matrix<T> forward(const Matrix<T>& x);
    Matrix<T> backward(const Matrix<T>& dy);
};

// Pre-norm residual block: x + attn(ln1(x)), then x + ff(ln2(x)).
template <typename T>
struct EncoderBlock {
    LayerNormLayer<T> ln1, ln2;
    AttentionLayer<T> attn;
    FeedForwardLayer<T> ff;

    void setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
               Registry<T>& reg);
    Matrix<T> forward(const Matrix<T>& x, const std::vector<int>& coords);
    Matrix<T> backward(const Matrix<T>& dy);
};

// Pre-norm decoder block: self attention, cross attention over the fused
// encoder memory, feed-forward.
template <typename T>
struct DecoderBlock {
    LayerNormLayer<T> ln1, ln2, ln3;
    AttentionLayer<T> self_attn, cross_attn;
    FeedForwardLayer<T> ff;

    void setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
               Registry<T>& reg);
    Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& memory, const std::vector<int>& ty,
                      const std::vector<int>& tmem);
    Matrix<T> backward(const Matrix<T>& dy, Matrix<T>& dmemory_accum);
};

}  // namespace detail

// Cross-modal denoising transformer with hand-written reverse-mode
// differentiation. Past motion and control streams pass through separate
// encoders, are concatenated along the time axis (with modality tag
// embeddings) for the fusion stack, and a decoder over the noised target
// tokens attends into that memory. The diffusion step enters as a
// sinusoidal embedding projected to d_model and added to every target
// token. T is float for the runtime model and double for gradient checks.
//
// forward() records intermediates, backward() consumes them; one instance
// is single-threaded by design.
template <typename T>
class TinyTransformer {
public:
    TinyTransformer(const TransformerConfig& cfg, std::uint64_t seed);
    TinyTransformer(const TinyTransformer&) = delete;
    TinyTransformer& operator=(const TinyTransformer&) = delete;

    const TransformerConfig& config() const { return cfg_; }

    Mat forward(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c);
    void backward(const Mat& d_eps_hat);

    void zero_grads();
    // Mean squared noise-prediction loss over the batch; the _and_grads
    // variant leaves the summed batch gradient in the registry.
    double batch_loss(const std::vector<TrainItem>& batch);
    double batch_loss_and_grads(const std::vector<TrainItem>& batch);
    void adam_step_all(double lr, const AdamConfig& cfg = {});

    std::size_t step() const { return step_; }
    void set_step(std::size_t t) { step_ = t; }

    // Declaration-order registry; checkpointing and gradient checks walk it.
    std::size_t tensor_count() const { return registry_.size(); }
    const std::string& tensor_name(std::size_t i) const { return registry_[i]->name; }
    Matrix<T>& tensor(std::size_t i) { return registry_[i]->w; }
    const Matrix<T>& tensor(std::size_t i) const { return registry_[i]->w; }
    const Matrix<T>& grad(std::size_t i) const { return registry_[i]->g; }
    std::size_t parameter_count() const;
    std::string norms_summary() const;

private:
    void check_inputs(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const;
    Matrix<T> step_embedding(std::size_t s) const;

    TransformerConfig cfg_;
    detail::Registry<T> registry_;

    detail::LinearLayer<T> embed_m_, embed_c_, embed_y_;
    detail::ParamTensor<T> tags_;  // [3, d_model]: motion, control, target
    detail::LinearLayer<T> step_proj_;
    std::vector<detail::EncoderBlock<T>> enc_m_, enc_c_, fuse_;
    detail::LayerNormLayer<T> mem_ln_;
    std::vector<detail::DecoderBlock<T>> dec_;
    detail::LayerNormLayer<T> final_ln_;
    detail::LinearLayer<T> out_proj_;

    std::vector<int> coords_m_, coords_c_, coords_fused_, coords_y_;
    std::size_t step_ = 0;
    bool forward_recorded_ = false;
};

extern template class TinyTransformer<float>;
extern template class TinyTransformer<double>;

// Denoiser adapter around the float model.
class TransformerDenoiser : public Denoiser {
public:
    TransformerDenoiser(const TransformerConfig& cfg, std::uint64_t seed);

    Mat predict(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const override;
    bool trainable() const override { return true; }
    double train_batch(const std::vector<TrainItem>& batch, double lr) override;
    std::string diagnostics() const override;

    TinyTransformer<float>& net() { return net_; }
    const TinyTransformer<float>& net() const { return net_; }

private:
    mutable TinyTransformer<float> net_;
};

}  // namespace modiff
