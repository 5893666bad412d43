#include "modiff/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "modiff/kernels.hpp"
#include "modiff/rng.hpp"

namespace modiff {
namespace {

template <typename T>
Matrix<T> colsum(const Matrix<T>& m) {
    Matrix<T> out(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
    return out;
}

template <typename T>
void add_row_to_all(Matrix<T>& m, const T* row) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += row[c];
}

template <typename T>
Matrix<T> slice_cols(const Matrix<T>& src, std::size_t c0, std::size_t width) {
    Matrix<T> out(src.rows(), width);
    for (std::size_t r = 0; r < src.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) out(r, c) = src(r, c0 + c);
    return out;
}

template <typename T>
void paste_cols(Matrix<T>& dst, const Matrix<T>& src, std::size_t c0) {
    for (std::size_t r = 0; r < src.rows(); ++r)
        for (std::size_t c = 0; c < src.cols(); ++c) dst(r, c0 + c) = src(r, c);
}

template <typename T>
Matrix<T> vconcat(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> out(a.rows() + b.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) out(a.rows() + r, c) = b(r, c);
    return out;
}

void require_finite(const Mat& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m[i]))
            throw std::invalid_argument(std::string("transformer: non-finite value in ") + what);
}

}  // namespace

void TransformerConfig::validate() const {
    if (d_model == 0 || heads == 0) throw std::invalid_argument("transformer: zero width");
    if (d_model % heads != 0)
        throw std::invalid_argument("transformer: d_model not divisible by head count");
    if (d_model % 2 != 0)
        throw std::invalid_argument("transformer: d_model must be even for the step embedding");
    if (n_enc_m == 0 || n_enc_c == 0 || n_x == 0 || n_dec == 0)
        throw std::invalid_argument("transformer: every stack needs at least one layer");
    if (t_h == 0 || t_p == 0 || motion_dim == 0 || control_dim == 0)
        throw std::invalid_argument("transformer: zero sequence or feature dimension");
}

TransformerConfig TransformerConfig::desk() { return TransformerConfig{}; }

TransformerConfig TransformerConfig::full() {
    TransformerConfig cfg;
    cfg.d_model = 256;
    cfg.heads = 4;
    cfg.n_enc_m = 2;
    cfg.n_enc_c = 2;
    cfg.n_x = 6;
    cfg.n_dec = 3;
    return cfg;
}

namespace detail {

template <typename T>
void ParamTensor<T>::setup(std::string n, std::size_t rows, std::size_t cols, InitKind kind) {
    name = std::move(n);
    init = kind;
    w = Matrix<T>(rows, cols);
    g = Matrix<T>(rows, cols);
    m = Matrix<T>(rows, cols);
    v = Matrix<T>(rows, cols);
}

template <typename T>
void LinearLayer<T>::setup(const std::string& prefix, std::size_t in, std::size_t out,
                           Registry<T>& reg, InitKind weight_init) {
    weight.setup(prefix + ".w", out, in, weight_init);
    bias.setup(prefix + ".b", 1, out, InitKind::Zero);
    reg.push_back(&weight);
    reg.push_back(&bias);
}

template <typename T>
Matrix<T> LinearLayer<T>::forward(const Matrix<T>& x) {
    x_cache = x;
    Matrix<T> y(x.rows(), weight.w.rows());
    kernels::matmul_transb(x.data(), weight.w.data(), y.data(), x.rows(), x.cols(),
                           weight.w.rows());
    add_row_to_all(y, bias.w.data());
    return y;
}

template <typename T>
Matrix<T> LinearLayer<T>::backward(const Matrix<T>& dy) {
    std::size_t out = weight.w.rows(), in = weight.w.cols();
    kernels::matmul_transa(dy.data(), x_cache.data(), weight.g.data(), out, dy.rows(), in, true);
    Matrix<T> bsum = colsum(dy);
    for (std::size_t c = 0; c < out; ++c) bias.g[c] += bsum[c];
    Matrix<T> dx(dy.rows(), in);
    kernels::matmul(dy.data(), weight.w.data(), dx.data(), dy.rows(), out, in);
    return dx;
}

template <typename T>
void LayerNormLayer<T>::setup(const std::string& prefix, std::size_t dim, Registry<T>& reg) {
    gamma.setup(prefix + ".gamma", 1, dim, InitKind::One);
    beta.setup(prefix + ".beta", 1, dim, InitKind::Zero);
    reg.push_back(&gamma);
    reg.push_back(&beta);
}

template <typename T>
Matrix<T> LayerNormLayer<T>::forward(const Matrix<T>& x) {
    const T eps = T(1e-5);
    std::size_t d = x.cols();
    xhat_cache = Matrix<T>(x.rows(), d);
    inv_std_cache.assign(x.rows(), T(0));
    Matrix<T> y(x.rows(), d);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const T* xr = x.row(r);
        T mean = T(0);
        for (std::size_t c = 0; c < d; ++c) mean += xr[c];
        mean /= T(d);
        T var = T(0);
        for (std::size_t c = 0; c < d; ++c) {
            T dv = xr[c] - mean;
            var += dv * dv;
        }
        var /= T(d);
        T inv_std = T(1) / std::sqrt(var + eps);
        inv_std_cache[r] = inv_std;
        for (std::size_t c = 0; c < d; ++c) {
            T xh = (xr[c] - mean) * inv_std;
            xhat_cache(r, c) = xh;
            y(r, c) = gamma.w[c] * xh + beta.w[c];
        }
    }
    return y;
}

template <typename T>
Matrix<T> LayerNormLayer<T>::backward(const Matrix<T>& dy) {
    std::size_t d = dy.cols();
    Matrix<T> dx(dy.rows(), d);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
        const T* dyr = dy.row(r);
        const T* xh = xhat_cache.row(r);
        T m1 = T(0), m2 = T(0);
        for (std::size_t c = 0; c < d; ++c) {
            gamma.g[c] += dyr[c] * xh[c];
            beta.g[c] += dyr[c];
            T dxh = dyr[c] * gamma.w[c];
            m1 += dxh;
            m2 += dxh * xh[c];
        }
        m1 /= T(d);
        m2 /= T(d);
        T inv_std = inv_std_cache[r];
        for (std::size_t c = 0; c < d; ++c) {
            T dxh = dyr[c] * gamma.w[c];
            dx(r, c) = inv_std * (dxh - m1 - xh[c] * m2);
        }
    }
    return dx;
}

template <typename T>
void AttentionLayer<T>::setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
                              Registry<T>& reg) {
    heads = n_heads;
    dm = d_model;
    dh = d_model / n_heads;
    wq.setup(prefix + ".wq", dm, dm, reg);
    wk.setup(prefix + ".wk", dm, dm, reg);
    wv.setup(prefix + ".wv", dm, dm, reg);
    wo.setup(prefix + ".wo", dm, dm, reg);
    rel_bias.setup(prefix + ".rel_bias", heads, kRelBiasSize, InitKind::Zero);
    reg.push_back(&rel_bias);
}

template <typename T>
Matrix<T> AttentionLayer<T>::forward(const Matrix<T>& q_in, const Matrix<T>& kv_in,
                                     const std::vector<int>& tq, const std::vector<int>& tk) {
    std::size_t nq = q_in.rows(), nk = kv_in.rows();
    q_cache = wq.forward(q_in);
    k_cache = wk.forward(kv_in);
    v_cache = wv.forward(kv_in);
    tq_cache = &tq;
    tk_cache = &tk;
    probs_cache.assign(heads, Matrix<T>());
    const T scale = T(1) / std::sqrt(T(dh));
    Matrix<T> concat(nq, dm);
    for (std::size_t h = 0; h < heads; ++h) {
        Matrix<T> qh = slice_cols(q_cache, h * dh, dh);
        Matrix<T> kh = slice_cols(k_cache, h * dh, dh);
        Matrix<T> vh = slice_cols(v_cache, h * dh, dh);
        Matrix<T> scores(nq, nk);
        kernels::matmul_transb(qh.data(), kh.data(), scores.data(), nq, dh, nk);
        const T* bias_row = rel_bias.w.row(h);
        for (std::size_t i = 0; i < nq; ++i) {
            T* srow = scores.row(i);
            for (std::size_t j = 0; j < nk; ++j) {
                int rel = std::clamp(tq[i] - tk[j], -kRelBiasClamp, kRelBiasClamp);
                srow[j] = srow[j] * scale + bias_row[rel + kRelBiasClamp];
            }
            // stable row softmax
            T mx = srow[0];
            for (std::size_t j = 1; j < nk; ++j) mx = std::max(mx, srow[j]);
            T sum = T(0);
            for (std::size_t j = 0; j < nk; ++j) {
                srow[j] = std::exp(srow[j] - mx);
                sum += srow[j];
            }
            for (std::size_t j = 0; j < nk; ++j) srow[j] /= sum;
        }
        probs_cache[h] = scores;
        Matrix<T> oh(nq, dh);
        kernels::matmul(scores.data(), vh.data(), oh.data(), nq, nk, dh);
        paste_cols(concat, oh, h * dh);
    }
    return wo.forward(concat);
}

template <typename T>
Matrix<T> AttentionLayer<T>::backward(const Matrix<T>& dy, Matrix<T>& dkv_accum) {
    const std::vector<int>& tq = *tq_cache;
    const std::vector<int>& tk = *tk_cache;
    std::size_t nq = q_cache.rows(), nk = k_cache.rows();
    const T scale = T(1) / std::sqrt(T(dh));
    Matrix<T> d_concat = wo.backward(dy);
    Matrix<T> dq(nq, dm), dk(nk, dm), dv(nk, dm);
    for (std::size_t h = 0; h < heads; ++h) {
        const Matrix<T>& probs = probs_cache[h];
        Matrix<T> kh = slice_cols(k_cache, h * dh, dh);
        Matrix<T> vh = slice_cols(v_cache, h * dh, dh);
        Matrix<T> doh = slice_cols(d_concat, h * dh, dh);
        Matrix<T> dvh(nk, dh);
        kernels::matmul_transa(probs.data(), doh.data(), dvh.data(), nk, nq, dh);
        Matrix<T> dp(nq, nk);
        kernels::matmul_transb(doh.data(), vh.data(), dp.data(), nq, dh, nk);
        // softmax backward, then split the score gradient between the
        // bias table and the scaled dot product
        T* bias_grad = rel_bias.g.row(h);
        for (std::size_t i = 0; i < nq; ++i) {
            const T* prow = probs.row(i);
            T* dprow = dp.row(i);
            T inner = T(0);
            for (std::size_t j = 0; j < nk; ++j) inner += prow[j] * dprow[j];
            for (std::size_t j = 0; j < nk; ++j) {
                T ds = prow[j] * (dprow[j] - inner);
                int rel = std::clamp(tq[i] - tk[j], -kRelBiasClamp, kRelBiasClamp);
                bias_grad[rel + kRelBiasClamp] += ds;
                dprow[j] = ds * scale;  // reuse dp as the scaled dS
            }
        }
        Matrix<T> qh = slice_cols(q_cache, h * dh, dh);
        Matrix<T> dqh(nq, dh);
        kernels::matmul(dp.data(), kh.data(), dqh.data(), nq, nk, dh);
        Matrix<T> dkh(nk, dh);
        kernels::matmul_transa(dp.data(), qh.data(), dkh.data(), nk, nq, dh);
        paste_cols(dq, dqh, h * dh);
        paste_cols(dk, dkh, h * dh);
        paste_cols(dv, dvh, h * dh);
    }
    Matrix<T> dq_in = wq.backward(dq);
    Matrix<T> dk_in = wk.backward(dk);
    Matrix<T> dv_in = wv.backward(dv);
    for (std::size_t i = 0; i < dkv_accum.size(); ++i) dkv_accum[i] += dk_in[i] + dv_in[i];
    return dq_in;
}

template <typename T>
void FeedForwardLayer<T>::setup(const std::string& prefix, std::size_t d_model, Registry<T>& reg) {
    fc1.setup(prefix + ".fc1", d_model, 4 * d_model, reg);
    fc2.setup(prefix + ".fc2", 4 * d_model, d_model, reg);
}

template <typename T>
Matrix<T> FeedForwardLayer<T>::forward(const Matrix<T>& x) {
    pre_act_cache = fc1.forward(x);
    Matrix<T> act(pre_act_cache.rows(), pre_act_cache.cols());
    kernels::gelu(pre_act_cache.data(), act.data(), act.size());
    return fc2.forward(act);
}

template <typename T>
Matrix<T> FeedForwardLayer<T>::backward(const Matrix<T>& dy) {
    Matrix<T> d_act = fc2.backward(dy);
    Matrix<T> d_pre(d_act.rows(), d_act.cols());
    kernels::gelu_backward(pre_act_cache.data(), d_act.data(), d_pre.data(), d_pre.size());
    return fc1.backward(d_pre);
}

template <typename T>
void EncoderBlock<T>::setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
                            Registry<T>& reg) {
    ln1.setup(prefix + ".ln1", d_model, reg);
    attn.setup(prefix + ".attn", d_model, n_heads, reg);
    ln2.setup(prefix + ".ln2", d_model, reg);
    ff.setup(prefix + ".ff", d_model, reg);
}

template <typename T>
Matrix<T> EncoderBlock<T>::forward(const Matrix<T>& x, const std::vector<int>& coords) {
    Matrix<T> normed = ln1.forward(x);
    Matrix<T> a = attn.forward(normed, normed, coords, coords);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
    Matrix<T> f = ff.forward(ln2.forward(a));
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += a[i];
    return f;
}

template <typename T>
Matrix<T> EncoderBlock<T>::backward(const Matrix<T>& dy) {
    Matrix<T> da = ln2.backward(ff.backward(dy));
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
    Matrix<T> dkv(da.rows(), da.cols());
    Matrix<T> dq = attn.backward(da, dkv);
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] += dkv[i];
    Matrix<T> dx = ln1.backward(dq);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += da[i];
    return dx;
}

template <typename T>
void DecoderBlock<T>::setup(const std::string& prefix, std::size_t d_model, std::size_t n_heads,
                            Registry<T>& reg) {
    ln1.setup(prefix + ".ln1", d_model, reg);
    self_attn.setup(prefix + ".self_attn", d_model, n_heads, reg);
    ln2.setup(prefix + ".ln2", d_model, reg);
    cross_attn.setup(prefix + ".cross_attn", d_model, n_heads, reg);
    ln3.setup(prefix + ".ln3", d_model, reg);
    ff.setup(prefix + ".ff", d_model, reg);
}

template <typename T>
Matrix<T> DecoderBlock<T>::forward(const Matrix<T>& x, const Matrix<T>& memory,
                                   const std::vector<int>& ty, const std::vector<int>& tmem) {
    Matrix<T> normed = ln1.forward(x);
    Matrix<T> a = self_attn.forward(normed, normed, ty, ty);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
    Matrix<T> b = cross_attn.forward(ln2.forward(a), memory, ty, tmem);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += a[i];
    Matrix<T> f = ff.forward(ln3.forward(b));
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += b[i];
    return f;
}

template <typename T>
Matrix<T> DecoderBlock<T>::backward(const Matrix<T>& dy, Matrix<T>& dmemory_accum) {
    Matrix<T> db = ln3.backward(ff.backward(dy));
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i];
    Matrix<T> dq = cross_attn.backward(db, dmemory_accum);
    Matrix<T> da = ln2.backward(dq);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += db[i];
    Matrix<T> dkv(da.rows(), da.cols());
    Matrix<T> dq2 = self_attn.backward(da, dkv);
    for (std::size_t i = 0; i < dq2.size(); ++i) dq2[i] += dkv[i];
    Matrix<T> dx = ln1.backward(dq2);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += da[i];
    return dx;
}

template struct ParamTensor<float>;
template struct ParamTensor<double>;
template struct LinearLayer<float>;
template struct LinearLayer<double>;
template struct LayerNormLayer<float>;
template struct LayerNormLayer<double>;
template struct AttentionLayer<float>;
template struct AttentionLayer<double>;
template struct FeedForwardLayer<float>;
template struct FeedForwardLayer<double>;
template struct EncoderBlock<float>;
template struct EncoderBlock<double>;
template struct DecoderBlock<float>;
template struct DecoderBlock<double>;

}  // namespace detail

template <typename T>
TinyTransformer<T>::TinyTransformer(const TransformerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    using detail::InitKind;
    std::size_t dm = cfg_.d_model;

    embed_m_.setup("embed_m", cfg_.motion_dim, dm, registry_);
    embed_c_.setup("embed_c", cfg_.control_dim, dm, registry_);
    embed_y_.setup("embed_y", cfg_.motion_dim, dm, registry_);
    tags_.setup("tags", 3, dm, InitKind::TruncNormal);
    registry_.push_back(&tags_);
    step_proj_.setup("step_proj", dm, dm, registry_);

    enc_m_.resize(cfg_.n_enc_m);
    for (std::size_t i = 0; i < enc_m_.size(); ++i)
        enc_m_[i].setup("enc_m." + std::to_string(i), dm, cfg_.heads, registry_);
    enc_c_.resize(cfg_.n_enc_c);
    for (std::size_t i = 0; i < enc_c_.size(); ++i)
        enc_c_[i].setup("enc_c." + std::to_string(i), dm, cfg_.heads, registry_);
    fuse_.resize(cfg_.n_x);
    for (std::size_t i = 0; i < fuse_.size(); ++i)
        fuse_[i].setup("fuse." + std::to_string(i), dm, cfg_.heads, registry_);
    mem_ln_.setup("mem_ln", dm, registry_);
    dec_.resize(cfg_.n_dec);
    for (std::size_t i = 0; i < dec_.size(); ++i)
        dec_[i].setup("dec." + std::to_string(i), dm, cfg_.heads, registry_);
    final_ln_.setup("final_ln", dm, registry_);
    out_proj_.setup("out_proj", dm, cfg_.motion_dim, registry_, InitKind::Zero);

    // Token time coordinates: past motion at 0..T_h-1, controls at
    // 0..T_h+T_p-1, target tokens continue the motion timeline at T_h..
    for (std::size_t i = 0; i < cfg_.t_h; ++i) coords_m_.push_back(int(i));
    for (std::size_t i = 0; i < cfg_.t_h + cfg_.t_p; ++i) coords_c_.push_back(int(i));
    coords_fused_ = coords_m_;
    coords_fused_.insert(coords_fused_.end(), coords_c_.begin(), coords_c_.end());
    for (std::size_t i = 0; i < cfg_.t_p; ++i) coords_y_.push_back(int(cfg_.t_h + i));

    RandomStream rng = RandomStream(seed).substream("init");
    for (detail::ParamTensor<T>* p : registry_) {
        switch (p->init) {
            case InitKind::Zero:
                break;
            case InitKind::One:
                p->w.fill(T(1));
                break;
            case InitKind::TruncNormal:
                for (std::size_t i = 0; i < p->w.size(); ++i) {
                    double z = rng.normal();
                    while (std::abs(z) > 2.0) z = rng.normal();
                    p->w[i] = T(0.02 * z);
                }
                break;
        }
    }
}

template <typename T>
void TinyTransformer<T>::check_inputs(const Mat& y_s, std::size_t s, const Mat& x,
                                      const Mat& c) const {
    auto want = [](const Mat& m, std::size_t r, std::size_t cc, const char* what) {
        if (m.rows() != r || m.cols() != cc)
            throw std::invalid_argument(std::string("transformer: ") + what + " is " +
                                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                        ", expected " + std::to_string(r) + "x" +
                                        std::to_string(cc));
    };
    want(y_s, cfg_.t_p, cfg_.motion_dim, "y_s");
    want(x, cfg_.t_h, cfg_.motion_dim, "x");
    want(c, cfg_.t_h + cfg_.t_p, cfg_.control_dim, "c");
    if (s < 1) throw std::invalid_argument("transformer: diffusion step must be >= 1");
    require_finite(y_s, "y_s");
    require_finite(x, "x");
    require_finite(c, "c");
}

template <typename T>
Matrix<T> TinyTransformer<T>::step_embedding(std::size_t s) const {
    std::size_t dm = cfg_.d_model;
    Matrix<T> emb(1, dm);
    double log_base = std::log(10000.0);
    for (std::size_t i = 0; i < dm / 2; ++i) {
        double angle = double(s) * std::exp(-log_base * (2.0 * double(i) / double(dm)));
        emb[2 * i] = T(std::sin(angle));
        emb[2 * i + 1] = T(std::cos(angle));
    }
    return emb;
}

template <typename T>
Mat TinyTransformer<T>::forward(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) {
    check_inputs(y_s, s, x, c);

    Matrix<T> m_tok = embed_m_.forward(x.template cast<T>());
    add_row_to_all(m_tok, tags_.w.row(0));
    Matrix<T> c_tok = embed_c_.forward(c.template cast<T>());
    add_row_to_all(c_tok, tags_.w.row(1));
    for (auto& blk : enc_m_) m_tok = blk.forward(m_tok, coords_m_);
    for (auto& blk : enc_c_) c_tok = blk.forward(c_tok, coords_c_);

    Matrix<T> fused = vconcat(m_tok, c_tok);
    for (auto& blk : fuse_) fused = blk.forward(fused, coords_fused_);
    Matrix<T> memory = mem_ln_.forward(fused);

    Matrix<T> y_tok = embed_y_.forward(y_s.template cast<T>());
    add_row_to_all(y_tok, tags_.w.row(2));
    Matrix<T> step_vec = step_proj_.forward(step_embedding(s));
    add_row_to_all(y_tok, step_vec.data());
    for (auto& blk : dec_) y_tok = blk.forward(y_tok, memory, coords_y_, coords_fused_);

    Matrix<T> out = out_proj_.forward(final_ln_.forward(y_tok));
    forward_recorded_ = true;
    return out.template cast<double>();
}

template <typename T>
void TinyTransformer<T>::backward(const Mat& d_eps_hat) {
    if (!forward_recorded_)
        throw std::logic_error("transformer: backward called without a recorded forward pass");
    forward_recorded_ = false;

    Matrix<T> dy = d_eps_hat.cast<T>();
    Matrix<T> d_ytok = final_ln_.backward(out_proj_.backward(dy));

    std::size_t mem_rows = cfg_.t_h + cfg_.t_h + cfg_.t_p;
    Matrix<T> d_mem(mem_rows, cfg_.d_model);
    for (std::size_t i = dec_.size(); i-- > 0;) d_ytok = dec_[i].backward(d_ytok, d_mem);

    Matrix<T> d_assembled = colsum(d_ytok);
    for (std::size_t cc = 0; cc < cfg_.d_model; ++cc) tags_.g(2, cc) += d_assembled[cc];
    step_proj_.backward(d_assembled);  // gradient w.r.t. the sinusoid is discarded
    embed_y_.backward(d_ytok);

    Matrix<T> d_fused = mem_ln_.backward(d_mem);
    for (std::size_t i = fuse_.size(); i-- > 0;) d_fused = fuse_[i].backward(d_fused);
    Matrix<T> d_mtok(cfg_.t_h, cfg_.d_model);
    Matrix<T> d_ctok(cfg_.t_h + cfg_.t_p, cfg_.d_model);
    for (std::size_t r = 0; r < d_mtok.rows(); ++r)
        for (std::size_t cc = 0; cc < cfg_.d_model; ++cc) d_mtok(r, cc) = d_fused(r, cc);
    for (std::size_t r = 0; r < d_ctok.rows(); ++r)
        for (std::size_t cc = 0; cc < cfg_.d_model; ++cc)
            d_ctok(r, cc) = d_fused(cfg_.t_h + r, cc);

    for (std::size_t i = enc_m_.size(); i-- > 0;) d_mtok = enc_m_[i].backward(d_mtok);
    for (std::size_t i = enc_c_.size(); i-- > 0;) d_ctok = enc_c_[i].backward(d_ctok);
    Matrix<T> sum_m = colsum(d_mtok);
    Matrix<T> sum_c = colsum(d_ctok);
    for (std::size_t cc = 0; cc < cfg_.d_model; ++cc) {
        tags_.g(0, cc) += sum_m[cc];
        tags_.g(1, cc) += sum_c[cc];
    }
    embed_m_.backward(d_mtok);
    embed_c_.backward(d_ctok);
}

template <typename T>
void TinyTransformer<T>::zero_grads() {
    for (detail::ParamTensor<T>* p : registry_) p->g.fill(T(0));
}

template <typename T>
double TinyTransformer<T>::batch_loss(const std::vector<TrainItem>& batch) {
    if (batch.empty()) throw std::invalid_argument("transformer: empty batch");
    double total = 0.0;
    for (const TrainItem& item : batch) {
        Mat out = forward(item.y_s, item.s, item.x, item.c);
        total += kernels::sum_squared_diff(out.data(), item.eps.data(), out.size()) /
                 double(out.size());
    }
    return total / double(batch.size());
}

template <typename T>
double TinyTransformer<T>::batch_loss_and_grads(const std::vector<TrainItem>& batch) {
    if (batch.empty()) throw std::invalid_argument("transformer: empty batch");
    zero_grads();
    double total = 0.0;
    double seed_scale = 2.0 / double(batch.size());
    for (const TrainItem& item : batch) {
        Mat out = forward(item.y_s, item.s, item.x, item.c);
        require_same_shape(out, item.eps, "transformer: eps");
        Mat d(out.rows(), out.cols());
        double n = double(out.size());
        double sq = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            double r = out[i] - item.eps[i];
            sq += r * r;
            d[i] = seed_scale * r / n;
        }
        total += sq / n;
        backward(d);
    }
    return total / double(batch.size());
}

template <typename T>
void TinyTransformer<T>::adam_step_all(double lr, const AdamConfig& cfg) {
    ++step_;
    for (detail::ParamTensor<T>* p : registry_)
        adam_step(p->w, p->m, p->v, p->g, step_, lr, cfg, p->name);
}

template <typename T>
std::size_t TinyTransformer<T>::parameter_count() const {
    std::size_t n = 0;
    for (const detail::ParamTensor<T>* p : registry_) n += p->w.size();
    return n;
}

template <typename T>
std::string TinyTransformer<T>::norms_summary() const {
    std::string out;
    for (const detail::ParamTensor<T>* p : registry_) {
        double sq = kernels::dot(p->w.data(), p->w.data(), p->w.size());
        if (!out.empty()) out += ' ';
        out += p->name + "=" + std::to_string(std::sqrt(sq));
    }
    return out;
}

template class TinyTransformer<float>;
template class TinyTransformer<double>;

TransformerDenoiser::TransformerDenoiser(const TransformerConfig& cfg, std::uint64_t seed)
    : net_(cfg, seed) {}

Mat TransformerDenoiser::predict(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const {
    return net_.forward(y_s, s, x, c);
}

double TransformerDenoiser::train_batch(const std::vector<TrainItem>& batch, double lr) {
    double loss = net_.batch_loss_and_grads(batch);
    net_.adam_step_all(lr);
    return loss;
}

std::string TransformerDenoiser::diagnostics() const { return net_.norms_summary(); }

}  // namespace modiff
