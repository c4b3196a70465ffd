#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xlingua/error.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/rng.hpp"
#include "xlingua/vocabulary.hpp"

namespace xlingua {

/// Source and target of one example as vocabulary ids. The model appends the
/// end-of-sequence marker to both sides itself.
struct EncodedExample {
  std::vector<int> source;
  std::vector<int> target;
};

inline EncodedExample encode_example(const Vocabulary& vocab, const FormattedExample& ex) {
  return EncodedExample{vocab.encode(ex.source), vocab.encode(ex.target)};
}

inline std::vector<EncodedExample> encode_examples(const Vocabulary& vocab, const std::vector<FormattedExample>& batch) {
  std::vector<EncodedExample> out;
  out.reserve(batch.size());
  for (const auto& ex : batch) out.push_back(encode_example(vocab, ex));
  return out;
}

/// What the training loop and the gradient checker need from a model.
template <typename M>
concept Seq2SeqModel = requires(M m, const M cm, std::span<const EncodedExample> batch, std::span<double> grad) {
  { cm.parameters() } -> std::convertible_to<std::span<const double>>;
  { m.mutable_parameters() } -> std::convertible_to<std::span<double>>;
  { cm.vocabulary() } -> std::convertible_to<const Vocabulary&>;
  { cm.loss(batch) } -> std::convertible_to<double>;
  { cm.loss_and_gradient(batch, grad) } -> std::convertible_to<double>;
};

struct ModelConfig {
  int embedding_size = 32;
  int hidden_size = 64;
  double init_scale = 0.1;  // parameters start uniform in [-init_scale, init_scale]
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// GRU encoder, GRU decoder with additive attention, shared embedding table.
///
///   h_j  = GRU_enc(E[x_j], h_{j-1}),                 h_0 = 0
///   e_tj = v . tanh(W_a s_{t-1} + U_a h_j),          alpha_t = softmax(e_t)
///   c_t  = sum_j alpha_tj h_j
///   s_t  = GRU_dec([E[y_{t-1}]; c_t], s_{t-1}),      s_0 = h_T
///   p_t  = softmax(W_o [s_t; c_t] + b_o)
///
/// GRU gates are stacked [update; reset; candidate] with
///   n = tanh(Wx_n x + b_n + r * (Wh_n h)),  h' = (1 - z) * n + z * h.
/// All parameters live in one flat vector so that optimizers, checkpoints and
/// finite-difference checks can treat them uniformly.
class AttentionSeq2Seq {
 public:
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  using MatMap = Eigen::Map<Mat>;
  using CMatMap = Eigen::Map<const Mat>;
  using VecMap = Eigen::Map<Vec>;
  using CVecMap = Eigen::Map<const Vec>;

  AttentionSeq2Seq(Vocabulary vocab, ModelConfig config) : vocab_(std::move(vocab)), config_(config) {
    if (config_.embedding_size <= 0 || config_.hidden_size <= 0) {
      fail(ErrorCategory::config, "embedding and hidden sizes must be positive");
    }
    layout_ = Layout(vocab_.size(), config_.embedding_size, config_.hidden_size);
    params_.assign(layout_.total, 0.0);
    Rng rng(config_.seed);
    for (auto& p : params_) p = rng.uniform(-config_.init_scale, config_.init_scale);
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  const ModelConfig& config() const { return config_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  void set_parameters(std::span<const double> p) {
    if (p.size() != params_.size()) fail(ErrorCategory::data, "parameter vector has the wrong length");
    std::copy(p.begin(), p.end(), params_.begin());
  }

  /// Mean per-token negative log-likelihood under teacher forcing.
  double loss(std::span<const EncodedExample> batch) const {
    auto [nll, tokens] = accumulate(batch, nullptr, 1.0);
    return nll / static_cast<double>(tokens);
  }

  /// Same loss; writes d loss / d parameters into `grad` (overwritten).
  double loss_and_gradient(std::span<const EncodedExample> batch, std::span<double> grad) const {
    if (grad.size() != params_.size()) fail(ErrorCategory::precondition, "gradient buffer has the wrong length");
    std::fill(grad.begin(), grad.end(), 0.0);
    std::size_t tokens = count_tokens(batch);
    auto [nll, n] = accumulate(batch, grad.data(), 1.0 / static_cast<double>(tokens));
    return nll / static_cast<double>(n);
  }

  double loss(const std::vector<FormattedExample>& batch) const {
    auto enc = encode_examples(vocab_, batch);
    return loss(std::span<const EncodedExample>(enc));
  }

  /// Output distributions at every decoding step of `target` (teacher forced,
  /// including the end-of-sequence step).
  std::vector<Vec> step_distributions(const std::vector<int>& source, const std::vector<int>& target) const {
    const auto w = views(params_.data());
    Encoded enc = encode(w, source, false);
    std::vector<Vec> out;
    Vec s = enc.states.col(enc.states.cols() - 1);
    int prev = Vocabulary::kBos;
    for (std::size_t t = 0; t <= target.size(); ++t) {
      DecoderStep st = decoder_step(w, enc, s, prev, false);
      out.push_back(st.probs);
      s = st.gru.h;
      if (t < target.size()) prev = target[t];
    }
    return out;
  }

  /// Argmax decoding; ties go to the lowest id. Stops at end-of-sequence or
  /// after max_len tokens. Returns ids without the end marker.
  std::vector<int> generate_ids(const std::vector<int>& source, std::size_t max_len) const {
    const auto w = views(params_.data());
    Encoded enc = encode(w, source, false);
    std::vector<int> out;
    Vec s = enc.states.col(enc.states.cols() - 1);
    int prev = Vocabulary::kBos;
    while (out.size() < max_len) {
      DecoderStep st = decoder_step(w, enc, s, prev, false);
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < st.logits.size(); ++i) {
        if (st.logits[i] > st.logits[best]) best = i;
      }
      if (best == Vocabulary::kEos) break;
      out.push_back(static_cast<int>(best));
      prev = static_cast<int>(best);
      s = st.gru.h;
    }
    return out;
  }

 private:
  // ---- parameter layout -------------------------------------------------
  struct Block {
    std::size_t offset = 0;
    int rows = 0, cols = 0;
  };

  struct Layout {
    Block emb, enc_wx, enc_wh, enc_b, dec_wx, dec_wh, dec_b, att_w, att_u, att_v, out_w, out_b;
    std::size_t total = 0;

    Layout() = default;
    Layout(int vocab, int d, int h) {
      auto add = [this](Block& b, int rows, int cols) {
        b = Block{total, rows, cols};
        total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
      };
      add(emb, d, vocab);  // one column per token
      add(enc_wx, 3 * h, d);
      add(enc_wh, 3 * h, h);
      add(enc_b, 3 * h, 1);
      add(dec_wx, 3 * h, d + h);
      add(dec_wh, 3 * h, h);
      add(dec_b, 3 * h, 1);
      add(att_w, h, h);
      add(att_u, h, h);
      add(att_v, h, 1);
      add(out_w, vocab, 2 * h);
      add(out_b, vocab, 1);
    }
  };

  template <typename Ptr, typename M>
  struct ViewsT {
    M emb, enc_wx, enc_wh, enc_b, dec_wx, dec_wh, dec_b, att_w, att_u, att_v, out_w, out_b;
  };
  using Views = ViewsT<const double*, CMatMap>;
  using GradViews = ViewsT<double*, MatMap>;

  template <typename M, typename Ptr>
  static M map(Ptr base, const Block& b) {
    return M(base + b.offset, b.rows, b.cols);
  }

  template <typename V, typename M, typename Ptr>
  V make_views(Ptr base) const {
    const auto& l = layout_;
    return V{map<M>(base, l.emb),    map<M>(base, l.enc_wx), map<M>(base, l.enc_wh), map<M>(base, l.enc_b),
             map<M>(base, l.dec_wx), map<M>(base, l.dec_wh), map<M>(base, l.dec_b),  map<M>(base, l.att_w),
             map<M>(base, l.att_u),  map<M>(base, l.att_v),  map<M>(base, l.out_w),  map<M>(base, l.out_b)};
  }

  Views views(const double* base) const { return make_views<Views, CMatMap>(base); }
  GradViews grad_views(double* base) const { return make_views<GradViews, MatMap>(base); }

  // ---- GRU ----------------------------------------------------------------
  struct GruCache {
    Vec x, h_prev, z, r, n, hn;  // hn = Wh_n h_prev
    Vec h;
  };

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  static GruCache gru_forward(const CMatMap& wx, const CMatMap& wh, const CMatMap& b, const Vec& x, const Vec& h_prev) {
    const Eigen::Index H = h_prev.size();
    GruCache c;
    Vec gx = wx * x + b.col(0);
    Vec gh = wh * h_prev;
    c.z = (gx.segment(0, H) + gh.segment(0, H)).unaryExpr(&sigmoid);
    c.r = (gx.segment(H, H) + gh.segment(H, H)).unaryExpr(&sigmoid);
    c.hn = gh.segment(2 * H, H);
    c.n = (gx.segment(2 * H, H) + c.r.cwiseProduct(c.hn)).array().tanh().matrix();
    c.h = (Vec::Ones(H) - c.z).cwiseProduct(c.n) + c.z.cwiseProduct(h_prev);
    c.x = x;
    c.h_prev = h_prev;
    return c;
  }

  /// Accumulates weight gradients; returns (dx, dh_prev).
  static std::pair<Vec, Vec> gru_backward(const CMatMap& wx, const CMatMap& wh, MatMap& dwx, MatMap& dwh, MatMap& db,
                                          const GruCache& c, const Vec& dh) {
    const Eigen::Index H = dh.size();
    Vec dn = dh.cwiseProduct(Vec::Ones(H) - c.z);
    Vec dz = dh.cwiseProduct(c.h_prev - c.n);
    Vec dh_prev = dh.cwiseProduct(c.z);
    Vec dn_pre = dn.cwiseProduct((Vec::Ones(H) - c.n.cwiseProduct(c.n)));
    Vec dz_pre = dz.cwiseProduct(c.z.cwiseProduct(Vec::Ones(H) - c.z));
    Vec dr = dn_pre.cwiseProduct(c.hn);
    Vec dr_pre = dr.cwiseProduct(c.r.cwiseProduct(Vec::Ones(H) - c.r));
    Vec dgx(3 * H), dgh(3 * H);
    dgx << dz_pre, dr_pre, dn_pre;
    dgh << dz_pre, dr_pre, dn_pre.cwiseProduct(c.r);
    dwx.noalias() += dgx * c.x.transpose();
    db.col(0) += dgx;
    dwh.noalias() += dgh * c.h_prev.transpose();
    Vec dx = wx.transpose() * dgx;
    dh_prev.noalias() += wh.transpose() * dgh;
    return {std::move(dx), std::move(dh_prev)};
  }

  // ---- encoder / decoder --------------------------------------------------
  struct Encoded {
    Mat states;     // H x T
    Mat projected;  // U_a h_j, H x T
    std::vector<GruCache> steps;
    std::vector<int> ids;
  };

  Encoded encode(const Views& w, const std::vector<int>& source, bool keep_cache) const {
    const int H = config_.hidden_size;
    Encoded e;
    e.ids = source;
    e.ids.push_back(Vocabulary::kEos);
    const auto T = static_cast<Eigen::Index>(e.ids.size());
    e.states.resize(H, T);
    Vec h = Vec::Zero(H);
    for (Eigen::Index j = 0; j < T; ++j) {
      Vec x = w.emb.col(e.ids[static_cast<std::size_t>(j)]);
      GruCache c = gru_forward(w.enc_wx, w.enc_wh, w.enc_b, x, h);
      h = c.h;
      e.states.col(j) = h;
      if (keep_cache) e.steps.push_back(std::move(c));
    }
    e.projected = w.att_u * e.states;
    return e;
  }

  struct DecoderStep {
    Vec s_prev, alpha, context, logits, probs, input;
    Mat act;  // tanh(W_a s_prev + U_a h_j), H x T
    GruCache gru;
    int prev_token = 0;
  };

  DecoderStep decoder_step(const Views& w, const Encoded& enc, const Vec& s_prev, int prev_token, bool) const {
    const int d = config_.embedding_size;
    const int H = config_.hidden_size;
    DecoderStep st;
    st.s_prev = s_prev;
    st.prev_token = prev_token;
    Vec q = w.att_w * s_prev;
    st.act = (enc.projected.colwise() + q).array().tanh().matrix();
    Vec scores = st.act.transpose() * w.att_v.col(0);
    st.alpha = (scores.array() - scores.maxCoeff()).exp().matrix();
    st.alpha /= st.alpha.sum();
    st.context = enc.states * st.alpha;
    st.input.resize(d + H);
    st.input << w.emb.col(prev_token), st.context;
    st.gru = gru_forward(w.dec_wx, w.dec_wh, w.dec_b, st.input, s_prev);
    Vec o(2 * H);
    o << st.gru.h, st.context;
    st.logits = w.out_w * o + w.out_b.col(0);
    st.probs = (st.logits.array() - st.logits.maxCoeff()).exp().matrix();
    st.probs /= st.probs.sum();
    return st;
  }

  static std::size_t count_tokens(std::span<const EncodedExample> batch) {
    std::size_t n = 0;
    for (const auto& ex : batch) n += ex.target.size() + 1;
    return n;
  }

  /// Sum of NLL over the batch and the token count. With `grad` set, adds
  /// `scale` * d(sum NLL) into it.
  std::pair<double, std::size_t> accumulate(std::span<const EncodedExample> batch, double* grad, double scale) const {
    if (batch.empty()) fail(ErrorCategory::precondition, "empty batch");
    const auto w = views(params_.data());
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : batch) {
      nll += example(w, ex, grad, scale);
      tokens += ex.target.size() + 1;
    }
    if (!std::isfinite(nll)) fail(ErrorCategory::numeric, "non-finite loss");
    return {nll, tokens};
  }

  double example(const Views& w, const EncodedExample& ex, double* grad, double scale) const {
    const bool backprop = grad != nullptr;
    const int d = config_.embedding_size;
    const int H = config_.hidden_size;
    Encoded enc = encode(w, ex.source, backprop);
    const Eigen::Index T = enc.states.cols();

    std::vector<int> gold = ex.target;
    gold.push_back(Vocabulary::kEos);
    std::vector<DecoderStep> steps;
    steps.reserve(gold.size());
    double nll = 0.0;
    Vec s = enc.states.col(T - 1);
    int prev = Vocabulary::kBos;
    for (int y : gold) {
      DecoderStep st = decoder_step(w, enc, s, prev, backprop);
      const double m = st.logits.maxCoeff();
      const double lse = m + std::log((st.logits.array() - m).exp().sum());
      nll += lse - st.logits[y];
      s = st.gru.h;
      prev = y;
      if (backprop) steps.push_back(std::move(st));
    }
    if (!backprop) return nll;

    GradViews g = grad_views(grad);
    Mat d_states = Mat::Zero(H, T);
    Mat d_projected = Mat::Zero(H, T);
    Vec ds = Vec::Zero(H);
    for (std::size_t t = steps.size(); t-- > 0;) {
      const DecoderStep& st = steps[t];
      Vec dlogits = st.probs;
      dlogits[gold[t]] -= 1.0;
      dlogits *= scale;
      Vec o(2 * H);
      o << st.gru.h, st.context;
      g.out_w.noalias() += dlogits * o.transpose();
      g.out_b.col(0) += dlogits;
      Vec dout = w.out_w.transpose() * dlogits;
      Vec dh = dout.head(H) + ds;
      Vec dcontext = dout.tail(H);
      auto [dinput, ds_prev] = gru_backward(w.dec_wx, w.dec_wh, g.dec_wx, g.dec_wh, g.dec_b, st.gru, dh);
      g.emb.col(st.prev_token) += dinput.head(d);
      dcontext += dinput.tail(H);
      // attention
      Vec dalpha = enc.states.transpose() * dcontext;
      d_states.noalias() += dcontext * st.alpha.transpose();
      Vec dscores = st.alpha.cwiseProduct(dalpha - Vec::Constant(T, st.alpha.dot(dalpha)));
      g.att_v.col(0).noalias() += st.act * dscores;
      Mat dpre = (Mat::Ones(H, T) - st.act.cwiseProduct(st.act)).cwiseProduct(w.att_v.col(0) * dscores.transpose());
      d_projected += dpre;
      Vec dq = dpre.rowwise().sum();
      g.att_w.noalias() += dq * st.s_prev.transpose();
      ds_prev.noalias() += w.att_w.transpose() * dq;
      ds = std::move(ds_prev);
    }
    // s_0 = h_T
    d_states.col(T - 1) += ds;
    g.att_u.noalias() += d_projected * enc.states.transpose();
    d_states.noalias() += w.att_u.transpose() * d_projected;

    Vec dh_next = Vec::Zero(H);
    for (Eigen::Index j = T; j-- > 0;) {
      Vec dh = d_states.col(j) + dh_next;
      auto [dx, dh_prev] =
          gru_backward(w.enc_wx, w.enc_wh, g.enc_wx, g.enc_wh, g.enc_b, enc.steps[static_cast<std::size_t>(j)], dh);
      g.emb.col(enc.ids[static_cast<std::size_t>(j)]) += dx;
      dh_next = std::move(dh_prev);
    }
    return nll;
  }

  Vocabulary vocab_;
  ModelConfig config_;
  Layout layout_;
  std::vector<double> params_;
};

static_assert(Seq2SeqModel<AttentionSeq2Seq>);

/// Mean per-token NLL of formatted examples; unknown tokens map to <unk>.
template <Seq2SeqModel M>
double nll_loss(const M& model, const std::vector<FormattedExample>& batch) {
  if (batch.empty()) fail(ErrorCategory::precondition, "nll_loss needs a non-empty batch");
  auto enc = encode_examples(model.vocabulary(), batch);
  return model.loss(std::span<const EncodedExample>(enc));
}

/// Greedy decoding of `source`; sentinels the model emits are kept.
inline std::string generate_greedy(const AttentionSeq2Seq& model, const std::string& source, std::size_t max_len = 64) {
  return model.vocabulary().decode(model.generate_ids(model.vocabulary().encode(source), max_len));
}

}  // namespace xlingua
