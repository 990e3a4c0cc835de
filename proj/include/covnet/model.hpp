#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covnet/model_input.hpp"
#include "covnet/numerics/attention.hpp"
#include "covnet/numerics/layers.hpp"
#include "covnet/rng.hpp"

namespace covnet {

struct ModelConfig {
  Task task = Task::Coverage;
  int d_model = 64;
  int n_heads = 8;
  int n_layers = 6;
  double dropout = 0.1;
  int n_coverage_classes = kNumCoverageClasses;
  int scheme_dim = 16;
  int head_hidden = 128;
  // The x/120, y/53.3 channels differ by hundredths between nearby players, so their rows of the
  // input projection start this much larger.
  double coordinate_gain = 30.0;
  double temporal_encoding_scale = 0.1;

  /// Per-task heads, layers and dropout of the reference configuration.
  static ModelConfig defaults(Task task);
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Only the model's own task is populated.
template <typename S>
struct HeadOutputs {
  Matrix<S> coverage_logits;  // [D, 20]
  Matrix<S> matchup_logits;   // [D, R + 1]; column 0 = no matchup
  Matrix<S> target_logits;    // [1, D + 1]; last slot = targeted receiver (masked)

  Matrix<S>& logits(Task t) {
    return t == Task::Coverage ? coverage_logits : t == Task::Matchup ? matchup_logits : target_logits;
  }
  const Matrix<S>& logits(Task t) const {
    return t == Task::Coverage ? coverage_logits : t == Task::Matchup ? matchup_logits : target_logits;
  }
};

inline constexpr int kSituationFeatures = 7;

/// down one-hot, distance / 10, yard line / 50, clock / 1800.
template <typename S>
RowVector<S> situation_features(const Situation& s) {
  if (s.down < 1 || s.down > 4) throw ConfigError("down must be within [1, 4]");
  RowVector<S> f = RowVector<S>::Zero(kSituationFeatures);
  f(s.down - 1) = S(1);
  f(4) = static_cast<S>(s.distance / 10.0);
  f(5) = static_cast<S>(s.yard_line / 50.0);
  f(6) = static_cast<S>(s.game_clock_s / 1800.0);
  return f;
}

/// Sinusoidal code for frame offsets relative to the snap.
template <typename S>
Matrix<S> temporal_encoding(int first_offset, Index n_frames, Index d) {
  Matrix<S> pe(n_frames, d);
  for (Index t = 0; t < n_frames; ++t) {
    const double pos = static_cast<double>(first_offset + t);
    for (Index i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe(t, i) = static_cast<S>(std::sin(pos * freq));
      if (i + 1 < d) pe(t, i + 1) = static_cast<S>(std::cos(pos * freq));
    }
  }
  return pe;
}

// Row a * T + t <-> row t * A + a.
template <typename S>
Matrix<S> to_frame_major(const Matrix<S>& x, Index A, Index T) {
  Matrix<S> y(x.rows(), x.cols());
  for (Index a = 0; a < A; ++a)
    for (Index t = 0; t < T; ++t) y.row(t * A + a) = x.row(a * T + t);
  return y;
}

template <typename S>
Matrix<S> to_agent_major(const Matrix<S>& x, Index A, Index T) {
  Matrix<S> y(x.rows(), x.cols());
  for (Index a = 0; a < A; ++a)
    for (Index t = 0; t < T; ++t) y.row(a * T + t) = x.row(t * A + a);
  return y;
}

/// Self-attention applied independently to `groups` contiguous row blocks of length `len`.
template <typename S>
struct MultiHeadAttention {
  Linear<S> q, k, v, o;
  Index heads = 1;

  struct Cache {
    Matrix<S> x, Q, K, V, concat;
    std::vector<Matrix<S>> probs;
    Index groups = 0;
    Index len = 0;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(Index d, Index h) : q(d, d), k(d, d), v(d, d), o(d, d), heads(h) {}

  template <typename R>
  void init(R& rng) {
    q.init(rng);
    k.init(rng);
    v.init(rng);
    o.init(rng);
  }

  Matrix<S> forward(const Matrix<S>& x, Index groups, Index len, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = x;
    c.groups = groups;
    c.len = len;
    c.Q = q.forward(x);
    c.K = k.forward(x);
    c.V = v.forward(x);
    const Index dh = x.cols() / heads;
    c.concat.resize(x.rows(), x.cols());
    c.probs.resize(static_cast<std::size_t>(groups * heads));
    for (Index g = 0; g < groups; ++g)
      for (Index h = 0; h < heads; ++h)
        detail::attention_into<S>(c.Q.block(g * len, h * dh, len, dh), c.K.block(g * len, h * dh, len, dh),
                                  c.V.block(g * len, h * dh, len, dh), nullptr,
                                  c.concat.block(g * len, h * dh, len, dh),
                                  c.probs[static_cast<std::size_t>(g * heads + h)]);
    return o.forward(c.concat);
  }

  Matrix<S> backward(const Cache& c, const Matrix<S>& dy) {
    const Matrix<S> dconcat = o.backward(c.concat, dy);
    const Index dh = c.x.cols() / heads;
    Matrix<S> dQ = Matrix<S>::Zero(c.x.rows(), c.x.cols());
    Matrix<S> dK = dQ, dV = dQ;
    for (Index g = 0; g < c.groups; ++g)
      for (Index h = 0; h < heads; ++h) {
        const Index r0 = g * c.len, c0 = h * dh;
        detail::attention_backward_into<S>(c.Q.block(r0, c0, c.len, dh), c.K.block(r0, c0, c.len, dh),
                                           c.V.block(r0, c0, c.len, dh),
                                           c.probs[static_cast<std::size_t>(g * heads + h)],
                                           dconcat.block(r0, c0, c.len, dh), dQ.block(r0, c0, c.len, dh),
                                           dK.block(r0, c0, c.len, dh), dV.block(r0, c0, c.len, dh));
      }
    Matrix<S> dx = q.backward(c.x, dQ);
    dx += k.backward(c.x, dK);
    dx += v.backward(c.x, dV);
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    q.visit(prefix + ".q", f);
    k.visit(prefix + ".k", f);
    v.visit(prefix + ".v", f);
    o.visit(prefix + ".o", f);
  }
};

/// Pre-norm block: temporal attention per agent, agent attention per frame, then the feed-forward.
template <typename S>
struct EncoderBlock {
  LayerNorm<S> ln1, ln2, ln3;
  MultiHeadAttention<S> temporal, agent;
  Linear<S> ff1, ff2;

  struct Cache {
    typename LayerNorm<S>::Cache ln1, ln2, ln3;
    typename MultiHeadAttention<S>::Cache temporal, agent;
    Matrix<S> h3, u, g;
    DropoutMask<S> d1, d2, dff, d3;
  };

  EncoderBlock() = default;
  EncoderBlock(Index d, Index heads)
      : ln1(d), ln2(d), ln3(d), temporal(d, heads), agent(d, heads), ff1(d, 4 * d), ff2(4 * d, d) {}

  template <typename R>
  void init(R& rng) {
    temporal.init(rng);
    agent.init(rng);
    ff1.init(rng);
    ff2.init(rng);
  }

  Matrix<S> forward(const Matrix<S>& x, Index A, Index T, double rate, Rng* rng, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Index n = x.rows(), d = x.cols();

    Matrix<S> a = temporal.forward(ln1.forward(x, c.ln1), A, T, &c.temporal);
    c.d1 = make_dropout<S>(n, d, rate, rng);
    Matrix<S> x1 = x + c.d1.apply(a);

    Matrix<S> b = agent.forward(ln2.forward(to_frame_major(x1, A, T), c.ln2), T, A, &c.agent);
    c.d2 = make_dropout<S>(n, d, rate, rng);
    Matrix<S> x2 = x1 + c.d2.apply(to_agent_major(b, A, T));

    c.h3 = ln3.forward(x2, c.ln3);
    c.u = ff1.forward(c.h3);
    c.dff = make_dropout<S>(n, 4 * d, rate, rng);
    c.g = c.dff.apply(gelu(c.u));
    c.d3 = make_dropout<S>(n, d, rate, rng);
    return x2 + c.d3.apply(ff2.forward(c.g));
  }

  Matrix<S> backward(const Cache& c, const Matrix<S>& dy, Index A, Index T) {
    Matrix<S> dx2 = dy;
    const Matrix<S> dg = c.dff.apply(ff2.backward(c.g, c.d3.apply(dy)));
    dx2 += ln3.backward(c.ln3, ff1.backward(c.h3, gelu_backward(c.u, dg)));

    const Matrix<S> db = to_frame_major(c.d2.apply(dx2), A, T);
    Matrix<S> dx1 = dx2 + to_agent_major(ln2.backward(c.ln2, agent.backward(c.agent, db)), A, T);

    const Matrix<S> da = c.d1.apply(dx1);
    return dx1 + ln1.backward(c.ln1, temporal.backward(c.temporal, da));
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    ln1.visit(prefix + ".ln1", f);
    temporal.visit(prefix + ".temporal", f);
    ln2.visit(prefix + ".ln2", f);
    agent.visit(prefix + ".agent", f);
    ln3.visit(prefix + ".ln3", f);
    ff1.visit(prefix + ".ff1", f);
    ff2.visit(prefix + ".ff2", f);
  }
};

/// Factorized encoder plus the head for one task.
template <typename S>
class CovNet {
 public:
  struct Cache {
    Index A = 0, T = 0;
    std::vector<typename EncoderBlock<S>::Cache> blocks;
    typename LayerNorm<S>::Cache final_ln;
    Matrix<S> latent;      // [A, 3d]
    Matrix<S> head_in;     // coverage: [D, 3d + situation + scheme]; pair heads: defender latents
    Matrix<S> head_other;  // matchup: [null; receiver latents]; target: targeted receiver latent
    Matrix<S> head_pre;    // pre-activation of the head hidden layer
    Matrix<S> head_act;    // post-activation (after dropout)
    DropoutMask<S> head_drop;
  };

  CovNet() = default;

  CovNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    const Index d = cfg.d_model;
    input_ = Linear<S>(kFeatureChannels, d);
    pos_table_ = Param<S>(kNumPositionCodes, d);
    side_table_ = Param<S>(2, d);
    for (int i = 0; i < cfg.n_layers; ++i) blocks_.emplace_back(d, cfg.n_heads);
    final_ln_ = LayerNorm<S>(d);
    const Index latent = 3 * d, H = cfg.head_hidden;
    switch (cfg.task) {
      case Task::Coverage:
        scheme_table_ = Param<S>(kNumSchemes, cfg.scheme_dim);
        fc1_ = Linear<S>(latent + kSituationFeatures + cfg.scheme_dim, H);
        fc2_ = Linear<S>(H, cfg.n_coverage_classes);
        break;
      case Task::Matchup:
        null_receiver_ = Param<S>(1, latent);
        [[fallthrough]];
      case Task::Target:
        fc1_ = Linear<S>(latent, H);
        pair_other_ = Param<S>(latent, H);
        fc2_ = Linear<S>(H, 1);
        break;
    }

    Rng rng = derive_rng(seed, 0x1A17ull);
    input_.init(rng);
    normal_init(pos_table_, 0.1, rng);
    normal_init(side_table_, 0.1, rng);
    for (auto& b : blocks_) b.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
    if (cfg.task == Task::Coverage) normal_init(scheme_table_, 0.1, rng);
    if (cfg.task != Task::Coverage) xavier_uniform(pair_other_, rng);
    if (cfg.task == Task::Matchup) normal_init(null_receiver_, 0.1, rng);
    input_.weight.value.topRows(2) *= static_cast<S>(cfg_.coordinate_gain);
  }

  const ModelConfig& config() const { return cfg_; }
  Task task() const { return cfg_.task; }

  /// Per-agent latents [A, 3d]: pooled encoder output ++ position embedding ++ side embedding.
  Matrix<S> encode(const ModelInput& in, Rng* dropout_rng = nullptr, Cache* cache = nullptr) const {
    const Index A = in.n_agents, T = in.n_frames, d = cfg_.d_model;
    if (T < 1) throw ConfigError("encode: window has no frames");
    if (A < 2) throw ConfigError("encode: need at least two agents");
    if (in.features.rows() != A * T || in.features.cols() != kFeatureChannels)
      throw ConfigError("encode: feature matrix shape mismatch");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.A = A;
    c.T = T;
    const double rate = dropout_rng ? cfg_.dropout : 0.0;

    Matrix<S> x = input_.forward(in.features.template cast<S>());
    Matrix<S> pe = temporal_encoding<S>(in.first_offset, T, d);
    pe *= static_cast<S>(cfg_.temporal_encoding_scale);
    for (Index a = 0; a < A; ++a) {
      const RowVector<S> stat = pos_table_.value.row(static_cast<Index>(in.positions[static_cast<std::size_t>(a)])) +
                                side_table_.value.row(static_cast<Index>(in.sides[static_cast<std::size_t>(a)]));
      x.middleRows(a * T, T).rowwise() += stat;
      x.middleRows(a * T, T) += pe;
    }
    c.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) x = blocks_[i].forward(x, A, T, rate, dropout_rng, &c.blocks[i]);
    const Matrix<S> xf = final_ln_.forward(x, c.final_ln);

    Matrix<S> latent(A, 3 * d);
    for (Index a = 0; a < A; ++a) {
      latent.row(a).head(d) = xf.middleRows(a * T, T).colwise().mean();
      latent.row(a).segment(d, d) = pos_table_.value.row(static_cast<Index>(in.positions[static_cast<std::size_t>(a)]));
      latent.row(a).tail(d) = side_table_.value.row(static_cast<Index>(in.sides[static_cast<std::size_t>(a)]));
    }
    c.latent = latent;
    return latent;
  }

  HeadOutputs<S> forward(const ModelInput& in, Rng* dropout_rng = nullptr, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Matrix<S> latent = encode(in, dropout_rng, &c);
    const double rate = dropout_rng ? cfg_.dropout : 0.0;
    const Index D = static_cast<Index>(in.defenders.size());
    if (D < 1) throw ConfigError("forward: play has no defenders");
    Matrix<S> Ld(D, latent.cols());
    for (Index i = 0; i < D; ++i) Ld.row(i) = latent.row(in.defenders[static_cast<std::size_t>(i)]);

    HeadOutputs<S> out;
    switch (cfg_.task) {
      case Task::Coverage: {
        const int scheme = static_cast<int>(in.situation.team_scheme);
        if (scheme < 0 || scheme >= kNumSchemes) throw ConfigError("unknown team scheme");
        const Index L = latent.cols();
        c.head_in.resize(D, L + kSituationFeatures + cfg_.scheme_dim);
        c.head_in.leftCols(L) = Ld;
        c.head_in.middleCols(L, kSituationFeatures).rowwise() = situation_features<S>(in.situation);
        c.head_in.rightCols(cfg_.scheme_dim).rowwise() = scheme_table_.value.row(scheme);
        c.head_pre = fc1_.forward(c.head_in);
        c.head_drop = make_dropout<S>(c.head_pre.rows(), c.head_pre.cols(), rate, dropout_rng);
        c.head_act = c.head_drop.apply(gelu(c.head_pre));
        out.coverage_logits = fc2_.forward(c.head_act);
        break;
      }
      case Task::Matchup: {
        const Index R = static_cast<Index>(in.receivers.size());
        if (R < 1) throw ConfigError("matchup head needs at least one receiver");
        c.head_in = Ld;
        c.head_other.resize(R + 1, latent.cols());
        c.head_other.row(0) = null_receiver_.value.row(0);
        for (Index r = 0; r < R; ++r) c.head_other.row(r + 1) = latent.row(in.receivers[static_cast<std::size_t>(r)]);
        const Matrix<S> Ud = fc1_.forward(Ld);
        const Matrix<S> Ur = c.head_other * pair_other_.value;
        c.head_pre.resize(D * (R + 1), Ud.cols());
        for (Index i = 0; i < D; ++i)
          for (Index r = 0; r <= R; ++r) c.head_pre.row(i * (R + 1) + r) = Ud.row(i) + Ur.row(r);
        c.head_drop = make_dropout<S>(c.head_pre.rows(), c.head_pre.cols(), rate, dropout_rng);
        c.head_act = c.head_drop.apply(gelu(c.head_pre));
        const Matrix<S> s = fc2_.forward(c.head_act);
        out.matchup_logits = Eigen::Map<const Matrix<S>>(s.data(), D, R + 1);
        break;
      }
      case Task::Target: {
        if (!in.targeted_receiver) throw ConfigError("target head needs the targeted receiver");
        c.head_in = Ld;
        c.head_other = latent.row(*in.targeted_receiver);
        const Matrix<S> Ud = fc1_.forward(Ld);
        const RowVector<S> ur = c.head_other * pair_other_.value;
        c.head_pre = Ud.rowwise() + ur;
        c.head_drop = make_dropout<S>(c.head_pre.rows(), c.head_pre.cols(), rate, dropout_rng);
        c.head_act = c.head_drop.apply(gelu(c.head_pre));
        const Matrix<S> s = fc2_.forward(c.head_act);
        out.target_logits.resize(1, D + 1);
        out.target_logits.leftCols(D) = s.transpose();
        out.target_logits(0, D) = static_cast<S>(kMaskSentinel);
        break;
      }
    }
    return out;
  }

  /// Accumulates parameter gradients for d(loss)/d(logits of this model's task).
  void backward(const ModelInput& in, const Cache& c, const Matrix<S>& dlogits) {
    const Index D = static_cast<Index>(in.defenders.size());
    const Index L = c.latent.cols();
    Matrix<S> dlatent = Matrix<S>::Zero(c.A, L);
    switch (cfg_.task) {
      case Task::Coverage: {
        const Matrix<S> dact = c.head_drop.apply(fc2_.backward(c.head_act, dlogits));
        const Matrix<S> dX = fc1_.backward(c.head_in, gelu_backward(c.head_pre, dact));
        const int scheme = static_cast<int>(in.situation.team_scheme);
        scheme_table_.grad.row(scheme) += dX.rightCols(cfg_.scheme_dim).colwise().sum();
        for (Index i = 0; i < D; ++i) dlatent.row(in.defenders[static_cast<std::size_t>(i)]) += dX.row(i).head(L);
        break;
      }
      case Task::Matchup: {
        const Index R = static_cast<Index>(in.receivers.size());
        const Matrix<S> ds = Eigen::Map<const Matrix<S>>(dlogits.data(), D * (R + 1), 1);
        const Matrix<S> dact = c.head_drop.apply(fc2_.backward(c.head_act, ds));
        const Matrix<S> dpre = gelu_backward(c.head_pre, dact);
        Matrix<S> dUd = Matrix<S>::Zero(D, dpre.cols());
        Matrix<S> dUr = Matrix<S>::Zero(R + 1, dpre.cols());
        for (Index i = 0; i < D; ++i)
          for (Index r = 0; r <= R; ++r) {
            dUd.row(i) += dpre.row(i * (R + 1) + r);
            dUr.row(r) += dpre.row(i * (R + 1) + r);
          }
        const Matrix<S> dLd = fc1_.backward(c.head_in, dUd);
        pair_other_.grad.noalias() += c.head_other.transpose() * dUr;
        const Matrix<S> dOther = dUr * pair_other_.value.transpose();
        null_receiver_.grad.row(0) += dOther.row(0);
        for (Index i = 0; i < D; ++i) dlatent.row(in.defenders[static_cast<std::size_t>(i)]) += dLd.row(i);
        for (Index r = 0; r < R; ++r) dlatent.row(in.receivers[static_cast<std::size_t>(r)]) += dOther.row(r + 1);
        break;
      }
      case Task::Target: {
        const Matrix<S> ds = dlogits.leftCols(D).transpose();
        const Matrix<S> dact = c.head_drop.apply(fc2_.backward(c.head_act, ds));
        const Matrix<S> dpre = gelu_backward(c.head_pre, dact);
        const Matrix<S> dLd = fc1_.backward(c.head_in, dpre);
        const RowVector<S> dur = dpre.colwise().sum();
        pair_other_.grad.noalias() += c.head_other.transpose() * dur;
        for (Index i = 0; i < D; ++i) dlatent.row(in.defenders[static_cast<std::size_t>(i)]) += dLd.row(i);
        dlatent.row(*in.targeted_receiver) += dur * pair_other_.value.transpose();
        break;
      }
    }
    backward_encoder(in, c, dlatent);
  }

  template <typename F>
  void visit(F&& f) {
    input_.visit("encoder.input", f);
    f("encoder.position_embedding", pos_table_);
    f("encoder.side_embedding", side_table_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("encoder.block" + std::to_string(i), f);
    final_ln_.visit("encoder.final_ln", f);
    if (cfg_.task == Task::Coverage) f("head.scheme_embedding", scheme_table_);
    if (cfg_.task == Task::Matchup) f("head.null_receiver", null_receiver_);
    fc1_.visit("head.fc1", f);
    if (cfg_.task != Task::Coverage) f("head.pair_other", pair_other_);
    fc2_.visit("head.fc2", f);
  }

  void zero_grad() {
    visit([](const std::string&, Param<S>& p) { p.zero_grad(); });
  }

  Index parameter_count() {
    Index n = 0;
    visit([&](const std::string&, Param<S>& p) { n += p.value.size(); });
    return n;
  }

 private:
  void backward_encoder(const ModelInput& in, const Cache& c, const Matrix<S>& dlatent) {
    const Index A = c.A, T = c.T, d = cfg_.d_model;
    Matrix<S> dx(A * T, d);
    for (Index a = 0; a < A; ++a) {
      const auto pos = static_cast<Index>(in.positions[static_cast<std::size_t>(a)]);
      const auto side = static_cast<Index>(in.sides[static_cast<std::size_t>(a)]);
      pos_table_.grad.row(pos) += dlatent.row(a).segment(d, d);
      side_table_.grad.row(side) += dlatent.row(a).tail(d);
      dx.middleRows(a * T, T).rowwise() = dlatent.row(a).head(d) / static_cast<S>(T);
    }
    dx = final_ln_.backward(c.final_ln, dx);
    for (std::size_t i = blocks_.size(); i-- > 0;) dx = blocks_[i].backward(c.blocks[i], dx, A, T);
    input_.backward(in.features.template cast<S>(), dx);
    for (Index a = 0; a < A; ++a) {
      const RowVector<S> g = dx.middleRows(a * T, T).colwise().sum();
      pos_table_.grad.row(static_cast<Index>(in.positions[static_cast<std::size_t>(a)])) += g;
      side_table_.grad.row(static_cast<Index>(in.sides[static_cast<std::size_t>(a)])) += g;
    }
  }

  ModelConfig cfg_;
  Linear<S> input_;
  Param<S> pos_table_;
  Param<S> side_table_;
  std::vector<EncoderBlock<S>> blocks_;
  LayerNorm<S> final_ln_;
  Param<S> scheme_table_;
  Param<S> null_receiver_;
  Linear<S> fc1_;
  Param<S> pair_other_;
  Linear<S> fc2_;
};

extern template class CovNet<float>;
extern template class CovNet<double>;

/// Softmax of the task logits (target slot mask included).
template <typename S>
Matrix<double> head_probabilities(const HeadOutputs<S>& out, Task task);

/// For end frames e = -30, -30 + stride, ... <= pass_arrival, the window (-30, e).
template <typename S>
struct FramePrediction {
  Index end_frame = 0;
  HeadOutputs<S> outputs;
};

std::vector<Index> prediction_end_frames(const EventOffsets& events, Index stride);

template <typename S>
std::vector<FramePrediction<S>> predict_frames(const PreparedPlay& play, const CovNet<S>& model, Index stride);

}  // namespace covnet
