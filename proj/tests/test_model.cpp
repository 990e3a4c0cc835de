#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "covnet/model.hpp"
#include "covnet/synthgen.hpp"

using namespace covnet;

namespace {

ModelConfig tiny(Task task, int d = 16, int heads = 2, int layers = 2) {
  ModelConfig cfg = ModelConfig::defaults(task);
  cfg.d_model = d;
  cfg.n_heads = heads;
  cfg.n_layers = layers;
  cfg.head_hidden = 16;
  cfg.scheme_dim = 4;
  return cfg;
}

void randomize(CovNet<double>& net, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  net.visit([&](const std::string&, Param<double>& p) {
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += n(rng);
  });
}

using Rows = std::vector<std::vector<double>>;

std::vector<double> layer_norm(const std::vector<double>& x, const Param<double>& g, const Param<double>& b) {
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g.value(0, static_cast<Index>(i)) + b.value(0, static_cast<Index>(i));
  return y;
}

std::vector<double> affine(const std::vector<double>& x, const Param<double>& w, const Param<double>& b) {
  std::vector<double> y(static_cast<std::size_t>(w.value.cols()));
  for (Index j = 0; j < w.value.cols(); ++j) {
    double s = b.value(0, j);
    for (Index i = 0; i < w.value.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w.value(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / std::acos(-1.0)) * (v + 0.044715 * v * v * v))); }

}  // namespace

TEST_CASE("head output shapes for every task") {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const Index A = 2 + i % 21, T = 1 + (i * 7) % 40;
    const ModelInput in = checks::random_input(rng, A, T, true);
    const Index D = static_cast<Index>(in.defenders.size()), R = static_cast<Index>(in.receivers.size());
    CovNet<float> cov(tiny(Task::Coverage), 1), mat(tiny(Task::Matchup), 2), tgt(tiny(Task::Target), 3);
    const auto c = cov.forward(in);
    CHECK(c.coverage_logits.rows() == D);
    CHECK(c.coverage_logits.cols() == 20);
    const auto m = mat.forward(in);
    CHECK(m.matchup_logits.rows() == D);
    CHECK(m.matchup_logits.cols() == R + 1);
    const auto t = tgt.forward(in);
    CHECK(t.target_logits.rows() == 1);
    CHECK(t.target_logits.cols() == D + 1);
    CHECK(t.target_logits(0, D) == doctest::Approx(-1e9));
    CHECK(c.coverage_logits.allFinite());
    CHECK(m.matchup_logits.allFinite());
    CHECK(t.target_logits.leftCols(D).allFinite());
  }
}

TEST_CASE("input validation") {
  Rng rng(4);
  CovNet<double> net(tiny(Task::Coverage), 5);
  ModelInput in = checks::random_input(rng, 6, 3, false);
  ModelInput empty = in;
  empty.n_frames = 0;
  empty.features.resize(0, kFeatureChannels);
  CHECK_THROWS_AS(net.forward(empty), ConfigError);
  ModelInput bad_scheme = in;
  bad_scheme.situation.team_scheme = static_cast<Scheme>(kNumSchemes);
  CHECK_THROWS_AS(net.forward(bad_scheme), ConfigError);
  CovNet<double> tgt(tiny(Task::Target), 5);
  CHECK_THROWS_AS(tgt.forward(in), ConfigError);  // no targeted receiver
  ModelConfig cfg = tiny(Task::Coverage);
  cfg.n_heads = 3;
  CHECK_THROWS_AS(CovNet<double>(cfg, 1), ConfigError);
  cfg = tiny(Task::Coverage);
  cfg.n_coverage_classes = 19;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("agent permutations permute the outputs") {
  const auto r = checks::check_equivariance(1000, 77);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("masked offensive slot gets no probability") {
  const auto r = checks::check_masking(2000, 78);
  INFO(r.detail);
  CHECK(r.pass);
  HeadOutputs<double> out;
  out.target_logits = Matrix<double>::Zero(1, 8);
  out.target_logits(0, 7) = kMaskSentinel;
  const Matrix<double> p = head_probabilities(out, Task::Target);
  for (Index j = 0; j < 7; ++j) CHECK(p(0, j) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("single-frame windows work and agree with the same frame inside a longer window's first step") {
  Rng rng(6);
  const ModelInput in = checks::random_input(rng, 7, 1, true);
  for (Task task : {Task::Coverage, Task::Matchup, Task::Target}) {
    CovNet<double> net(tiny(task), 9);
    const auto out = net.forward(in);
    CHECK(out.logits(task).rows() >= 1);
    CHECK(out.logits(task).leftCols(out.logits(task).cols() - (task == Task::Target)).allFinite());
  }
}

TEST_CASE("zeroed attention output projections reduce to the bypass network") {
  Rng rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    const ModelConfig cfg = tiny(trial % 2 ? Task::Matchup : Task::Coverage, 8, 2, 1 + trial % 3);
    CovNet<double> net(cfg, 100 + trial);
    randomize(net, 200 + trial);
    std::map<std::string, Param<double>*> P;
    net.visit([&](const std::string& name, Param<double>& p) {
      if (name.find(".o.") != std::string::npos) p.value.setZero();
      P[name] = &p;
    });
    const Index A = 5 + trial, T = 2 + 3 * trial;
    const ModelInput in = checks::random_input(rng, A, T, false);
    const Matrix<double> latent = net.encode(in);
    const Index d = cfg.d_model;

    for (Index a = 0; a < A; ++a) {
      const auto pos = static_cast<Index>(in.positions[static_cast<std::size_t>(a)]);
      const auto side = static_cast<Index>(in.sides[static_cast<std::size_t>(a)]);
      std::vector<double> pooled(static_cast<std::size_t>(d), 0.0);
      for (Index t = 0; t < T; ++t) {
        std::vector<double> f(kFeatureChannels);
        for (int c = 0; c < kFeatureChannels; ++c) f[static_cast<std::size_t>(c)] = in.features(a * T + t, c);
        std::vector<double> h = affine(f, *P["encoder.input.weight"], *P["encoder.input.bias"]);
        for (Index i = 0; i < d; ++i) {
          const double pos_t = in.first_offset + t;
          const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
          const double pe = i % 2 ? std::cos(pos_t * freq) : std::sin(pos_t * freq);
          h[static_cast<std::size_t>(i)] += P["encoder.position_embedding"]->value(pos, i) +
                                            P["encoder.side_embedding"]->value(side, i) +
                                            cfg.temporal_encoding_scale * pe;
        }
        for (int l = 0; l < cfg.n_layers; ++l) {
          const std::string b = "encoder.block" + std::to_string(l);
          std::vector<double> u = affine(layer_norm(h, *P[b + ".ln3.gain"], *P[b + ".ln3.shift"]),
                                         *P[b + ".ff1.weight"], *P[b + ".ff1.bias"]);
          for (double& v : u) v = gelu_scalar(v);
          const std::vector<double> ff = affine(u, *P[b + ".ff2.weight"], *P[b + ".ff2.bias"]);
          for (std::size_t i = 0; i < h.size(); ++i) h[i] += ff[i];
        }
        h = layer_norm(h, *P["encoder.final_ln.gain"], *P["encoder.final_ln.shift"]);
        for (std::size_t i = 0; i < h.size(); ++i) pooled[i] += h[i] / static_cast<double>(T);
      }
      for (Index i = 0; i < d; ++i) {
        CHECK(latent(a, i) == doctest::Approx(pooled[static_cast<std::size_t>(i)]).epsilon(1e-10));
        CHECK(latent(a, d + i) == P["encoder.position_embedding"]->value(pos, i));
        CHECK(latent(a, 2 * d + i) == P["encoder.side_embedding"]->value(side, i));
      }
    }
  }
}

TEST_CASE("identical receivers get identical matchup columns and pair scores are ordered") {
  Rng rng(10);
  ModelInput in = checks::random_input(rng, 9, 6, false);
  while (in.receivers.size() < 2) in = checks::random_input(rng, 9, 6, false);
  const Index r0 = in.receivers[0], r1 = in.receivers[1];
  in.features.middleRows(r1 * in.n_frames, in.n_frames) = in.features.middleRows(r0 * in.n_frames, in.n_frames);
  in.positions[static_cast<std::size_t>(r1)] = in.positions[static_cast<std::size_t>(r0)];
  CovNet<double> net(tiny(Task::Matchup), 12);
  randomize(net, 13);
  const Matrix<double> z = net.forward(in).matchup_logits;
  for (Index d = 0; d < z.rows(); ++d) CHECK(z(d, 1) == doctest::Approx(z(d, 2)).epsilon(1e-12));
}

TEST_CASE("evaluation mode is deterministic and the scheme input matters") {
  Rng rng(14);
  const ModelInput in = checks::random_input(rng, 10, 8, true);
  CovNet<float> net(tiny(Task::Coverage), 15);
  const auto a = net.forward(in), b = net.forward(in);
  CHECK(a.coverage_logits == b.coverage_logits);
  ModelInput other = in;
  other.situation.team_scheme = static_cast<Scheme>((static_cast<int>(in.situation.team_scheme) + 1) % kNumSchemes);
  CHECK((net.forward(other).coverage_logits - a.coverage_logits).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("frame-by-frame predictions") {
  GenConfig g;
  g.n_plays = 3;
  CovNet<float> net(tiny(Task::Matchup), 16);
  for (long i = 0; i < g.n_plays; ++i) {
    const PreparedPlay p = prepare_play(gen_play(g, i));
    for (Index stride : {1, 3, 7}) {
      const auto frames = predict_frames(p, net, stride);
      const Index total = p.events.pass_arrival - kEarliestStartOffset + 1;
      CHECK(static_cast<Index>(frames.size()) == (total - 1) / stride + 1);
      for (std::size_t k = 1; k < frames.size(); ++k) CHECK(frames[k].end_frame > frames[k - 1].end_frame);
    }
    const auto frames = predict_frames(p, net, 1);
    CHECK(frames.back().end_frame == p.events.pass_arrival);
    CHECK(frames.back().outputs.matchup_logits == net.forward(make_input(p, p.full_window())).matchup_logits);
    CHECK(frames[30].end_frame == 0);
    CHECK(frames[30].outputs.matchup_logits == net.forward(make_input(p, Window{-30, 0})).matchup_logits);
    CHECK_THROWS_AS(predict_frames(p, net, 0), ConfigError);
  }
}

TEST_CASE("model config json round trip") {
  ModelConfig cfg = tiny(Task::Target);
  cfg.coordinate_gain = 12.5;
  CHECK(ModelConfig::from_json(cfg.to_json()) == cfg);
  const ModelConfig t = ModelConfig::defaults(Task::Target), m = ModelConfig::defaults(Task::Matchup),
                    c = ModelConfig::defaults(Task::Coverage);
  CHECK(t.n_heads == 4);
  CHECK(m.n_heads == 4);
  CHECK(c.n_heads == 8);
  CHECK(t.n_layers == 3);
  CHECK(m.n_layers == 3);
  CHECK(c.n_layers == 6);
  CHECK(m.dropout == doctest::Approx(0.2));
}
