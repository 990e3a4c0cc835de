#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "covnet/augmentation.hpp"
#include "covnet/numerics/grad_check.hpp"
#include "covnet/numerics/schedules.hpp"
#include "covnet/training.hpp"

namespace covnet::checks {

namespace {

Index uniform_index(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

Matrix<double> random_logits(Rng& rng, Index r, Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix<double> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

ModelConfig small_config(Task task, Rng& rng, int d_model) {
  ModelConfig cfg = ModelConfig::defaults(task);
  const int heads[] = {1, 2, 4};
  cfg.d_model = d_model;
  cfg.n_heads = heads[uniform_index(rng, 0, 2)];
  cfg.n_layers = static_cast<int>(uniform_index(rng, 1, 2));
  cfg.head_hidden = d_model;
  cfg.scheme_dim = 4;
  return cfg;
}

std::vector<Param<double>*> parameters(CovNet<double>& net) {
  std::vector<Param<double>*> out;
  net.visit([&](const std::string&, Param<double>& p) { out.push_back(&p); });
  return out;
}

double task_loss_of(const HeadOutputs<double>& out, Task task, const std::vector<int>& target, Matrix<double>* grad) {
  switch (task) {
    case Task::Coverage: return loss_coverage(out.coverage_logits, target, grad);
    case Task::Matchup:
      return loss_matchup(out.matchup_logits, matchup_onehot<double>(target, out.matchup_logits.cols()), grad);
    case Task::Target: return loss_target(out.target_logits, target.front(), grad);
  }
  return 0.0;
}

std::vector<int> random_targets(Rng& rng, Task task, const ModelInput& in) {
  const Index D = static_cast<Index>(in.defenders.size());
  const Index R = static_cast<Index>(in.receivers.size());
  std::vector<int> t;
  if (task == Task::Target) return {static_cast<int>(uniform_index(rng, 0, D - 1))};
  for (Index d = 0; d < D; ++d)
    t.push_back(static_cast<int>(uniform_index(rng, 0, task == Task::Coverage ? kNumCoverageClasses - 1 : R)));
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

ModelInput random_input(Rng& rng, Index A, Index T, bool with_target) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::acos(-1.0));
  ModelInput in;
  in.n_agents = A;
  in.n_frames = T;
  in.first_offset = static_cast<int>(uniform_index(rng, -30, 0));
  in.features.resize(A * T, kFeatureChannels);
  for (Index r = 0; r < A * T; ++r) {
    const double o = angle(rng), d = angle(rng);
    in.features.row(r) << unit(rng), unit(rng), std::sin(o), std::cos(o), std::sin(d), std::cos(d), unit(rng),
        (in.first_offset + r % T) > 0 ? 1.0 : 0.0;
  }
  const Index n_def = uniform_index(rng, 1, A - 1);
  for (Index a = 0; a < A; ++a) {
    const bool def = a < n_def;
    in.sides.push_back(def ? TeamSide::Defense : TeamSide::Offense);
    const int pos = def ? static_cast<int>(uniform_index(rng, 5, 8)) : static_cast<int>(uniform_index(rng, 0, 4));
    in.positions.push_back(static_cast<PositionCode>(pos));
  }
  // Shuffle agent order so roles are interleaved.
  std::vector<Index> order(static_cast<std::size_t>(A));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<TeamSide> sides(in.sides.size());
  std::vector<PositionCode> positions(in.positions.size());
  for (Index a = 0; a < A; ++a) {
    sides[static_cast<std::size_t>(a)] = in.sides[static_cast<std::size_t>(order[static_cast<std::size_t>(a)])];
    positions[static_cast<std::size_t>(a)] = in.positions[static_cast<std::size_t>(order[static_cast<std::size_t>(a)])];
  }
  in.sides = sides;
  in.positions = positions;
  std::vector<Index> offense;
  for (Index a = 0; a < A; ++a) {
    if (in.sides[static_cast<std::size_t>(a)] == TeamSide::Defense)
      in.defenders.push_back(a);
    else
      offense.push_back(a);
  }
  // A random non-empty subset of the offense are eligible receivers.
  for (Index a : offense)
    if (unit(rng) < 0.7) in.receivers.push_back(a);
  if (in.receivers.empty()) in.receivers.push_back(offense.front());
  if (with_target) in.targeted_receiver = in.receivers[static_cast<std::size_t>(
                       uniform_index(rng, 0, static_cast<Index>(in.receivers.size()) - 1))];
  in.situation.down = static_cast<int>(uniform_index(rng, 1, 4));
  in.situation.distance = 1.0 + 19.0 * unit(rng);
  in.situation.yard_line = 1.0 + 98.0 * unit(rng);
  in.situation.game_clock_s = 3600.0 * unit(rng);
  in.situation.team_scheme = static_cast<Scheme>(uniform_index(rng, 0, kNumSchemes - 1));
  return in;
}

long double naive_cross_entropy(const std::vector<double>& logits, std::size_t true_index) {
  long double sum = 0;
  for (double z : logits) sum += std::exp(static_cast<long double>(z));
  return -std::log(std::exp(static_cast<long double>(logits[true_index])) / sum);
}

CheckResult check_loss_gradients(int n_configs, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 1);
  double worst = 0.0;
  for (int i = 0; i < n_configs; ++i) {
    const Index D = uniform_index(rng, 1, 11), R = uniform_index(rng, 1, 7);
    const Task task = static_cast<Task>(i % 3);
    const Index cols = task == Task::Coverage ? kNumCoverageClasses : task == Task::Matchup ? R + 1 : D + 1;
    const Index rows = task == Task::Target ? 1 : D;
    std::vector<int> target;
    if (task == Task::Target)
      target = {static_cast<int>(uniform_index(rng, 0, D - 1))};
    else
      for (Index d = 0; d < D; ++d) target.push_back(static_cast<int>(uniform_index(rng, 0, cols - 1)));
    const Matrix<double> z0 = random_logits(rng, rows, cols, 4.0);
    auto f = [&](const Vector<double>& x, Vector<double>* g) {
      HeadOutputs<double> out;
      out.logits(task) = Eigen::Map<const Matrix<double>>(x.data(), rows, cols);
      if (task == Task::Target) out.target_logits(0, cols - 1) = kMaskSentinel;
      Matrix<double> grad;
      const double v = task_loss_of(out, task, target, g ? &grad : nullptr);
      if (g) {
        if (task == Task::Target) grad(0, cols - 1) = 0.0;
        *g = Eigen::Map<const Vector<double>>(grad.data(), grad.size());
      }
      return v;
    };
    const Vector<double> point = Eigen::Map<const Vector<double>>(z0.data(), z0.size());
    std::vector<Index> coords;
    for (Index k = 0; k < point.size(); ++k)
      if (!(task == Task::Target && k == cols - 1)) coords.push_back(k);
    worst = std::max(worst, grad_check(f, point, 1e-5, coords).max_rel_error);
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " over " + std::to_string(n_configs) + " loss configs"};
}

CheckResult check_model_gradients(int n_configs, std::uint64_t seed, int coords_per_config) {
  Rng rng = derive_rng(seed, 2);
  double worst = 0.0;
  std::string where;
  for (int i = 0; i < n_configs; ++i) {
    const Task task = static_cast<Task>(i % 3);
    const Index A = uniform_index(rng, 4, 14), T = uniform_index(rng, 2, 40);
    ModelConfig cfg = small_config(task, rng, 8);
    cfg.dropout = i % 2 ? 0.2 : 0.0;
    CovNet<double> net(cfg, rng());
    const ModelInput in = random_input(rng, A, T, task == Task::Target);
    const std::vector<int> target = random_targets(rng, task, in);
    const std::uint64_t dropout_seed = rng();
    const auto params = parameters(net);

    Index n = 0;
    for (auto* p : params) n += p->value.size();
    Vector<double> point(n);
    Index off = 0;
    for (auto* p : params) {
      point.segment(off, p->value.size()) = Eigen::Map<const Vector<double>>(p->value.data(), p->value.size());
      off += p->value.size();
    }
    auto f = [&](const Vector<double>& x, Vector<double>* g) {
      Index o = 0;
      for (auto* p : params) {
        Eigen::Map<Vector<double>>(p->value.data(), p->value.size()) = x.segment(o, p->value.size());
        o += p->value.size();
      }
      Rng drop(dropout_seed);
      typename CovNet<double>::Cache cache;
      const HeadOutputs<double> out = net.forward(in, cfg.dropout > 0 ? &drop : nullptr, &cache);
      Matrix<double> dlogits;
      const double v = task_loss_of(out, task, target, g ? &dlogits : nullptr);
      if (g) {
        net.zero_grad();
        net.backward(in, cache, dlogits);
        o = 0;
        for (auto* p : params) {
          g->segment(o, p->value.size()) = Eigen::Map<const Vector<double>>(p->grad.data(), p->grad.size());
          o += p->value.size();
        }
      }
      return v;
    };
    // One coordinate in every parameter tensor, the rest at random.
    std::vector<Index> coords;
    off = 0;
    for (auto* p : params) {
      coords.push_back(off + uniform_index(rng, 0, p->value.size() - 1));
      off += p->value.size();
    }
    while (static_cast<int>(coords.size()) < coords_per_config) coords.push_back(uniform_index(rng, 0, n - 1));
    const GradCheckResult r = grad_check(f, point, 1e-5, coords);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = std::string(task_name(task)) + " A=" + std::to_string(A) + " T=" + std::to_string(T);
    }
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " over " + std::to_string(n_configs) +
                            " model configs (worst " + where + ")"};
}

CheckResult check_loss_oracles(int n_instances, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 3);
  long double worst = 0;
  for (int i = 0; i < n_instances; ++i) {
    const Task task = static_cast<Task>(i % 3);
    const Index D = uniform_index(rng, 1, 11), R = uniform_index(rng, 1, 7);
    const Index cols = task == Task::Coverage ? kNumCoverageClasses : task == Task::Matchup ? R + 1 : D + 1;
    const Index rows = task == Task::Target ? 1 : D;
    Matrix<double> z = random_logits(rng, rows, cols, 20.0);
    long double oracle = 0;
    double got = 0;
    if (task == Task::Target) {
      z(0, D) = kMaskSentinel;
      const Index t = uniform_index(rng, 0, D - 1);
      std::vector<double> row(z.data(), z.data() + z.size());
      oracle = naive_cross_entropy(row, static_cast<std::size_t>(t));
      got = loss_target(z, t);
    } else {
      std::vector<int> cls;
      for (Index d = 0; d < D; ++d) {
        cls.push_back(static_cast<int>(uniform_index(rng, 0, cols - 1)));
        std::vector<double> row(static_cast<std::size_t>(cols));
        for (Index c = 0; c < cols; ++c) row[static_cast<std::size_t>(c)] = z(d, c);
        oracle += naive_cross_entropy(row, static_cast<std::size_t>(cls.back()));
      }
      oracle /= static_cast<long double>(D);
      got = task == Task::Coverage ? loss_coverage(z, cls) : loss_matchup(z, matchup_onehot<double>(cls, cols));
    }
    worst = std::max(worst, std::fabs(oracle - static_cast<long double>(got)));
  }
  return {worst < 1e-9L, "max |loss - oracle| " + fmt(static_cast<double>(worst)) + " over " +
                             std::to_string(n_instances) + " instances"};
}

CheckResult check_loss_closed_forms() {
  double worst = 0.0;
  for (Index R = 1; R <= 8; ++R)
    for (Index D = 1; D <= 11; ++D) {
      std::vector<int> cls(static_cast<std::size_t>(D));
      for (Index d = 0; d < D; ++d) cls[static_cast<std::size_t>(d)] = static_cast<int>(d % (R + 1));
      const double v = loss_matchup<double>(Matrix<double>::Zero(D, R + 1), matchup_onehot<double>(cls, R + 1));
      worst = std::max(worst, std::fabs(v - std::log(static_cast<double>(R + 1))));
    }
  const double cov = loss_coverage<double>(Matrix<double>::Zero(7, kNumCoverageClasses), std::vector<int>{0, 1, 2, 5, 9, 13, 19});
  worst = std::max(worst, std::fabs(cov - std::log(20.0)));
  Matrix<double> tz = Matrix<double>::Zero(1, 12);
  tz(0, 11) = kMaskSentinel;
  const double tgt = loss_target(tz, 4);
  worst = std::max(worst, std::fabs(tgt - std::log(11.0)));
  std::ostringstream os;
  os.precision(10);
  os << "ln 20 -> " << cov << ", ln 11 -> " << tgt << ", max deviation " << worst;
  return {worst < 1e-9, os.str()};
}

CheckResult check_masking(int n_instances, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 4);
  double worst = 0.0;
  const double scales[] = {1.0, 50.0, 1e3, 1e6, 1e8};
  for (int i = 0; i < n_instances; ++i) {
    const Index D = uniform_index(rng, 1, 11);
    HeadOutputs<double> out;
    out.target_logits = random_logits(rng, 1, D + 1, scales[i % 5]);
    out.target_logits(0, D) = kMaskSentinel;
    worst = std::max(worst, head_probabilities(out, Task::Target)(0, D));
  }
  // Through a real forward pass as well.
  for (int i = 0; i < 50; ++i) {
    ModelConfig cfg = ModelConfig::defaults(Task::Target);
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    CovNet<float> net(cfg, rng());
    const ModelInput in = random_input(rng, uniform_index(rng, 4, 14), uniform_index(rng, 1, 12), true);
    const HeadOutputs<float> out = net.forward(in);
    worst = std::max(worst, head_probabilities(out, Task::Target)(0, out.target_logits.cols() - 1));
  }
  return {worst < 1e-300, "max offensive-slot probability " + fmt(worst)};
}

CheckResult check_equivariance(int n_pairs, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 5);
  double worst = 0.0;
  long argmax_mismatch = 0;
  std::vector<CovNet<double>> nets;
  for (int t = 0; t < 3; ++t) {
    ModelConfig cfg = small_config(static_cast<Task>(t), rng, 16);
    nets.emplace_back(cfg, rng());
  }
  for (int i = 0; i < n_pairs; ++i) {
    const Task task = static_cast<Task>(i % 3);
    const CovNet<double>& net = nets[static_cast<std::size_t>(i % 3)];
    const Index A = uniform_index(rng, 4, 14), T = uniform_index(rng, 1, 16);
    const ModelInput in = random_input(rng, A, T, task == Task::Target);
    std::vector<Index> perm(static_cast<std::size_t>(A));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const ModelInput pin = permute_agents(in, perm);

    const Matrix<double> z = net.forward(in).logits(task);
    const Matrix<double> pz = net.forward(pin).logits(task);
    auto slot_of = [](const std::vector<Index>& list, Index agent) {
      return static_cast<Index>(std::find(list.begin(), list.end(), agent) - list.begin());
    };
    // Slot of the original defender / receiver behind each permuted slot.
    std::vector<Index> def_map, rec_map;
    for (Index d : pin.defenders) def_map.push_back(slot_of(in.defenders, perm[static_cast<std::size_t>(d)]));
    for (Index r : pin.receivers) rec_map.push_back(slot_of(in.receivers, perm[static_cast<std::size_t>(r)]));
    const Index D = static_cast<Index>(def_map.size());
    if (task == Task::Target) {
      for (Index i2 = 0; i2 < D; ++i2)
        worst = std::max(worst, std::fabs(pz(0, i2) - z(0, def_map[static_cast<std::size_t>(i2)])));
      Index a = 0, pa = 0;
      z.row(0).maxCoeff(&a);
      pz.row(0).maxCoeff(&pa);
      if (pa == D ? a != D : def_map[static_cast<std::size_t>(pa)] != a) ++argmax_mismatch;
    } else {
      for (Index i2 = 0; i2 < D; ++i2) {
        const Index src = def_map[static_cast<std::size_t>(i2)];
        if (task == Task::Coverage) {
          worst = std::max(worst, (pz.row(i2) - z.row(src)).cwiseAbs().maxCoeff());
        } else {
          worst = std::max(worst, std::fabs(pz(i2, 0) - z(src, 0)));
          for (std::size_t r = 0; r < rec_map.size(); ++r)
            worst = std::max(worst, std::fabs(pz(i2, static_cast<Index>(r) + 1) - z(src, rec_map[r] + 1)));
        }
      }
    }
  }
  return {worst <= 1e-6 && argmax_mismatch == 0,
          "max deviation " + fmt(worst) + ", target argmax mismatches " + std::to_string(argmax_mismatch) +
              " over " + std::to_string(n_pairs) + " pairs"};
}

CheckResult check_augmentation(long n_draws, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 6);
  std::map<std::string, long> counts;
  long fixed = 0;
  for (long i = 0; i < n_draws; ++i) {
    const TruncationStrategy s = sample_truncation(rng, 35);
    if (!s.is_random()) {
      ++fixed;
      ++counts[s.label()];
    } else if (!(s.start >= kEarliestStartOffset && s.start < s.end_frame && s.end_frame <= 35)) {
      return {false, "random window " + s.label() + " out of range"};
    }
  }
  const double share = static_cast<double>(fixed) / static_cast<double>(n_draws);
  bool ok = std::fabs(share - 0.6) <= 0.01;
  double worst = 0.0;
  for (const auto& s : fixed_strategies()) {
    const double f = static_cast<double>(counts[s.label()]) / static_cast<double>(n_draws);
    worst = std::max(worst, std::fabs(f - 0.6 / 11.0));
  }
  ok = ok && worst <= 0.003 && counts.size() == 11;
  const TruncationStrategy zero_snap{0, EndEvent::Snap, 0};
  const bool has_zero_snap =
      std::find(fixed_strategies().begin(), fixed_strategies().end(), zero_snap) != fixed_strategies().end() ||
      counts.count(zero_snap.label()) > 0;
  ok = ok && fixed_strategies().size() == 11 && !has_zero_snap;
  return {ok, "fixed share " + fmt(share) + ", max per-strategy deviation " + fmt(worst) + ", " +
                  std::to_string(counts.size()) + " fixed pairs seen" + (has_zero_snap ? ", (0,snap) present" : "")};
}

CheckResult check_schedulers() {
  OneCycleConfig oc;
  oc.total_steps = 1000;
  const double d0 = std::fabs(onecycle_lr(0, oc) - 2e-5);
  const long peak = std::lround(0.1 * static_cast<double>(oc.total_steps));
  const double dp = std::fabs(onecycle_lr(peak, oc) - 2e-4);
  const double df = std::fabs(onecycle_lr(oc.total_steps - 1, oc) - 2e-7);
  bool peak_is_max = true;
  for (long s = 0; s < oc.total_steps; ++s) peak_is_max = peak_is_max && onecycle_lr(s, oc) <= onecycle_lr(peak, oc);
  CosineRestartConfig cr;
  const double c0 = std::fabs(cosine_restart_lr(0, cr) - 2e-5);
  const double c15 = std::fabs(cosine_restart_lr(15, cr) - 2e-5);
  const double cm = std::fabs(cosine_restart_lr(7.5, cr) - 1.01e-5);
  const bool ok = d0 < 1e-15 && dp < 1e-15 && df < 1e-15 && peak_is_max && c0 < 1e-15 && c15 < 1e-15 && cm <= 1e-12;
  std::ostringstream os;
  os.precision(12);
  os << "onecycle " << onecycle_lr(0, oc) << " / " << onecycle_lr(peak, oc) << " @" << peak << " / "
     << onecycle_lr(oc.total_steps - 1, oc) << "; cosine " << cosine_restart_lr(0, cr) << " / "
     << cosine_restart_lr(7.5, cr) << " / " << cosine_restart_lr(15, cr);
  return {ok, os.str()};
}

}  // namespace covnet::checks
