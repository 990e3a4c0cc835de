#include "covnet/model_input.hpp"

#include <algorithm>

namespace covnet {

PreparedPlay prepare_play(const LabeledPlay& lp) {
  PreparedPlay p;
  p.play = normalize_direction(lp.play);
  p.labels = lp.labels;
  p.events = EventOffsets::of(p.play);
  p.sequence = extract_window(p.play, kEarliestStartOffset, p.events.pass_arrival);
  p.defenders = p.play.defender_indices();
  p.receivers = p.play.receiver_indices();

  auto id_of = [&](Index a) -> const std::string& { return p.play.agents[static_cast<std::size_t>(a)].agent_id; };
  for (Index d : p.defenders) {
    int cov = -1;
    if (lp.labels.coverage) {
      auto it = lp.labels.coverage->find(id_of(d));
      if (it != lp.labels.coverage->end()) cov = it->second;
    }
    p.coverage_targets.push_back(cov);

    int m = 0;
    if (lp.labels.matchup) {
      auto it = lp.labels.matchup->find(id_of(d));
      if (it != lp.labels.matchup->end() && it->second) {
        auto r = std::find_if(p.receivers.begin(), p.receivers.end(),
                              [&](Index a) { return id_of(a) == *it->second; });
        if (r == p.receivers.end()) throw DataError("matchup receiver '" + *it->second + "' is not eligible");
        m = static_cast<int>(r - p.receivers.begin()) + 1;
      }
    }
    p.matchup_targets.push_back(m);
  }
  if (lp.labels.targeted_receiver) {
    p.targeted_receiver = p.play.agent_index(*lp.labels.targeted_receiver);
    if (!p.targeted_receiver) throw DataError("unknown targeted receiver '" + *lp.labels.targeted_receiver + "'");
  }
  if (lp.labels.target_defender) {
    auto it = std::find_if(p.defenders.begin(), p.defenders.end(),
                           [&](Index a) { return id_of(a) == *lp.labels.target_defender; });
    if (it == p.defenders.end()) throw DataError("target defender '" + *lp.labels.target_defender + "' is not a defender");
    p.target_slot = static_cast<int>(it - p.defenders.begin());
  }
  return p;
}

ModelInput make_input(const Play& play, const Tensor<double>& window, int first_offset,
                      std::optional<Index> targeted_receiver) {
  if (window.rank() != 3 || window.dim(0) != play.n_agents() || window.dim(2) != kFeatureChannels)
    throw ConfigError("feature cube does not match the play roster");
  ModelInput in;
  in.n_agents = window.dim(0);
  in.n_frames = window.dim(1);
  if (in.n_frames < 1) throw ConfigError("window has no frames");
  in.first_offset = first_offset;
  in.features = Eigen::Map<const Matrix<double>>(window.data().data(), in.n_agents * in.n_frames, kFeatureChannels);
  for (const Agent& a : play.agents) {
    in.positions.push_back(a.position);
    in.sides.push_back(a.side);
  }
  in.defenders = play.defender_indices();
  in.receivers = play.receiver_indices();
  in.situation = play.situation;
  in.targeted_receiver = targeted_receiver;
  return in;
}

ModelInput make_input(const PreparedPlay& p, const Window& w) {
  return make_input(p.play, apply_truncation(p.sequence, kEarliestStartOffset, w), static_cast<int>(w.start),
                    p.targeted_receiver);
}

ModelInput permute_agents(const ModelInput& in, const std::vector<Index>& perm) {
  if (static_cast<Index>(perm.size()) != in.n_agents) throw ConfigError("permutation size mismatch");
  std::vector<Index> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  ModelInput out = in;
  const Index T = in.n_frames;
  for (Index i = 0; i < in.n_agents; ++i) {
    const Index src = perm[static_cast<std::size_t>(i)];
    out.features.middleRows(i * T, T) = in.features.middleRows(src * T, T);
    out.positions[static_cast<std::size_t>(i)] = in.positions[static_cast<std::size_t>(src)];
    out.sides[static_cast<std::size_t>(i)] = in.sides[static_cast<std::size_t>(src)];
  }
  // Role lists stay in agent order, as defender_indices() would return them.
  for (auto& d : out.defenders) d = inverse[static_cast<std::size_t>(d)];
  for (auto& r : out.receivers) r = inverse[static_cast<std::size_t>(r)];
  std::sort(out.defenders.begin(), out.defenders.end());
  std::sort(out.receivers.begin(), out.receivers.end());
  if (out.targeted_receiver) out.targeted_receiver = inverse[static_cast<std::size_t>(*out.targeted_receiver)];
  return out;
}

}  // namespace covnet
