#include "covnet/model.hpp"

#include "covnet/numerics/softmax.hpp"

namespace covnet {

using nlohmann::json;

ModelConfig ModelConfig::defaults(Task task) {
  ModelConfig c;
  c.task = task;
  switch (task) {
    case Task::Target:
      c.n_heads = 4;
      c.n_layers = 3;
      c.dropout = 0.1;
      break;
    case Task::Matchup:
      c.n_heads = 4;
      c.n_layers = 3;
      c.dropout = 0.2;
      break;
    case Task::Coverage:
      c.n_heads = 8;
      c.n_layers = 6;
      c.dropout = 0.1;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) throw ConfigError("d_model must be even and >= 2");
  if (n_heads < 1 || d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (n_layers < 0) throw ConfigError("n_layers must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be within [0, 1)");
  if (n_coverage_classes != kNumCoverageClasses) throw ConfigError("n_coverage_classes must be 20");
  if (scheme_dim < 1 || head_hidden < 1) throw ConfigError("head sizes must be positive");
  if (!(coordinate_gain > 0.0) || !(temporal_encoding_scale >= 0.0))
    throw ConfigError("coordinate_gain must be positive and temporal_encoding_scale non-negative");
}

json ModelConfig::to_json() const {
  return {{"task", std::string(task_name(task))},
          {"d_model", d_model},
          {"n_heads", n_heads},
          {"n_layers", n_layers},
          {"dropout", dropout},
          {"n_coverage_classes", n_coverage_classes},
          {"scheme_dim", scheme_dim},
          {"head_hidden", head_hidden},
          {"coordinate_gain", coordinate_gain},
          {"temporal_encoding_scale", temporal_encoding_scale}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c = defaults(task_from_name(j.at("task").get<std::string>()));
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.dropout = j.value("dropout", c.dropout);
  c.n_coverage_classes = j.value("n_coverage_classes", c.n_coverage_classes);
  c.scheme_dim = j.value("scheme_dim", c.scheme_dim);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.coordinate_gain = j.value("coordinate_gain", c.coordinate_gain);
  c.temporal_encoding_scale = j.value("temporal_encoding_scale", c.temporal_encoding_scale);
  c.validate();
  return c;
}

template class CovNet<float>;
template class CovNet<double>;

template <typename S>
Matrix<double> head_probabilities(const HeadOutputs<S>& out, Task task) {
  return softmax(out.logits(task).template cast<double>());
}

template Matrix<double> head_probabilities(const HeadOutputs<float>&, Task);
template Matrix<double> head_probabilities(const HeadOutputs<double>&, Task);

std::vector<Index> prediction_end_frames(const EventOffsets& events, Index stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  std::vector<Index> out;
  for (Index e = kEarliestStartOffset; e <= events.pass_arrival; e += stride) out.push_back(e);
  return out;
}

template <typename S>
std::vector<FramePrediction<S>> predict_frames(const PreparedPlay& play, const CovNet<S>& model, Index stride) {
  std::vector<FramePrediction<S>> out;
  for (Index e : prediction_end_frames(play.events, stride)) {
    const ModelInput in = make_input(play, Window{kEarliestStartOffset, e});
    out.push_back({e, model.forward(in)});
  }
  return out;
}

template std::vector<FramePrediction<float>> predict_frames(const PreparedPlay&, const CovNet<float>&, Index);
template std::vector<FramePrediction<double>> predict_frames(const PreparedPlay&, const CovNet<double>&, Index);

}  // namespace covnet
