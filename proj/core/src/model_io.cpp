#include <string>

#include "detail/json_model.hpp"
#include "scene/error.hpp"
#include "scene/mlp.hpp"
#include "scene/trainer.hpp"

namespace scene {

using nlohmann::json;

namespace detail {

json mlp_to_json(const nn::Mlp& net) {
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Eigen::MatrixXd& w = net.weight(l);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    weights.push_back(flat);
    const Eigen::VectorXd& b = net.bias(l);
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  return json{{"layer_dims", net.layer_dims()},
              {"hidden_activation", nn::to_string(net.hidden_activation())},
              {"output_activation", nn::to_string(net.output_activation())},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)}};
}

nn::Mlp mlp_from_json(const json& doc) {
  try {
    nn::Mlp net(doc.at("layer_dims").get<std::vector<int>>(),
                nn::parse_hidden_activation(doc.at("hidden_activation").get<std::string>()),
                nn::parse_output_activation(doc.at("output_activation").get<std::string>()));
    const json& weights = doc.at("weights");
    const json& biases = doc.at("biases");
    if (weights.size() != net.num_layers() || biases.size() != net.num_layers()) {
      throw Error(ErrorKind::schema, "weights/biases must have one entry per layer");
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto flat = weights[l].get<std::vector<double>>();
      Eigen::MatrixXd& w = net.mutable_weight(l);
      if (flat.size() != static_cast<std::size_t>(w.size())) {
        throw Error(ErrorKind::schema, "layer " + std::to_string(l) + " weight count mismatch");
      }
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[static_cast<std::size_t>(r * w.cols() + c)];
      }
      const auto b = biases[l].get<std::vector<double>>();
      Eigen::VectorXd& bias = net.mutable_bias(l);
      if (b.size() != static_cast<std::size_t>(bias.size())) {
        throw Error(ErrorKind::schema, "layer " + std::to_string(l) + " bias count mismatch");
      }
      for (std::size_t i = 0; i < b.size(); ++i) bias(static_cast<Eigen::Index>(i)) = b[i];
    }
    return net;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("network document: ") + e.what());
  }
}

}  // namespace detail

namespace nn {

std::string to_json(const Mlp& net) { return detail::mlp_to_json(net).dump(); }

Mlp mlp_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, e.what());
  }
  return detail::mlp_from_json(doc);
}

}  // namespace nn

std::string trained_model_to_json(const TrainedModel& model) {
  json doc{{"format", "scene-model/1"},
           {"p_u", model.generator.aux_dim},
           {"generator", detail::mlp_to_json(model.generator.net)},
           {"phi", detail::mlp_to_json(model.phi)},
           {"pruned_covariates", model.generator.pruned_covariates()},
           {"selection_start", model.selection_start}};
  return doc.dump(1) + "\n";
}

TrainedModel trained_model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, e.what());
  }
  try {
    GeneratorModel gen(detail::mlp_from_json(doc.at("generator")), doc.at("p_u").get<int>());
    for (int j : doc.at("pruned_covariates").get<std::vector<int>>()) {
      if (j < 0 || j >= gen.covariate_dim()) throw Error(ErrorKind::schema, "pruned index out of range");
      gen.pruned[static_cast<std::size_t>(j)] = 1;
    }
    nn::Mlp phi = detail::mlp_from_json(doc.at("phi"));
    return TrainedModel{std::move(gen), std::move(phi), {}, doc.value("selection_start", -1L)};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("model document: ") + e.what());
  }
}

}  // namespace scene
