#pragma once

#include <json.hpp>

#include "scene/mlp.hpp"

namespace scene::detail {

nlohmann::json mlp_to_json(const nn::Mlp& net);
nn::Mlp mlp_from_json(const nlohmann::json& doc);

}  // namespace scene::detail
