#pragma once

#include <json.hpp>

#include "distkm/kernels.hpp"

namespace distkm {

using Json = nlohmann::json;

/// {"family": "energy", "alpha": 0.5} / {"family": "gaussian", "sigma": "auto"}
Json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const Json& j);

/// {"components": [{"w":..,"a":..,"b":..}], "label": ...}
Json mixture_to_json(const UniformMixture& m);
UniformMixture mixture_from_json(const Json& j);

}  // namespace distkm
