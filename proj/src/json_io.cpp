#include "distkm/json_io.hpp"

#include "distkm/error.hpp"

namespace distkm {

Json kernel_to_json(const KernelSpec& k) {
    Json j;
    j["family"] = family_name(k.family);
    if (k.uses_sigma()) {
        if (k.sigma_auto)
            j["sigma"] = "auto";
        else
            j["sigma"] = k.sigma;
    } else {
        j["alpha"] = k.alpha;
    }
    return j;
}

KernelSpec kernel_from_json(const Json& j) {
    try {
        if (j.is_string()) return kernel_from_json(Json{{"family", j.get<std::string>()}});
        KernelSpec k;
        k.family = parse_family(j.at("family").get<std::string>());
        if (k.uses_sigma()) {
            const Json& s = j.contains("sigma") ? j.at("sigma") : Json("auto");
            if (s.is_string()) {
                if (s.get<std::string>() != "auto") throw ConfigError("kernel sigma must be a number or \"auto\"");
                k = KernelSpec::auto_sigma(k.family);
            } else {
                k.sigma = s.get<double>();
                k.alpha = 0.0;
            }
        } else {
            if (!j.contains("alpha")) throw ConfigError("kernel " + family_name(k.family) + " needs alpha");
            k.alpha = j.at("alpha").get<double>();
            k.sigma = 0.0;
        }
        if (!k.sigma_auto) k.validate();
        return k;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid kernel spec: ") + e.what());
    }
}

Json mixture_to_json(const UniformMixture& m) {
    Json comps = Json::array();
    for (const auto& c : m.components()) comps.push_back({{"w", c.weight}, {"a", c.a}, {"b", c.b}});
    return Json{{"components", comps}};
}

UniformMixture mixture_from_json(const Json& j) {
    try {
        std::vector<MixtureComponent> comps;
        for (const auto& c : j.at("components"))
            comps.push_back({c.at("w").get<double>(), c.at("a").get<double>(), c.at("b").get<double>()});
        return UniformMixture(std::move(comps));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid mixture: ") + e.what());
    }
}

}  // namespace distkm
