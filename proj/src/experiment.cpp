#include "distkm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "distkm/error.hpp"
#include "distkm/manifest.hpp"
#include "distkm/parallel.hpp"
#include "distkm/simgen.hpp"
#include "distkm/wasserstein.hpp"

namespace distkm {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

const char* init_name(KMeansInit i) { return i == KMeansInit::PlusPlus ? "kmeans++" : "random"; }

KMeansInit parse_init(const std::string& s) {
    if (s == "random") return KMeansInit::Random;
    if (s == "kmeans++" || s == "plusplus") return KMeansInit::PlusPlus;
    throw ConfigError("unknown init '" + s + "' (random | kmeans++)");
}

SourceSpec::Kind parse_source_kind(const std::string& s) {
    if (s == "univariate") return SourceSpec::Kind::Univariate;
    if (s == "bivariate_independent") return SourceSpec::Kind::BivariateIndependent;
    if (s == "bivariate_dependent") return SourceSpec::Kind::BivariateDependent;
    if (s == "manifest") return SourceSpec::Kind::Manifest;
    if (s == "sar") return SourceSpec::Kind::Sar;
    throw ConfigError("unknown source type '" + s +
                      "' (univariate | bivariate_independent | bivariate_dependent | manifest | sar)");
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError("unknown field '" + key + "' in " + where);
    }
}

EmpiricalDistribution project(const EmpiricalDistribution& e, std::size_t d) {
    auto col = e.column(d);
    if (e.weighted()) return EmpiricalDistribution::with_counts(1, col, e.counts());
    return EmpiricalDistribution(1, col);
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t param_index, std::size_t r) {
    return derive_seed(derive_seed(master, param_index), r);
}

std::vector<DistributionRecord> make_records(const ExperimentConfig& cfg, std::size_t p, std::uint64_t seed,
                                             const std::vector<DistributionRecord>* fixed, int jobs) {
    const auto& src = cfg.source;
    Rng rng(derive_seed(seed, 0));
    std::vector<DistributionRecord> out;
    switch (src.kind) {
        case SourceSpec::Kind::Univariate: {
            auto u = UnivariateModelConfig::preset(src.preset, src.lambdas.at(p));
            u.n = src.n;
            out = generate_univariate(u, rng);
            break;
        }
        case SourceSpec::Kind::BivariateIndependent:
        case SourceSpec::Kind::BivariateDependent: {
            const bool dep = src.kind == SourceSpec::Kind::BivariateDependent;
            auto b = dep ? BivariateModelConfig::table6(src.rho) : BivariateModelConfig::table3();
            b.n_per_cluster = src.n_per_cluster;
            b.n_obs = src.n_obs;
            b.max_redraws = src.max_redraws;
            out = generate_bivariate(b, rng);
            break;
        }
        case SourceSpec::Kind::Manifest:
            out = fixed ? *fixed : read_manifest(src.manifest);
            break;
        case SourceSpec::Kind::Sar:
            out = ingest_dataset(src.sar_root, src.pairings.at(p), src.per_class, rng, src.sar, jobs).records;
            break;
    }
    if (src.marginal) {
        for (auto& r : out) {
            if (!r.is_empirical()) throw ConfigError("marginal projection needs empirical records");
            if (*src.marginal >= r.dim()) throw ConfigError("marginal coordinate out of range");
            r.payload = project(r.empirical(), *src.marginal);
        }
    }
    return out;
}

GramMode resolve_mode(const std::string& mode, std::span<const DistributionRecord> records) {
    if (mode == "exact") return GramMode::Exact;
    if (mode == "estimated") return GramMode::Estimated;
    const bool all_mix = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.is_mixture(); });
    return all_mix ? GramMode::Exact : GramMode::Estimated;
}

std::vector<std::size_t> truth_of(std::span<const DistributionRecord> records) {
    for (const auto& r : records)
        if (!r.label) throw DataError("experiment records need class labels");
    const auto labels = record_labels(records);
    return encode_labels(labels);
}

std::size_t cluster_count(const ExperimentConfig& cfg, std::span<const std::size_t> truth) {
    if (cfg.K > 0) return cfg.K;
    return std::set<std::size_t>(truth.begin(), truth.end()).size();
}

/// Shared per-replication state: the records, their hash, sigma* and the
/// geometry inputs of each method.
struct ReplicationData {
    std::vector<DistributionRecord> records;
    std::vector<std::size_t> truth;
    std::string hash;
    GramMode mode = GramMode::Exact;
    std::optional<double> sigma_star;

    KernelSpec resolve(const KernelSpec& k) {
        if (!k.sigma_auto) return k;
        if (!sigma_star) sigma_star = select_sigma_star(records);
        return k.with_sigma(*sigma_star);
    }
};

ReplicationData prepare(const ExperimentConfig& cfg, std::size_t p, std::uint64_t seed,
                        const std::vector<DistributionRecord>* fixed, int jobs) {
    ReplicationData d;
    d.records = make_records(cfg, p, seed, fixed, jobs);
    d.truth = truth_of(d.records);
    d.hash = content_hash(d.records);
    d.mode = resolve_mode(cfg.gram_mode, d.records);
    return d;
}

}  // namespace

// --- methods -----------------------------------------------------------------

std::string MethodSpec::label() const {
    if (!name.empty()) return name;
    if (kind == Kind::Wasserstein) return "2-W";
    if (kernel.sigma_auto) return family_name(kernel.family) + "(sigma*)";
    return kernel.describe();
}

MethodSpec MethodSpec::wasserstein() {
    MethodSpec m;
    m.kind = Kind::Wasserstein;
    return m;
}

MethodSpec MethodSpec::of_kernel(const KernelSpec& k) {
    MethodSpec m;
    m.kernel = k;
    return m;
}

MethodSpec method_from_json(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "2-W" || s == "wasserstein" || s == "w2") return MethodSpec::wasserstein();
        const auto colon = s.find(':');
        const std::string fam = s.substr(0, colon);
        Json k{{"family", fam}};
        if (colon != std::string::npos) {
            const std::string param = s.substr(colon + 1);
            const bool sigma = parse_family(fam) == KernelFamily::Gaussian || parse_family(fam) == KernelFamily::Laplace;
            double v = 0.0;
            if (param == "auto" && sigma) {
                k["sigma"] = "auto";
            } else {
                auto res = std::from_chars(param.data(), param.data() + param.size(), v);
                if (res.ec != std::errc() || res.ptr != param.data() + param.size())
                    throw ConfigError("bad method parameter in '" + s + "'");
                k[sigma ? "sigma" : "alpha"] = v;
            }
        }
        return MethodSpec::of_kernel(kernel_from_json(k));
    }
    if (!j.is_object()) throw ConfigError("method must be a string or an object");
    reject_unknown(j, {"kernel", "metric", "name"}, "method");
    MethodSpec m;
    if (j.contains("metric")) {
        const auto metric = get_or<std::string>(j, "metric", "");
        if (metric != "wasserstein") throw ConfigError("unknown metric '" + metric + "' (wasserstein)");
        if (j.contains("kernel")) throw ConfigError("method has both metric and kernel");
        m = MethodSpec::wasserstein();
    } else if (j.contains("kernel")) {
        m = MethodSpec::of_kernel(kernel_from_json(j["kernel"]));
    } else {
        throw ConfigError("method needs \"kernel\" or \"metric\"");
    }
    m.name = get_or<std::string>(j, "name", "");
    return m;
}

Json method_to_json(const MethodSpec& m) {
    Json j;
    if (m.kind == MethodSpec::Kind::Wasserstein)
        j["metric"] = "wasserstein";
    else
        j["kernel"] = kernel_to_json(m.kernel);
    j["name"] = m.label();
    return j;
}

// --- config ------------------------------------------------------------------

bool SourceSpec::univariate() const {
    return kind == Kind::Univariate || marginal.has_value() ||
           (kind == Kind::Sar && !sar.include_derivative);
}

std::string source_kind_name(SourceSpec::Kind k) {
    switch (k) {
        case SourceSpec::Kind::Univariate: return "univariate";
        case SourceSpec::Kind::BivariateIndependent: return "bivariate_independent";
        case SourceSpec::Kind::BivariateDependent: return "bivariate_dependent";
        case SourceSpec::Kind::Manifest: return "manifest";
        case SourceSpec::Kind::Sar: return "sar";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (methods.empty()) throw ConfigError("experiment has no methods");
    if (gram_mode != "auto" && gram_mode != "exact" && gram_mode != "estimated")
        throw ConfigError("gram_mode must be auto, exact or estimated");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
        throw ConfigError("max_failure_fraction must lie in [0, 1]");
    check_wasserstein_args(2.0, grid);
    std::set<std::string> labels;
    for (const auto& m : methods) {
        if (!labels.insert(m.label()).second) throw ConfigError("duplicate method label '" + m.label() + "'");
        if (m.kind == MethodSpec::Kind::Kernel && !m.kernel.sigma_auto) m.kernel.validate();
    }
    const auto& s = source;
    switch (s.kind) {
        case SourceSpec::Kind::Univariate:
            if (s.lambdas.empty()) throw ConfigError("univariate source needs at least one lambda");
            for (double l : s.lambdas) UnivariateModelConfig::preset(s.preset, l).validate();
            if (s.n < 2 || s.n % 2) throw ConfigError("univariate source needs an even n >= 2");
            break;
        case SourceSpec::Kind::BivariateIndependent:
        case SourceSpec::Kind::BivariateDependent:
            if (s.n_per_cluster < 1 || s.n_obs < 2) throw ConfigError("bivariate source needs n_per_cluster >= 1, n_obs >= 2");
            if (!(std::abs(s.rho) < 1.0)) throw ConfigError("rho must satisfy |rho| < 1");
            if (s.marginal && *s.marginal > 1) throw ConfigError("marginal must be 0 or 1");
            break;
        case SourceSpec::Kind::Manifest:
            if (s.manifest.empty()) throw ConfigError("manifest source needs a manifest path");
            break;
        case SourceSpec::Kind::Sar:
            if (s.sar_root.empty()) throw ConfigError("sar source needs a root directory");
            if (s.pairings.empty()) throw ConfigError("sar source needs at least one class pairing");
            if (s.per_class < 1) throw ConfigError("sar per_class must be >= 1");
            s.sar.validate();
            break;
    }
    const bool uni = s.univariate() || s.kind == SourceSpec::Kind::Manifest;
    for (const auto& m : methods)
        if (m.kind == MethodSpec::Kind::Wasserstein && !uni)
            throw ConfigError("the 2-W method needs univariate records");
    if (gram_mode == "exact" && s.kind != SourceSpec::Kind::Univariate && s.kind != SourceSpec::Kind::Manifest)
        throw ConfigError("exact Gram mode needs uniform-mixture records");
    if (k_selection) {
        if (k_selection->k_range.empty()) throw ConfigError("k_range is empty");
        for (auto k : k_selection->k_range)
            if (k < 2) throw ConfigError("k_range values must be >= 2");
        if (k_selection->criteria.empty()) throw ConfigError("k_selection needs criteria");
    }
}

Json ExperimentConfig::to_json() const {
    Json src;
    src["type"] = source_kind_name(source.kind);
    switch (source.kind) {
        case SourceSpec::Kind::Univariate:
            src["preset"] = source.preset;
            src["lambda"] = source.lambdas;
            src["n"] = source.n;
            break;
        case SourceSpec::Kind::BivariateIndependent:
        case SourceSpec::Kind::BivariateDependent:
            src["n_per_cluster"] = source.n_per_cluster;
            src["n_obs"] = source.n_obs;
            src["max_redraws"] = source.max_redraws;
            if (source.kind == SourceSpec::Kind::BivariateDependent) src["rho"] = source.rho;
            break;
        case SourceSpec::Kind::Manifest:
            src["manifest"] = source.manifest.string();
            break;
        case SourceSpec::Kind::Sar:
            src["root"] = source.sar_root.string();
            src["pairings"] = source.pairings;
            src["per_class"] = source.per_class;
            src["intensity_levels"] = source.sar.intensity_levels;
            src["filter_levels"] = source.sar.filter_levels;
            src["include_derivative"] = source.sar.include_derivative;
            src["max_pixels"] = source.sar.max_pixels;
            break;
    }
    if (source.marginal) src["marginal"] = *source.marginal;
    Json methods_j = Json::array();
    for (const auto& m : methods) methods_j.push_back(method_to_json(m));
    Json j{{"name", name},
           {"source", src},
           {"methods", methods_j},
           {"gram_mode", gram_mode},
           {"K", K},
           {"restarts", restarts},
           {"max_iter", max_iter},
           {"init", init_name(init)},
           {"replications", replications},
           {"seed", seed},
           {"centroid_mode", centroid_mode_name(centroid_mode)},
           {"grid", grid},
           {"max_failure_fraction", max_failure_fraction}};
    if (k_selection) {
        Json crit = Json::array();
        for (auto c : k_selection->criteria) crit.push_back(criterion_name(c));
        j["k_selection"] = {{"k_range", k_selection->k_range}, {"criteria", crit}};
    }
    if (!quad.closed_form) j["quadrature"] = {{"closed_form", false}, {"nodes", quad.nodes}, {"rel_tol", quad.rel_tol}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    reject_unknown(j,
                   {"name", "preset", "full_scale", "source", "methods", "gram_mode", "K", "restarts", "max_iter",
                    "init", "replications", "seed", "jobs", "centroid_mode", "grid", "k_selection", "output",
                    "cache_dir", "max_failure_fraction", "quadrature"},
                   "experiment config");
    ExperimentConfig c;
    if (j.contains("preset")) c = preset(j["preset"].get<std::string>(), get_or<bool>(j, "full_scale", false));
    c.name = get_or<std::string>(j, "name", c.name);
    if (j.contains("source")) {
        const Json& s = j["source"];
        if (!s.is_object()) throw ConfigError("source must be an object");
        reject_unknown(s,
                       {"type", "preset", "lambda", "n", "n_per_cluster", "n_obs", "rho", "max_redraws", "marginal",
                        "manifest", "root", "pairings", "classes", "per_class", "intensity_levels", "filter_levels",
                        "include_derivative", "max_pixels", "subsample_seed"},
                       "source");
        SourceSpec& src = c.source;
        if (s.contains("type")) {
            auto kind = parse_source_kind(s["type"].get<std::string>());
            if (kind != src.kind) src = SourceSpec{};
            src.kind = kind;
        }
        src.preset = get_or<std::string>(s, "preset", src.preset);
        if (s.contains("lambda")) {
            const Json& l = s["lambda"];
            src.lambdas = l.is_array() ? l.get<std::vector<double>>() : std::vector<double>{l.get<double>()};
        }
        src.n = get_or<std::size_t>(s, "n", src.n);
        src.n_per_cluster = get_or<std::size_t>(s, "n_per_cluster", src.n_per_cluster);
        src.n_obs = get_or<std::size_t>(s, "n_obs", src.n_obs);
        src.rho = get_or<double>(s, "rho", src.rho);
        src.max_redraws = get_or<int>(s, "max_redraws", src.max_redraws);
        if (s.contains("marginal")) {
            if (s["marginal"].is_null())
                src.marginal.reset();
            else
                src.marginal = s["marginal"].get<std::size_t>();
        }
        if (s.contains("manifest")) src.manifest = s["manifest"].get<std::string>();
        if (s.contains("root")) src.sar_root = s["root"].get<std::string>();
        if (s.contains("pairings")) src.pairings = s["pairings"].get<std::vector<std::vector<std::string>>>();
        if (s.contains("classes")) src.pairings = {s["classes"].get<std::vector<std::string>>()};
        src.per_class = get_or<std::size_t>(s, "per_class", src.per_class);
        src.sar.intensity_levels = get_or<int>(s, "intensity_levels", src.sar.intensity_levels);
        src.sar.filter_levels = get_or<int>(s, "filter_levels", src.sar.filter_levels);
        src.sar.include_derivative = get_or<bool>(s, "include_derivative", src.sar.include_derivative);
        src.sar.max_pixels = get_or<std::size_t>(s, "max_pixels", src.sar.max_pixels);
        src.sar.subsample_seed = get_or<std::uint64_t>(s, "subsample_seed", src.sar.subsample_seed);
    }
    if (j.contains("methods")) {
        if (!j["methods"].is_array()) throw ConfigError("methods must be a list");
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(method_from_json(m));
    }
    c.gram_mode = get_or<std::string>(j, "gram_mode", c.gram_mode);
    c.K = get_or<std::size_t>(j, "K", c.K);
    c.restarts = get_or<std::size_t>(j, "restarts", c.restarts);
    c.max_iter = get_or<std::size_t>(j, "max_iter", c.max_iter);
    if (j.contains("init")) c.init = parse_init(j["init"].get<std::string>());
    c.replications = get_or<std::size_t>(j, "replications", c.replications);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.jobs = get_or<int>(j, "jobs", c.jobs);
    if (j.contains("centroid_mode")) c.centroid_mode = parse_centroid_mode(j["centroid_mode"].get<std::string>());
    c.grid = get_or<std::size_t>(j, "grid", c.grid);
    if (j.contains("k_selection") && !j["k_selection"].is_null()) {
        const Json& k = j["k_selection"];
        reject_unknown(k, {"k_range", "criteria"}, "k_selection");
        KSelectionSpec ks;
        ks.k_range = get_or<std::vector<std::size_t>>(k, "k_range", ks.k_range);
        if (k.contains("criteria")) {
            ks.criteria.clear();
            for (const auto& name : k["criteria"]) ks.criteria.push_back(parse_criterion(name.get<std::string>()));
        }
        c.k_selection = ks;
    }
    if (j.contains("output")) c.output = get_or<std::string>(j, "output", "");
    if (j.contains("cache_dir")) c.cache_dir = get_or<std::string>(j, "cache_dir", "");
    c.max_failure_fraction = get_or<double>(j, "max_failure_fraction", c.max_failure_fraction);
    if (j.contains("quadrature")) {
        const Json& q = j["quadrature"];
        reject_unknown(q, {"closed_form", "nodes", "rel_tol", "max_depth"}, "quadrature");
        c.quad.closed_form = get_or<bool>(q, "closed_form", c.quad.closed_form);
        c.quad.nodes = get_or<int>(q, "nodes", c.quad.nodes);
        c.quad.rel_tol = get_or<double>(q, "rel_tol", c.quad.rel_tol);
        c.quad.max_depth = get_or<int>(q, "max_depth", c.quad.max_depth);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    Json j = Json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + ": invalid JSON");
    return from_json(j);
}

std::vector<std::string> ExperimentConfig::preset_names() {
    return {"table1", "table2", "variation2", "table4", "table5", "table7"};
}

ExperimentConfig ExperimentConfig::preset(const std::string& name, bool full_scale) {
    ExperimentConfig c;
    c.name = name;
    c.replications = full_scale ? 100 : 20;
    c.seed = 1;
    const std::vector<MethodSpec> kernels{
        MethodSpec::of_kernel(KernelSpec::auto_sigma(KernelFamily::Gaussian)),
        MethodSpec::of_kernel(KernelSpec::auto_sigma(KernelFamily::Laplace)),
        MethodSpec::of_kernel(KernelSpec::modified_gaussian(2)),
        MethodSpec::of_kernel(KernelSpec::modified_gaussian(3)),
        MethodSpec::of_kernel(KernelSpec::energy(0.25)),
        MethodSpec::of_kernel(KernelSpec::energy(0.5)),
        MethodSpec::of_kernel(KernelSpec::energy(0.75)),
    };
    auto with_w = kernels;
    with_w.insert(with_w.begin(), MethodSpec::wasserstein());
    if (name == "table1" || name == "table2" || name == "variation2") {
        c.source.kind = SourceSpec::Kind::Univariate;
        c.source.preset = name == "table1" ? "default" : name == "table2" ? "variation1" : "variation2";
        c.source.lambdas.clear();
        for (int i = 0; i <= 9; ++i) c.source.lambdas.push_back(i / 10.0);
        c.methods = with_w;
        c.K = 2;
        c.restarts = 10;
    } else if (name == "table4" || name == "table5") {
        c.source.kind = SourceSpec::Kind::BivariateIndependent;
        if (name == "table5") c.source.marginal = 0;
        c.methods = name == "table5" ? with_w : kernels;
        c.K = 3;
        c.restarts = 50;
    } else if (name == "table7") {
        c.source.kind = SourceSpec::Kind::BivariateDependent;
        c.methods = kernels;
        c.K = 2;
        c.restarts = 50;
    } else {
        throw ConfigError("unknown experiment preset '" + name + "'");
    }
    return c;
}

// --- cache -------------------------------------------------------------------

std::string gram_cache_key(const std::string& content_hash, const KernelSpec& kernel, GramMode mode,
                           const QuadratureConfig& quad) {
    std::string key = content_hash + "|" + kernel_to_json(kernel).dump() + "|" +
                      (mode == GramMode::Exact ? "exact" : "estimated");
    if (mode == GramMode::Exact && !quad.closed_form)
        key += "|gl" + std::to_string(quad.nodes) + ":" + shortest(quad.rel_tol);
    return key;
}

std::shared_ptr<const std::vector<double>> GramCache::radial(const std::string& content_hash,
                                                             std::span<const EmpiricalDistribution> sample,
                                                             const RadialTerm& term, int jobs) {
    const std::string key = content_hash + "|radial" + std::to_string(static_cast<int>(term.kind)) + ":" +
                            shortest(term.scale);
    {
        std::lock_guard lock(mutex_);
        if (auto it = radials_.find(key); it != radials_.end()) return it->second;
    }
    auto r = std::make_shared<const std::vector<double>>(radial_sum_matrix(sample, term, jobs));
    std::lock_guard lock(mutex_);
    return radials_.emplace(key, r).first->second;
}

std::shared_ptr<const GramMatrix> GramCache::gram(const std::string& content_hash,
                                                  std::span<const DistributionRecord> records,
                                                  const KernelSpec& kernel, GramMode mode,
                                                  const QuadratureConfig& quad, int jobs) {
    const std::string key = gram_cache_key(content_hash, kernel, mode, quad);
    {
        std::lock_guard lock(mutex_);
        if (auto it = grams_.find(key); it != grams_.end()) {
            ++hits_;
            return it->second;
        }
    }
    const fs::path file = dir_.empty() ? fs::path() : dir_ / (fnv1a_hex(key) + ".gram");
    std::shared_ptr<const GramMatrix> g;
    if (!file.empty() && fs::exists(file)) {
        g = std::make_shared<const GramMatrix>(load_gram(file));
        std::lock_guard lock(mutex_);
        ++hits_;
    } else {
        if (mode == GramMode::Exact) {
            g = std::make_shared<const GramMatrix>(gram_exact(records, kernel, quad, jobs));
        } else {
            std::vector<EmpiricalDistribution> sample;
            sample.reserve(records.size());
            for (const auto& r : records) {
                if (!r.is_empirical()) throw ModeError("estimated Gram needs empirical records");
                sample.push_back(r.empirical());
            }
            auto rs = radial(content_hash, sample, decompose(kernel).radial, jobs);
            g = std::make_shared<const GramMatrix>(assemble_estimated(sample, kernel, *rs));
        }
        if (!file.empty()) {
            fs::create_directories(dir_);
            save_gram(file, *g, content_hash);
        }
        std::lock_guard lock(mutex_);
        ++misses_;
    }
    std::lock_guard lock(mutex_);
    return grams_.emplace(key, g).first->second;
}

std::size_t GramCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t GramCache::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

// --- records and aggregation -------------------------------------------------

Json replication_to_json(const ReplicationRecord& r) {
    Json j{{"param_index", r.param_index}, {"param", r.param},   {"replication", r.replication},
           {"seed", r.seed},               {"method", r.method}, {"failed", r.failed}};
    if (r.failed) {
        j["error"] = r.error;
    } else {
        j["accuracy"] = r.accuracy;
        j["ari"] = r.ari;
        j["wcss"] = r.wcss;
        j["iterations"] = r.iterations;
        j["converged"] = r.converged;
    }
    if (r.sigma) j["sigma"] = *r.sigma;
    return j;
}

ReplicationRecord replication_from_json(const Json& j) {
    try {
        ReplicationRecord r;
        r.param_index = j.at("param_index").get<std::size_t>();
        r.param = j.at("param").get<std::string>();
        r.replication = j.at("replication").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.method = j.at("method").get<std::string>();
        r.failed = j.at("failed").get<bool>();
        if (r.failed) {
            r.error = j.value("error", std::string());
        } else {
            r.accuracy = j.at("accuracy").get<double>();
            r.ari = j.at("ari").get<double>();
            r.wcss = j.at("wcss").get<double>();
            r.iterations = j.at("iterations").get<std::size_t>();
            r.converged = j.at("converged").get<bool>();
        }
        if (j.contains("sigma")) r.sigma = j["sigma"].get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid replication record: ") + e.what());
    }
}

const ResultRow* ResultTable::find(const std::string& param, const std::string& method) const {
    for (const auto& r : rows)
        if (r.param == param && r.method == method) return &r;
    return nullptr;
}

ResultTable aggregate(std::span<const ReplicationRecord> records) {
    struct Acc {
        std::vector<double> acc, ari;
        std::size_t failed = 0;
    };
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, Acc> groups;
    for (const auto& r : records) {
        auto key = std::make_pair(r.param, r.method);
        if (!groups.count(key)) order.push_back(key);
        auto& g = groups[key];
        if (r.failed) {
            ++g.failed;
        } else {
            g.acc.push_back(r.accuracy);
            g.ari.push_back(r.ari);
        }
    }
    auto mean_se = [](const std::vector<double>& v) {
        if (v.empty()) return std::make_pair(std::nan(""), std::nan(""));
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        if (v.size() < 2) return std::make_pair(m, 0.0);
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        return std::make_pair(m, sd / std::sqrt(static_cast<double>(v.size())));
    };
    ResultTable t;
    for (const auto& key : order) {
        const auto& g = groups[key];
        ResultRow row;
        row.param = key.first;
        row.method = key.second;
        std::tie(row.mean_accuracy, row.se_accuracy) = mean_se(g.acc);
        std::tie(row.mean_ari, row.se_ari) = mean_se(g.ari);
        row.replications = g.acc.size();
        row.failed = g.failed;
        t.rows.push_back(row);
    }
    return t;
}

std::vector<std::string> parameter_labels(const ExperimentConfig& config) {
    const auto& s = config.source;
    std::vector<std::string> out;
    if (s.kind == SourceSpec::Kind::Univariate) {
        for (double l : s.lambdas) out.push_back(shortest(l));
    } else if (s.kind == SourceSpec::Kind::Sar) {
        for (const auto& p : s.pairings) {
            std::string label;
            for (const auto& c : p) label += (label.empty() ? "" : ",") + c;
            out.push_back(label);
        }
    } else {
        out.push_back("-");
    }
    return out;
}

std::vector<DistributionRecord> replication_records(const ExperimentConfig& config, std::size_t param_index,
                                                    std::size_t r, std::uint64_t* sub_seed) {
    const std::uint64_t s = replication_seed(config.seed, param_index, r);
    if (sub_seed) *sub_seed = s;
    return make_records(config, param_index, s, nullptr, 1);
}

void write_result_csv(const fs::path& path, const ResultTable& t) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << "param,method,mean_accuracy,se_accuracy,mean_ari,se_ari,replications,failed\n";
    for (const auto& r : t.rows)
        f << csv_field(r.param) << ',' << csv_field(r.method) << ',' << shortest(r.mean_accuracy) << ','
          << shortest(r.se_accuracy) << ',' << shortest(r.mean_ari) << ',' << shortest(r.se_ari) << ','
          << r.replications << ',' << r.failed << '\n';
    if (!f) throw DataError("write failed: " + path.string());
}

Json result_table_to_json(const ResultTable& t) {
    Json rows = Json::array();
    for (const auto& r : t.rows) {
        Json row{{"param", r.param},     {"method", r.method}, {"replications", r.replications},
                 {"failed", r.failed}};
        // NaN (no successful replication) is written as null
        auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
        row["mean_accuracy"] = num(r.mean_accuracy);
        row["se_accuracy"] = num(r.se_accuracy);
        row["mean_ari"] = num(r.mean_ari);
        row["se_ari"] = num(r.se_ari);
        rows.push_back(row);
    }
    return rows;
}

ResultTable result_table_from_json(const Json& j) {
    ResultTable t;
    auto num = [](const Json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    try {
        for (const auto& row : j) {
            ResultRow r;
            r.param = row.at("param").get<std::string>();
            r.method = row.at("method").get<std::string>();
            r.mean_accuracy = num(row.at("mean_accuracy"));
            r.se_accuracy = num(row.at("se_accuracy"));
            r.mean_ari = num(row.at("mean_ari"));
            r.se_ari = num(row.at("se_ari"));
            r.replications = row.at("replications").get<std::size_t>();
            r.failed = row.at("failed").get<std::size_t>();
            t.rows.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid result table: ") + e.what());
    }
    return t;
}

namespace {

void write_json(const fs::path& path, const Json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << '\n';
    if (!f) throw DataError("write failed: " + path.string());
}

struct Plan {
    std::vector<std::string> params;
    std::vector<DistributionRecord> fixed;
    bool has_fixed = false;
    int outer = 1, inner = 1;
};

Plan plan(const ExperimentConfig& config) {
    Plan p;
    p.params = parameter_labels(config);
    if (config.source.kind == SourceSpec::Kind::Manifest) {
        p.fixed = read_manifest(config.source.manifest);
        p.has_fixed = true;
    }
    const int jobs = config.jobs <= 0 ? default_jobs() : config.jobs;
    const std::size_t units = p.params.size() * config.replications;
    p.outer = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), units));
    p.inner = std::max(1, jobs / std::max(1, p.outer));
    return p;
}

ReplicationRecord record_stub(std::size_t p, const std::string& param, std::size_t r, std::uint64_t seed,
                              const std::string& method) {
    ReplicationRecord rec;
    rec.param_index = p;
    rec.param = param;
    rec.replication = r;
    rec.seed = seed;
    rec.method = method;
    return rec;
}

KMeansOptions kmeans_options(const ExperimentConfig& config, std::size_t K, std::uint64_t seed, int jobs) {
    KMeansOptions opt;
    opt.K = K;
    opt.restarts = config.restarts;
    opt.seed = seed;
    opt.max_iter = config.max_iter;
    opt.init = config.init;
    opt.jobs = jobs;
    return opt;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, GramCache* cache) {
    config.validate();
    GramCache local(config.cache_dir);
    GramCache& gc = cache ? *cache : local;
    const Plan pl = plan(config);
    const std::size_t P = pl.params.size(), R = config.replications, M = config.methods.size();

    std::vector<std::vector<ReplicationRecord>> slots(P * R);
    std::vector<LloydDiagnostics> diags(P * R);
    parallel_for(P * R, pl.outer, [&](std::size_t unit) {
        const std::size_t p = unit / R, r = unit % R;
        const std::uint64_t seed = replication_seed(config.seed, p, r);
        auto& out = slots[unit];
        auto& diag = diags[unit];
        auto fail_all = [&](const std::string& what) {
            out.clear();
            diag = {};
            for (const auto& m : config.methods) {
                auto rec = record_stub(p, pl.params[p], r, seed, m.label());
                rec.failed = true;
                rec.error = what;
                out.push_back(rec);
            }
            spdlog::warn("replication {} (param {}, seed {}) failed: {}", r, pl.params[p], seed, what);
        };
        try {
            ReplicationData data = prepare(config, p, seed, pl.has_fixed ? &pl.fixed : nullptr, pl.inner);
            const std::size_t K = cluster_count(config, data.truth);
            for (std::size_t m = 0; m < M; ++m) {
                const auto& method = config.methods[m];
                auto rec = record_stub(p, pl.params[p], r, seed, method.label());
                std::vector<Partition> log;
                auto opt = kmeans_options(config, K, derive_seed(seed, 1 + m), pl.inner);
                opt.restart_log = &log;
                Partition part;
                bool fixed_point = false;
                if (method.kind == MethodSpec::Kind::Wasserstein) {
                    part = wasserstein_kmeans(data.records, opt, config.centroid_mode, config.grid);
                    fixed_point = is_fixed_point(data.records, part, config.centroid_mode, config.grid);
                } else {
                    const KernelSpec k = data.resolve(method.kernel);
                    if (method.kernel.sigma_auto) rec.sigma = k.sigma;
                    auto g = gc.gram(data.hash, data.records, k, data.mode, config.quad, pl.inner);
                    part = kernel_kmeans(*g, opt);
                    fixed_point = is_fixed_point(*g, part);
                }
                for (const auto& restart : log) {
                    ++diag.restarts;
                    if (!trace_nonincreasing(restart.wcss_trace)) ++diag.trace_violations;
                    if (!restart.converged) ++diag.non_converged;
                }
                ++diag.returned;
                if (!fixed_point) ++diag.non_fixed_points;
                rec.accuracy = accuracy(part, data.truth);
                rec.ari = adjusted_rand_index(part, data.truth);
                rec.wcss = part.wcss;
                rec.iterations = part.n_iterations;
                rec.converged = part.converged;
                out.push_back(rec);
            }
            spdlog::info("{}: param {} replication {} done", config.name, pl.params[p], r);
        } catch (const Error& e) {
            fail_all(e.what());
        }
    });

    ExperimentResult res;
    res.total_replications = P * R;
    for (std::size_t u = 0; u < P * R; ++u) {
        if (!slots[u].empty() && slots[u].front().failed) ++res.failed_replications;
        for (auto& rec : slots[u]) res.replications.push_back(std::move(rec));
        res.lloyd.restarts += diags[u].restarts;
        res.lloyd.trace_violations += diags[u].trace_violations;
        res.lloyd.non_fixed_points += diags[u].non_fixed_points;
        res.lloyd.returned += diags[u].returned;
        res.lloyd.non_converged += diags[u].non_converged;
    }
    res.table = aggregate(res.replications);

    if (!config.output.empty()) {
        fs::create_directories(config.output);
        write_result_csv(config.output / "results.csv", res.table);
        Json seeds = Json::array();
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t r = 0; r < R; ++r)
                seeds.push_back({{"param", pl.params[p]}, {"replication", r}, {"seed", replication_seed(config.seed, p, r)}});
        Json summary{{"name", config.name},
                     {"config", config.to_json()},
                     {"rows", result_table_to_json(res.table)},
                     {"failed_replications", res.failed_replications},
                     {"total_replications", res.total_replications},
                     {"lloyd",
                      {{"restarts", res.lloyd.restarts},
                       {"trace_violations", res.lloyd.trace_violations},
                       {"non_fixed_points", res.lloyd.non_fixed_points},
                       {"returned", res.lloyd.returned},
                       {"non_converged", res.lloyd.non_converged}}},
                     {"seeds", seeds}};
        write_json(config.output / "results.json", summary);
        Json reps = Json::array();
        for (const auto& rec : res.replications) reps.push_back(replication_to_json(rec));
        write_json(config.output / "replications.json", reps);
    }
    const double failed_share = static_cast<double>(res.failed_replications) / static_cast<double>(P * R);
    if (failed_share > config.max_failure_fraction)
        throw ReplicationError(std::to_string(res.failed_replications) + " of " + std::to_string(P * R) +
                               " replications failed");
    return res;
}

KSelectionResult run_k_selection(const ExperimentConfig& config, GramCache* cache) {
    config.validate();
    const KSelectionSpec spec = config.k_selection.value_or(KSelectionSpec{});
    GramCache local(config.cache_dir);
    GramCache& gc = cache ? *cache : local;
    const Plan pl = plan(config);
    const std::size_t P = pl.params.size(), R = config.replications, M = config.methods.size(),
                      C = spec.criteria.size();

    // chosen[unit][m * C + c] = winning K, 0 when the replication failed
    std::vector<std::vector<std::size_t>> chosen(P * R);
    parallel_for(P * R, pl.outer, [&](std::size_t unit) {
        const std::size_t p = unit / R, r = unit % R;
        const std::uint64_t seed = replication_seed(config.seed, p, r);
        try {
            ReplicationData data = prepare(config, p, seed, pl.has_fixed ? &pl.fixed : nullptr, pl.inner);
            std::vector<std::size_t> picks;
            for (std::size_t m = 0; m < M; ++m) {
                const auto& method = config.methods[m];
                std::optional<GeometryHandle> geo;
                std::shared_ptr<const GramMatrix> g;
                if (method.kind == MethodSpec::Kind::Wasserstein) {
                    geo = GeometryHandle::from_wasserstein(data.records, 2.0, config.grid, pl.inner);
                } else {
                    g = gc.gram(data.hash, data.records, data.resolve(method.kernel), data.mode, config.quad,
                                pl.inner);
                    geo = GeometryHandle::from_gram(*g);
                }
                std::map<std::size_t, Partition> memo;
                auto runner = [&](std::size_t K) {
                    if (auto it = memo.find(K); it != memo.end()) return it->second;
                    auto opt = kmeans_options(config, K, derive_seed(derive_seed(seed, 1 + m), K), pl.inner);
                    Partition part = g ? kernel_kmeans(*g, opt)
                                       : wasserstein_kmeans(data.records, opt, config.centroid_mode, config.grid);
                    return memo.emplace(K, std::move(part)).first->second;
                };
                for (auto c : spec.criteria) picks.push_back(select_k(*geo, runner, spec.k_range, c).chosen);
            }
            chosen[unit] = std::move(picks);
            spdlog::info("{}: k-selection param {} replication {} done", config.name, pl.params[p], r);
        } catch (const Error& e) {
            chosen[unit].clear();
            spdlog::warn("k-selection replication {} (param {}, seed {}) failed: {}", r, pl.params[p], seed,
                         e.what());
        }
    });

    KSelectionResult res;
    res.total_replications = P * R;
    for (const auto& c : chosen)
        if (c.empty()) ++res.failed_replications;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t c = 0; c < C; ++c) {
                KSelectionRow row;
                row.param = pl.params[p];
                row.method = config.methods[m].label();
                row.criterion = criterion_name(spec.criteria[c]);
                row.k_values = spec.k_range;
                std::sort(row.k_values.begin(), row.k_values.end());
                row.k_values.erase(std::unique(row.k_values.begin(), row.k_values.end()), row.k_values.end());
                std::vector<std::size_t> counts(row.k_values.size(), 0);
                for (std::size_t r = 0; r < R; ++r) {
                    const auto& picks = chosen[p * R + r];
                    if (picks.empty()) continue;
                    ++row.replications;
                    auto it = std::find(row.k_values.begin(), row.k_values.end(), picks[m * C + c]);
                    ++counts[static_cast<std::size_t>(it - row.k_values.begin())];
                }
                for (auto n : counts)
                    row.proportions.push_back(row.replications ? static_cast<double>(n) / row.replications : 0.0);
                res.rows.push_back(row);
            }

    if (!config.output.empty()) {
        fs::create_directories(config.output);
        std::ofstream f(config.output / "kselect.csv");
        if (!f) throw DataError("cannot write kselect.csv");
        f << "param,method,criterion";
        const auto& ks = res.rows.empty() ? std::vector<std::size_t>{} : res.rows.front().k_values;
        for (auto k : ks) f << ",K=" << k;
        f << ",replications\n";
        Json rows = Json::array();
        for (const auto& row : res.rows) {
            f << csv_field(row.param) << ',' << csv_field(row.method) << ',' << row.criterion;
            for (double v : row.proportions) f << ',' << shortest(v);
            f << ',' << row.replications << '\n';
            rows.push_back({{"param", row.param},
                            {"method", row.method},
                            {"criterion", row.criterion},
                            {"k", row.k_values},
                            {"proportions", row.proportions},
                            {"replications", row.replications}});
        }
        write_json(config.output / "kselect.json", {{"name", config.name},
                                                    {"config", config.to_json()},
                                                    {"rows", rows},
                                                    {"failed_replications", res.failed_replications},
                                                    {"total_replications", res.total_replications}});
    }
    const double failed_share = static_cast<double>(res.failed_replications) / static_cast<double>(P * R);
    if (failed_share > config.max_failure_fraction)
        throw ReplicationError(std::to_string(res.failed_replications) + " of " + std::to_string(P * R) +
                               " replications failed");
    return res;
}

void write_report(const fs::path& out, std::span<const fs::path> inputs) {
    if (inputs.empty()) throw ConfigError("report: no input files");
    std::ofstream f(out);
    if (!f) throw DataError("cannot write " + out.string());
    std::string header;
    for (const auto& in : inputs) {
        std::ifstream src(in);
        if (!src) throw DataError("cannot read " + in.string());
        std::string line;
        if (!std::getline(src, line)) throw DataError(in.string() + ": empty file");
        if (header.empty()) {
            header = line;
            f << "experiment," << header << '\n';
        } else if (line != header) {
            throw DataError(in.string() + ": header differs from " + inputs.front().string());
        }
        const fs::path dir = in.parent_path();
        const std::string tag = dir.empty() ? in.stem().string() : dir.filename().string();
        while (std::getline(src, line)) {
            if (line.empty()) continue;
            // re-validate the row shape before copying it through
            if (parse_csv_line(line).size() != parse_csv_line(header).size())
                throw DataError(in.string() + ": malformed row");
            f << csv_field(tag) << ',' << line << '\n';
        }
    }
}

}  // namespace distkm
