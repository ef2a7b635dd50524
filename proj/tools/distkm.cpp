#include <CLI11.hpp>

#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>

#include "distkm/error.hpp"
#include "distkm/experiment.hpp"
#include "distkm/manifest.hpp"
#include "distkm/simd/dispatch.hpp"
#include "distkm/simgen.hpp"
#include "distkm/wasserstein.hpp"

namespace fs = std::filesystem;
using namespace distkm;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--seed", c.seed, "Master seed");
    cmd->add_option("--jobs", c.jobs, "Worker threads (<= 0: all cores)");
    auto* o = cmd->add_option("--out", c.out, "Output path");
    if (out_required) o->required();
}

void write_json_file(const std::string& path, const Json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << j.dump(2) << '\n';
}

Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path);
    Json j = Json::parse(f, nullptr, false);
    if (j.is_discarded()) throw DataError(path + ": invalid JSON");
    return j;
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw ConfigError("bad K list '" + s + "'");
        }
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// Either a Gram file (kernel geometry) or a manifest with the 2-W metric.
struct ClusterInput {
    std::string gram;
    std::string manifest;
    std::string metric = "kernel";
    std::string centroid = "quantile_mean";
    std::size_t grid = 1024;

    void add(CLI::App* cmd) {
        cmd->add_option("--gram", gram, "Gram matrix file (from `gram`)");
        cmd->add_option("--manifest", manifest, "Distribution manifest (for --metric wasserstein)");
        cmd->add_option("--metric", metric, "kernel | wasserstein")->check(CLI::IsMember({"kernel", "wasserstein"}));
        cmd->add_option("--centroid-mode", centroid, "quantile_mean | mixture_mean (2-W only)");
        cmd->add_option("--grid", grid, "Quantile grid size (2-W only)");
    }
    bool wasserstein() const { return metric == "wasserstein"; }
    void check() const {
        if (wasserstein() ? manifest.empty() : gram.empty())
            throw ConfigError(wasserstein() ? "--metric wasserstein needs --manifest" : "kernel metric needs --gram");
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering of distributional data with kernel mean embeddings"};
    app.require_subcommand(1);
    std::string log_level = "info", isa = "auto";
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");
    app.add_option("--isa", isa, "auto | scalar | avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    // simulate ---------------------------------------------------------------
    Common sim_c;
    std::string sim_model = "univariate", sim_preset = "default";
    double sim_lambda = 0.0, sim_rho = 0.9;
    std::size_t sim_n = 100, sim_npc = 50, sim_nobs = 1000;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset and write its manifest");
    add_common(sim, sim_c, true);
    sim->add_option("--model", sim_model, "univariate | bivariate_independent | bivariate_dependent")
        ->check(CLI::IsMember({"univariate", "bivariate_independent", "bivariate_dependent"}));
    sim->add_option("--preset", sim_preset, "default | variation1 | variation2 (univariate)");
    sim->add_option("--lambda", sim_lambda, "Merging parameter (univariate)");
    sim->add_option("--n", sim_n, "Number of distributions (univariate)");
    sim->add_option("--n-per-cluster", sim_npc, "Distributions per cluster (bivariate)");
    sim->add_option("--n-obs", sim_nobs, "Observations per distribution (bivariate)");
    sim->add_option("--rho", sim_rho, "Copula correlation of class 1 (bivariate_dependent)");

    // sar-extract --------------------------------------------------------------
    Common sar_c;
    std::string sar_root, sar_classes;
    std::size_t sar_per_class = 100;
    SarFeatureConfig sar_cfg;
    bool sar_bivariate = false;
    auto* sar = app.add_subcommand("sar-extract", "Turn SAR images into a distribution manifest");
    add_common(sar, sar_c, true);
    sar->add_option("--root", sar_root, "Dataset root with one directory per class")->required();
    sar->add_option("--classes", sar_classes, "Comma-separated class directories")->required();
    sar->add_option("--per-class", sar_per_class, "Images sampled per class");
    sar->add_option("--intensity-levels", sar_cfg.intensity_levels, "M1");
    sar->add_option("--filter-levels", sar_cfg.filter_levels, "M2");
    sar->add_flag("--bivariate", sar_bivariate, "Add the Sobel gradient-norm channel");
    sar->add_option("--max-pixels", sar_cfg.max_pixels, "Pixel subsample cap per image (0: all)");

    // gram ---------------------------------------------------------------------
    Common gram_c;
    std::string gram_manifest, gram_kernel, gram_mode = "auto", gram_csv;
    std::size_t gram_grid = 1024;
    auto* gram = app.add_subcommand("gram", "Compute a Gram matrix (or 2-W distance matrix) for a manifest");
    add_common(gram, gram_c, true);
    gram->add_option("--manifest", gram_manifest, "Distribution manifest")->required();
    gram->add_option("--kernel", gram_kernel, "e.g. gaussian:auto, laplace:2.5, mg:3, energy:0.5, 2-W")->required();
    gram->add_option("--mode", gram_mode, "auto | exact | estimated")
        ->check(CLI::IsMember({"auto", "exact", "estimated"}));
    gram->add_option("--csv", gram_csv, "Also export the matrix as CSV");
    gram->add_option("--grid", gram_grid, "Quantile grid size (2-W)");

    // cluster ------------------------------------------------------------------
    Common cl_c;
    ClusterInput cl_in;
    std::size_t cl_k = 2, cl_restarts = 10, cl_iter = 100;
    std::string cl_init = "random", cl_csv;
    auto* cl = app.add_subcommand("cluster", "Run K-means on a Gram matrix or under 2-W");
    add_common(cl, cl_c, true);
    cl_in.add(cl);
    cl->add_option("--K", cl_k, "Number of clusters");
    cl->add_option("--restarts", cl_restarts, "Random initialisations");
    cl->add_option("--max-iter", cl_iter, "Lloyd iteration cap");
    cl->add_option("--init", cl_init, "random | kmeans++")->check(CLI::IsMember({"random", "kmeans++"}));
    cl->add_option("--assignments-csv", cl_csv, "Also write index,id,cluster rows");

    // score --------------------------------------------------------------------
    Common sc_c;
    std::string sc_partition, sc_manifest;
    auto* sc = app.add_subcommand("score", "Accuracy and ARI of a partition against manifest labels");
    add_common(sc, sc_c, false);
    sc->add_option("--partition", sc_partition, "Partition JSON from `cluster`")->required();
    sc->add_option("--manifest", sc_manifest, "Manifest carrying the true labels")->required();

    // select-k -----------------------------------------------------------------
    Common sk_c;
    ClusterInput sk_in;
    std::string sk_range = "2,3,4", sk_criteria = "ch,silhouette,dbstar";
    std::size_t sk_restarts = 10, sk_iter = 100;
    auto* sk = app.add_subcommand("select-k", "Choose K with internal validity indices");
    add_common(sk, sk_c, false);
    sk_in.add(sk);
    sk->add_option("--k-range", sk_range, "Comma-separated K values");
    sk->add_option("--criteria", sk_criteria, "Comma-separated: ch, silhouette, dbstar");
    sk->add_option("--restarts", sk_restarts, "Random initialisations per K");
    sk->add_option("--max-iter", sk_iter, "Lloyd iteration cap");

    // run ----------------------------------------------------------------------
    Common run_c;
    std::string run_config, run_preset, run_cache;
    std::optional<std::size_t> run_reps;
    bool run_full = false, run_ksel_only = false;
    auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment from a JSON config or preset");
    add_common(run, run_c, false);
    run->add_option("--config", run_config, "Experiment config (JSON)");
    run->add_option("--preset", run_preset, "table1 | table2 | variation2 | table4 | table5 | table7");
    run->add_flag("--full-scale", run_full, "Use 100 replications for presets");
    run->add_option("--replications", run_reps, "Override the replication count");
    run->add_option("--cache-dir", run_cache, "Persist Gram matrices here");
    run->add_flag("--k-selection-only", run_ksel_only, "Only run the K-selection study");

    // report -------------------------------------------------------------------
    Common rep_c;
    std::vector<std::string> rep_inputs;
    auto* rep = app.add_subcommand("report", "Concatenate results.csv files into one plot-ready CSV");
    add_common(rep, rep_c, true);
    rep->add_option("inputs", rep_inputs, "results.csv files or run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));
        if (isa != "auto") simd::set_isa_override(isa == "avx2" ? simd::Isa::Avx2 : simd::Isa::Scalar);

        if (*sim) {
            Rng rng(sim_c.seed.value_or(0));
            std::vector<DistributionRecord> records;
            Json meta{{"generator", sim_model}, {"seed", sim_c.seed.value_or(0)}};
            if (sim_model == "univariate") {
                auto cfg = UnivariateModelConfig::preset(sim_preset, sim_lambda);
                cfg.n = sim_n;
                cfg.validate();
                records = generate_univariate(cfg, rng);
                meta["preset"] = sim_preset;
                meta["lambda"] = sim_lambda;
            } else {
                const bool dep = sim_model == "bivariate_dependent";
                auto cfg = dep ? BivariateModelConfig::table6(sim_rho) : BivariateModelConfig::table3();
                cfg.n_per_cluster = sim_npc;
                cfg.n_obs = sim_nobs;
                records = generate_bivariate(cfg, rng);
                if (dep) meta["rho"] = sim_rho;
            }
            auto path = write_manifest(sim_c.out, records, meta);
            spdlog::info("wrote {} records to {}", records.size(), path.string());
        } else if (*sar) {
            Rng rng(sar_c.seed.value_or(0));
            sar_cfg.include_derivative = sar_bivariate;
            const auto classes = split_list(sar_classes);
            fs::create_directories(sar_c.out);
            auto res = ingest_dataset(sar_root, classes, sar_per_class, rng, sar_cfg, sar_c.jobs,
                                      fs::path(sar_c.out) / "sources.json");
            Json meta{{"sar_root", sar_root},
                      {"seed", sar_c.seed.value_or(0)},
                      {"intensity_levels", sar_cfg.intensity_levels},
                      {"filter_levels", sar_cfg.filter_levels},
                      {"include_derivative", sar_cfg.include_derivative}};
            auto path = write_manifest(sar_c.out, res.records, meta);
            spdlog::info("wrote {} records to {}", res.records.size(), path.string());
        } else if (*gram) {
            const auto records = read_manifest(gram_manifest);
            const auto hash = content_hash(records);
            const MethodSpec method = method_from_json(Json(gram_kernel));
            if (method.kind == MethodSpec::Kind::Wasserstein) {
                auto d = wasserstein_matrix(records, 2.0, gram_grid, gram_c.jobs);
                save_distance_matrix(gram_c.out, d);
                if (!gram_csv.empty()) write_matrix_csv(gram_csv, d.n, d.values);
            } else {
                KernelSpec k = method.kernel;
                if (k.sigma_auto) {
                    k = k.with_sigma(select_sigma_star(records));
                    spdlog::info("sigma* = {}", k.sigma);
                }
                GramCache cache;
                GramMode mode = gram_mode == "exact" ? GramMode::Exact : GramMode::Estimated;
                if (gram_mode == "auto")
                    mode = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.is_mixture(); })
                               ? GramMode::Exact
                               : GramMode::Estimated;
                auto g = cache.gram(hash, records, k, mode, QuadratureConfig{}, gram_c.jobs);
                save_gram(gram_c.out, *g, hash);
                if (!gram_csv.empty()) write_matrix_csv(gram_csv, g->size(), g->values());
            }
        } else if (*cl) {
            cl_in.check();
            KMeansOptions opt;
            opt.K = cl_k;
            opt.restarts = cl_restarts;
            opt.seed = cl_c.seed.value_or(0);
            opt.max_iter = cl_iter;
            opt.init = cl_init == "kmeans++" ? KMeansInit::PlusPlus : KMeansInit::Random;
            opt.jobs = cl_c.jobs;
            Partition p;
            std::vector<std::string> ids;
            if (cl_in.wasserstein()) {
                const auto records = read_manifest(cl_in.manifest);
                p = wasserstein_kmeans(records, opt, parse_centroid_mode(cl_in.centroid), cl_in.grid);
                for (const auto& e : read_manifest_entries(cl_in.manifest)) ids.push_back(e.path);
            } else {
                p = kernel_kmeans(load_gram(cl_in.gram), opt);
            }
            write_json_file(cl_c.out, partition_to_json(p));
            if (!cl_csv.empty()) write_assignments_csv(cl_csv, p, ids);
        } else if (*sc) {
            const Partition p = partition_from_json(read_json_file(sc_partition));
            const auto records = read_manifest(sc_manifest);
            if (records.size() != p.size()) throw DataError("partition and manifest sizes differ");
            const auto labels = record_labels(records);
            const auto truth = encode_labels(labels);
            write_json_file(sc_c.out, Json{{"accuracy", accuracy(p, truth)},
                                           {"ari", adjusted_rand_index(p, truth)},
                                           {"n", p.size()},
                                           {"K", p.K}});
        } else if (*sk) {
            sk_in.check();
            const auto ks = parse_k_list(sk_range);
            std::optional<GeometryHandle> geo;
            std::optional<GramMatrix> g;
            std::vector<DistributionRecord> records;
            if (sk_in.wasserstein()) {
                records = read_manifest(sk_in.manifest);
                geo = GeometryHandle::from_wasserstein(records, 2.0, sk_in.grid, sk_c.jobs);
            } else {
                g = load_gram(sk_in.gram);
                geo = GeometryHandle::from_gram(*g);
            }
            const std::uint64_t seed = sk_c.seed.value_or(0);
            std::map<std::size_t, Partition> memo;
            auto runner = [&](std::size_t K) {
                if (auto it = memo.find(K); it != memo.end()) return it->second;
                KMeansOptions opt;
                opt.K = K;
                opt.restarts = sk_restarts;
                opt.seed = derive_seed(seed, K);
                opt.max_iter = sk_iter;
                opt.jobs = sk_c.jobs;
                Partition p = g ? kernel_kmeans(*g, opt)
                                : wasserstein_kmeans(records, opt, parse_centroid_mode(sk_in.centroid), sk_in.grid);
                return memo.emplace(K, std::move(p)).first->second;
            };
            Json out = Json::array();
            for (const auto& name : split_list(sk_criteria)) {
                const Criterion c = parse_criterion(name);
                auto sel = select_k(*geo, runner, ks, c);
                Json scores = Json::array();
                for (const auto& s : sel.scores)
                    scores.push_back({{"K", s.K},
                                      {"value", std::isfinite(s.value.value) ? Json(s.value.value) : Json("inf")},
                                      {"flagged", s.value.flagged}});
                out.push_back({{"criterion", criterion_name(c)}, {"chosen", sel.chosen}, {"scores", scores}});
            }
            write_json_file(sk_c.out, out);
        } else if (*run) {
            if (run_config.empty() == run_preset.empty()) throw ConfigError("run needs exactly one of --config, --preset");
            Json j = run_config.empty() ? Json{{"preset", run_preset}, {"full_scale", run_full}}
                                        : read_json_file(run_config);
            if (run_c.seed) j["seed"] = *run_c.seed;
            if (run_reps) j["replications"] = *run_reps;
            if (!run_c.out.empty()) j["output"] = run_c.out;
            if (!run_cache.empty()) j["cache_dir"] = run_cache;
            j["jobs"] = run_c.jobs;
            if (!run_config.empty() && run_full) j["full_scale"] = true;
            const auto cfg = ExperimentConfig::from_json(j);
            if (!run_ksel_only) {
                auto res = run_experiment(cfg);
                for (const auto& row : res.table.rows)
                    std::cout << row.param << '\t' << row.method << '\t' << row.mean_accuracy << '\t' << row.mean_ari
                              << '\n';
            }
            if (cfg.k_selection || run_ksel_only) {
                auto ks = run_k_selection(cfg);
                for (const auto& row : ks.rows) {
                    std::cout << row.param << '\t' << row.method << '\t' << row.criterion;
                    for (double v : row.proportions) std::cout << '\t' << v;
                    std::cout << '\n';
                }
            }
        } else if (*rep) {
            std::vector<fs::path> inputs;
            for (const auto& in : rep_inputs)
                inputs.push_back(fs::is_directory(in) ? fs::path(in) / "results.csv" : fs::path(in));
            write_report(rep_c.out, inputs);
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return 1;
    }
    return 0;
}
