#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "distkm/gram.hpp"
#include "distkm/json_io.hpp"
#include "distkm/kmeans.hpp"
#include "distkm/sar.hpp"
#include "distkm/validity.hpp"

namespace distkm {

/// One clustering method of an experiment: kernel K-means with a kernel
/// (sigma may be "auto") or K-means under W2.
struct MethodSpec {
    enum class Kind { Kernel, Wasserstein };
    Kind kind = Kind::Kernel;
    KernelSpec kernel;
    std::string name;  // table label; derived when empty

    std::string label() const;
    static MethodSpec wasserstein();
    static MethodSpec of_kernel(const KernelSpec& k);
};

/// Accepts "2-W" | "wasserstein" | "<family>" | "<family>:<param>" (param is
/// sigma or alpha; "auto" allowed for sigma) or an object
/// {"kernel": {...}} / {"metric": "wasserstein"}, each with an
/// optional "name".
MethodSpec method_from_json(const Json& j);
Json method_to_json(const MethodSpec& m);

/// Where each replication's records come from.
struct SourceSpec {
    enum class Kind { Univariate, BivariateIndependent, BivariateDependent, Manifest, Sar };
    Kind kind = Kind::Univariate;

    // univariate uniform-mixture model
    std::string preset = "default";
    std::vector<double> lambdas{0.0};
    std::size_t n = 100;

    // bivariate Pearson models
    std::size_t n_per_cluster = 50;
    std::size_t n_obs = 1000;
    double rho = 0.9;
    int max_redraws = 100;
    /// Keep only this coordinate (e.g. the X1-only bivariate study).
    std::optional<std::size_t> marginal;

    // fixed dataset
    std::filesystem::path manifest;

    // SAR images: each pairing is a list of class directories
    std::filesystem::path sar_root;
    std::vector<std::vector<std::string>> pairings;
    std::size_t per_class = 100;
    SarFeatureConfig sar;

    bool univariate() const;
};

std::string source_kind_name(SourceSpec::Kind k);

struct KSelectionSpec {
    std::vector<std::size_t> k_range{2, 3, 4};
    std::vector<Criterion> criteria{Criterion::CH, Criterion::Silhouette, Criterion::DBStar};
};

struct ExperimentConfig {
    std::string name = "experiment";
    SourceSpec source;
    std::vector<MethodSpec> methods;
    /// "auto" (exact for mixtures, estimated for samples), "exact", "estimated".
    std::string gram_mode = "auto";
    std::size_t K = 0;  // 0: number of distinct labels
    std::size_t restarts = 10;
    std::size_t max_iter = 100;
    KMeansInit init = KMeansInit::Random;
    std::size_t replications = 20;
    std::uint64_t seed = 0;
    int jobs = 1;
    CentroidMode centroid_mode = CentroidMode::QuantileMean;
    std::size_t grid = 1024;
    std::optional<KSelectionSpec> k_selection;
    std::filesystem::path output;     // empty: no artifacts
    std::filesystem::path cache_dir;  // empty: in-memory Gram cache only
    double max_failure_fraction = 0.10;
    QuadratureConfig quad;

    void validate() const;
    Json to_json() const;
    static ExperimentConfig from_json(const Json& j);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// "table1", "table2", "variation2", "table4", "table5", "table7".
    /// Desk-scale replications (20) unless `full_scale` (100).
    static ExperimentConfig preset(const std::string& name, bool full_scale = false);
    static std::vector<std::string> preset_names();
};

/// Thread-safe cache of Gram matrices and radial pair-sum matrices keyed by
/// data content hash plus kernel. With a directory, Grams also persist on
/// disk and survive across runs.
class GramCache {
public:
    explicit GramCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

    std::shared_ptr<const GramMatrix> gram(const std::string& content_hash, std::span<const DistributionRecord> records,
                                           const KernelSpec& kernel, GramMode mode, const QuadratureConfig& quad,
                                           int jobs);

    std::size_t hits() const;
    std::size_t misses() const;

private:
    std::shared_ptr<const std::vector<double>> radial(const std::string& content_hash,
                                                      std::span<const EmpiricalDistribution> sample,
                                                      const RadialTerm& term, int jobs);

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const GramMatrix>> grams_;
    std::map<std::string, std::shared_ptr<const std::vector<double>>> radials_;
    std::size_t hits_ = 0, misses_ = 0;
};

/// Cache key of a Gram: content hash, resolved kernel, mode and quadrature.
std::string gram_cache_key(const std::string& content_hash, const KernelSpec& kernel, GramMode mode,
                           const QuadratureConfig& quad);

/// One (parameter, replication, method) outcome.
struct ReplicationRecord {
    std::size_t param_index = 0;
    std::string param;
    std::size_t replication = 0;
    std::uint64_t seed = 0;  // replication sub-seed
    std::string method;
    bool failed = false;
    std::string error;
    double accuracy = 0.0;
    double ari = 0.0;
    double wcss = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    std::optional<double> sigma;  // resolved sigma* when auto
};

Json replication_to_json(const ReplicationRecord& r);
ReplicationRecord replication_from_json(const Json& j);

struct ResultRow {
    std::string param;
    std::string method;
    double mean_accuracy = 0.0;
    double se_accuracy = 0.0;
    double mean_ari = 0.0;
    double se_ari = 0.0;
    std::size_t replications = 0;  // successful ones
    std::size_t failed = 0;
};

/// Lloyd invariants observed over every restart of the run.
struct LloydDiagnostics {
    std::size_t restarts = 0;
    std::size_t trace_violations = 0;
    std::size_t non_fixed_points = 0;  // among returned partitions
    std::size_t returned = 0;
    std::size_t non_converged = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    const ResultRow* find(const std::string& param, const std::string& method) const;
};

struct ExperimentResult {
    ResultTable table;
    std::vector<ReplicationRecord> replications;
    LloydDiagnostics lloyd;
    std::size_t failed_replications = 0;
    std::size_t total_replications = 0;
};

/// Aggregates per-record scores into mean / standard-error rows, ordered by
/// parameter then method as first seen.
ResultTable aggregate(std::span<const ReplicationRecord> records);

/// Runs every replication, writes results.csv, results.json and
/// replications.json under config.output (when set) and throws
/// ReplicationError when more than max_failure_fraction of the replications
/// failed (after writing the artifacts).
ExperimentResult run_experiment(const ExperimentConfig& config, GramCache* cache = nullptr);

struct KSelectionRow {
    std::string param;
    std::string method;
    std::string criterion;
    std::vector<std::size_t> k_values;
    std::vector<double> proportions;  // parallel to k_values
    std::size_t replications = 0;
};

struct KSelectionResult {
    std::vector<KSelectionRow> rows;
    std::size_t failed_replications = 0;
    std::size_t total_replications = 0;
};

/// Proportion of replications in which each K won, per (parameter, method,
/// criterion). Writes kselect.csv / kselect.json under config.output.
KSelectionResult run_k_selection(const ExperimentConfig& config, GramCache* cache = nullptr);

/// Records of one replication: the data the experiment would cluster for
/// parameter `param_index`, replication `r`, plus the sub-seed used.
std::vector<DistributionRecord> replication_records(const ExperimentConfig& config, std::size_t param_index,
                                                    std::size_t r, std::uint64_t* sub_seed = nullptr);

/// Labels of the parameter points ("0.5" for lambda, "F,M" for pairings).
std::vector<std::string> parameter_labels(const ExperimentConfig& config);

void write_result_csv(const std::filesystem::path& path, const ResultTable& t);
Json result_table_to_json(const ResultTable& t);
ResultTable result_table_from_json(const Json& j);

/// Merges results.csv files (concatenation with one header) for `report`.
void write_report(const std::filesystem::path& out, std::span<const std::filesystem::path> inputs);

}  // namespace distkm
