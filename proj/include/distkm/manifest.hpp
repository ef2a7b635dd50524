#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distkm/distributions.hpp"
#include "distkm/json_io.hpp"

namespace distkm {

/// Empirical CSV: one observation per row, p numeric columns. A header row
/// is optional; a column named "count" holds integer multiplicities.
EmpiricalDistribution read_empirical_csv(const std::filesystem::path& path);
void write_empirical_csv(const std::filesystem::path& path, const EmpiricalDistribution& e);

/// `.csv` -> empirical, `.json` -> uniform mixture (label read if present).
DistributionRecord read_record(const std::filesystem::path& path);
void write_record(const std::filesystem::path& path, const DistributionRecord& r);

struct ManifestEntry {
    std::string path;  // relative to the manifest directory unless absolute
    std::optional<std::string> label;
};

/// Manifest JSON: either a list of {path, label} or {"records": [...], ...}.
std::vector<ManifestEntry> read_manifest_entries(const std::filesystem::path& manifest);
std::vector<DistributionRecord> read_manifest(const std::filesystem::path& manifest);

/// Writes one file per record under `dir/records/` plus `dir/manifest.json`;
/// `meta` is stored alongside the record list. Returns the manifest path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, std::span<const DistributionRecord> records,
                                     const Json& meta = Json::object());

/// Writes a manifest that references existing files (e.g. chosen images).
void write_manifest_entries(const std::filesystem::path& manifest, std::span<const ManifestEntry> entries,
                            const Json& meta = Json::object());

/// FNV-1a 64 over the canonical bytes of the records (payloads and labels), hex.
std::string content_hash(std::span<const DistributionRecord> records);
/// FNV-1a 64 over a string, hex.
std::string fnv1a_hex(std::string_view bytes);
/// FNV-1a 64 over a file's bytes, hex.
std::string file_hash(const std::filesystem::path& path);

/// Labels in record order; missing labels become "".
std::vector<std::string> record_labels(std::span<const DistributionRecord> records);

}  // namespace distkm
