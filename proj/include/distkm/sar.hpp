#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distkm/distributions.hpp"
#include "distkm/rng.hpp"

namespace distkm {

/// Single-channel 16-bit image, row-major.
struct SarImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint16_t> pixels;
    std::string source;
    std::optional<std::string> label;

    std::uint16_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
    /// Throws InputError unless H, W >= 3 and the pixel count matches.
    void validate() const;
};

struct SarFeatureConfig {
    int intensity_levels = 256;  // M1
    int filter_levels = 200;     // M2
    bool include_derivative = false;
    /// Uniform pixel subsample per image (no replacement); 0 keeps every pixel.
    std::size_t max_pixels = 0;
    std::uint64_t subsample_seed = 0;

    void validate() const;
};

/// Largest possible Sobel gradient norm of a 16-bit image: 65535 * sqrt(5) / 2.
double sobel_max_norm();

/// floor(v * M1 / 65535) per pixel, row-major; values lie in [0, M1].
std::vector<int> discretize_intensity(const SarImage& img, int levels);
int discretize_intensity_value(std::uint16_t v, int levels);

/// Valid-mode Sobel gradient norm with the 1/4-scaled 3x3 kernels;
/// (H-2)*(W-2) values row-major.
std::vector<double> sobel_gradient_norm(const SarImage& img);

/// floor(v / (G_max / M2)) per value, in [0, M2].
std::vector<int> discretize_filter(std::span<const double> values, int levels);
int discretize_filter_value(double v, int levels);

/// Univariate: all pixel levels. Bivariate: (X1, X2) over interior pixels.
/// The result is compressed to distinct atoms with counts.
DistributionRecord extract_record(const SarImage& img, const SarFeatureConfig& cfg);

/// Reads a grayscale PNG. 16-bit is taken as is; 8-bit (or lower) is scaled
/// by 257 with a warning. Color images are rejected with DataError.
SarImage read_png(const std::filesystem::path& path);
/// Writes a 16-bit grayscale PNG.
void write_png16(const std::filesystem::path& path, const SarImage& img);

struct IngestResult {
    std::vector<DistributionRecord> records;
    std::vector<std::string> files;  // chosen images, in record order
};

/// Samples `per_class` PNGs without replacement from root/<class>/ for each
/// class (sorted listing, seeded), extracts one record per image labelled by
/// the class name. When `sources_manifest` is given, the chosen files are
/// written there as a {path, label} list.
IngestResult ingest_dataset(const std::filesystem::path& root, std::span<const std::string> classes,
                            std::size_t per_class, Rng& rng, const SarFeatureConfig& cfg, int jobs = 1,
                            const std::optional<std::filesystem::path>& sources_manifest = std::nullopt);

}  // namespace distkm
