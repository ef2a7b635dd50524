#include "distkm/sar.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include <spdlog/spdlog.h>

#include "distkm/error.hpp"
#include "distkm/manifest.hpp"
#include "distkm/parallel.hpp"
#include "distkm/simd/dispatch.hpp"

namespace distkm {

namespace fs = std::filesystem;

void SarImage::validate() const {
    if (height < 3 || width < 3) throw InputError("SAR image " + source + " is smaller than 3x3");
    if (pixels.size() != height * width) throw InputError("SAR image " + source + ": pixel count mismatch");
}

void SarFeatureConfig::validate() const {
    if (intensity_levels < 2) throw ConfigError("intensity_levels must be >= 2");
    if (filter_levels < 2) throw ConfigError("filter_levels must be >= 2");
}

double sobel_max_norm() { return 65535.0 * std::sqrt(5.0) / 2.0; }

int discretize_intensity_value(std::uint16_t v, int levels) {
    return static_cast<int>(static_cast<std::uint64_t>(v) * static_cast<std::uint64_t>(levels) / 65535u);
}

std::vector<int> discretize_intensity(const SarImage& img, int levels) {
    std::vector<int> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = discretize_intensity_value(img.pixels[i], levels);
    return out;
}

std::vector<double> sobel_gradient_norm(const SarImage& img) {
    img.validate();
    std::vector<double> in(img.pixels.begin(), img.pixels.end());
    std::vector<double> out((img.height - 2) * (img.width - 2));
    simd::sobel_norm(in, img.height, img.width, out);
    return out;
}

int discretize_filter_value(double v, int levels) {
    if (!(v >= 0.0)) throw std::logic_error("discretize_filter: negative gradient norm");
    // The computed norm of an extreme 3x3 window can land an ulp away from the
    // closed-form G_max; a relative slack of 1e-12 keeps bin edges exact.
    const double q = v / (sobel_max_norm() / levels);
    const double r = std::floor(q * (1.0 + 1e-12));
    return static_cast<int>(std::min(r, static_cast<double>(levels)));
}

std::vector<int> discretize_filter(std::span<const double> values, int levels) {
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = discretize_filter_value(values[i], levels);
    return out;
}

namespace {

/// Sorted distinct indices in [0, n) of size k; deterministic in the seed.
std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::uint64_t pixel_hash(const SarImage& img) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (auto v : img.pixels) {
        h ^= v;
        h *= 0x100000001B3ULL;
    }
    return h ^ (img.height << 32) ^ img.width;
}

}  // namespace

DistributionRecord extract_record(const SarImage& img, const SarFeatureConfig& cfg) {
    cfg.validate();
    img.validate();
    std::vector<double> rows;
    std::size_t dim = 1;
    if (!cfg.include_derivative) {
        rows.reserve(img.pixels.size());
        for (auto v : img.pixels) rows.push_back(discretize_intensity_value(v, cfg.intensity_levels));
    } else {
        dim = 2;
        const auto norms = sobel_gradient_norm(img);
        const std::size_t ow = img.width - 2;
        rows.reserve(2 * norms.size());
        for (std::size_t r = 1; r + 1 < img.height; ++r)
            for (std::size_t c = 1; c + 1 < img.width; ++c) {
                rows.push_back(discretize_intensity_value(img.at(r, c), cfg.intensity_levels));
                rows.push_back(discretize_filter_value(norms[(r - 1) * ow + (c - 1)], cfg.filter_levels));
            }
    }
    const std::size_t n = rows.size() / dim;
    if (cfg.max_pixels > 0 && cfg.max_pixels < n) {
        // seeded by content, so extraction stays a pure function of (image, config)
        Rng rng(derive_seed(cfg.subsample_seed, pixel_hash(img)));
        const auto keep = choose_without_replacement(n, cfg.max_pixels, rng);
        std::vector<double> sub;
        sub.reserve(keep.size() * dim);
        for (auto i : keep)
            for (std::size_t d = 0; d < dim; ++d) sub.push_back(rows[i * dim + d]);
        rows.swap(sub);
    }
    DistributionRecord rec{EmpiricalDistribution(dim, rows).compressed(), img.label};
    return rec;
}

namespace {

struct PngReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadState() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteState() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp msg) { spdlog::debug("libpng: {}", msg); }

}  // namespace

SarImage read_png(const fs::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw DataError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw DataError(path.string() + ": not a PNG file");

    std::string message;
    PngReadState st;
    st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    if (!st.png) throw DataError("libpng initialisation failed");
    st.info = png_create_info_struct(st.png);
    if (!st.info) throw DataError("libpng initialisation failed");

    SarImage img;
    img.source = path.string();
    int bit_depth = 0;
    std::vector<std::vector<png_byte>> rows;
    std::vector<png_bytep> ptrs;
    if (setjmp(png_jmpbuf(st.png))) throw DataError(path.string() + ": " + message);
    png_init_io(st.png, file.get());
    png_set_sig_bytes(st.png, 8);
    png_read_info(st.png, st.info);
    const int color = png_get_color_type(st.png, st.info);
    bit_depth = png_get_bit_depth(st.png, st.info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        message = "only grayscale images are supported";
        png_longjmp(st.png, 1);
    }
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(st.png);
    png_read_update_info(st.png, st.info);
    img.height = png_get_image_height(st.png, st.info);
    img.width = png_get_image_width(st.png, st.info);
    const std::size_t rowbytes = png_get_rowbytes(st.png, st.info);
    rows.assign(img.height, std::vector<png_byte>(rowbytes));
    ptrs.resize(img.height);
    for (std::size_t r = 0; r < img.height; ++r) ptrs[r] = rows[r].data();
    png_read_image(st.png, ptrs.data());
    png_read_end(st.png, nullptr);

    const bool sixteen = bit_depth == 16;
    if (!sixteen) spdlog::warn("{}: {}-bit image scaled to 16 bits (x257)", path.string(), bit_depth);
    img.pixels.resize(img.height * img.width);
    for (std::size_t r = 0; r < img.height; ++r)
        for (std::size_t c = 0; c < img.width; ++c) {
            // low-depth gray arrives expanded to 0..255, like 8-bit
            const auto v = sixteen ? static_cast<std::uint16_t>((rows[r][2 * c] << 8) | rows[r][2 * c + 1])
                                   : static_cast<std::uint16_t>(rows[r][c] * 257u);
            img.pixels[r * img.width + c] = v;
        }
    return img;
}

void write_png16(const fs::path& path, const SarImage& img) {
    if (img.pixels.size() != img.height * img.width || img.height == 0)
        throw InputError("write_png16: malformed image");
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw DataError("cannot write " + path.string());
    std::string message;
    PngWriteState st;
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    if (!st.png) throw DataError("libpng initialisation failed");
    st.info = png_create_info_struct(st.png);
    if (!st.info) throw DataError("libpng initialisation failed");
    std::vector<png_byte> row(2 * img.width);
    if (setjmp(png_jmpbuf(st.png))) throw DataError(path.string() + ": " + message);
    png_init_io(st.png, file.get());
    png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st.png, st.info);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            const auto v = img.pixels[r * img.width + c];
            row[2 * c] = static_cast<png_byte>(v >> 8);
            row[2 * c + 1] = static_cast<png_byte>(v & 0xFF);
        }
        png_write_row(st.png, row.data());
    }
    png_write_end(st.png, nullptr);
}

IngestResult ingest_dataset(const fs::path& root, std::span<const std::string> classes, std::size_t per_class,
                            Rng& rng, const SarFeatureConfig& cfg, int jobs,
                            const std::optional<fs::path>& sources_manifest) {
    cfg.validate();
    if (classes.empty()) throw ConfigError("ingest_dataset: no classes requested");
    if (per_class == 0) throw ConfigError("ingest_dataset: per_class must be positive");
    std::vector<std::string> files, labels;
    for (const auto& cls : classes) {
        const fs::path dir = root / cls;
        if (!fs::is_directory(dir)) throw DataError("missing class directory " + dir.string());
        std::vector<std::string> listing;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
            if (ext == ".png") listing.push_back(entry.path().string());
        }
        std::sort(listing.begin(), listing.end());
        if (listing.size() < per_class)
            throw DataError("class " + cls + " has " + std::to_string(listing.size()) + " images, fewer than " +
                            std::to_string(per_class));
        for (auto i : choose_without_replacement(listing.size(), per_class, rng)) {
            files.push_back(listing[i]);
            labels.push_back(cls);
        }
    }
    IngestResult out;
    out.records.resize(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) {
        SarImage img = read_png(files[i]);
        img.label = labels[i];
        out.records[i] = extract_record(img, cfg);
    });
    out.files = files;
    if (sources_manifest) {
        std::vector<ManifestEntry> entries;
        for (std::size_t i = 0; i < files.size(); ++i) entries.push_back({files[i], labels[i]});
        Json meta{{"root", root.string()},
                  {"per_class", per_class},
                  {"intensity_levels", cfg.intensity_levels},
                  {"filter_levels", cfg.filter_levels},
                  {"include_derivative", cfg.include_derivative}};
        write_manifest_entries(*sources_manifest, entries, meta);
    }
    return out;
}

}  // namespace distkm
