#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "distkm/error.hpp"
#include "distkm/sar.hpp"
#include "test_util.hpp"

using namespace distkm;
namespace fs = std::filesystem;

namespace {

SarImage make_image(std::size_t h, std::size_t w, auto&& f) {
    SarImage img;
    img.height = h;
    img.width = w;
    img.pixels.resize(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) img.pixels[r * w + c] = static_cast<std::uint16_t>(f(r, c));
    return img;
}

SarImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    return make_image(h, w, [&](std::size_t, std::size_t) { return rng() % 65536; });
}

// 3x3 8-bit grayscale PNG with pixels 0 1 2 / 100 128 200 / 253 254 255
const unsigned char kPng8[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x03,
    0x00, 0x00, 0x00, 0x03, 0x08, 0x00, 0x00, 0x00, 0x00, 0x73, 0x43, 0xea, 0x63, 0x00, 0x00, 0x00, 0x14, 0x49, 0x44, 0x41,
    0x54, 0x78, 0x9c, 0x63, 0x60, 0x60, 0x64, 0x62, 0x48, 0x69, 0x38, 0xc1, 0xf0, 0xf7, 0xdf, 0x7f, 0x00, 0x0f, 0xbe, 0x04,
    0xaa, 0x2c, 0x68, 0x92, 0x50, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

}  // namespace

TEST(Sar, IntensityDiscretization) {
    EXPECT_EQ(discretize_intensity_value(0, 256), 0);
    EXPECT_EQ(discretize_intensity_value(65535, 256), 256);
    EXPECT_EQ(discretize_intensity_value(32767, 256), 127);
    EXPECT_EQ(discretize_intensity_value(32768, 256), 128);
    const auto img = make_image(3, 4, [](std::size_t r, std::size_t c) { return (r * 4 + c) * 5000; });
    const auto lv = discretize_intensity(img, 256);
    ASSERT_EQ(lv.size(), 12u);
    for (std::size_t i = 0; i < lv.size(); ++i) EXPECT_EQ(lv[i], discretize_intensity_value(img.pixels[i], 256));
}

TEST(Sar, FilterDiscretization) {
    const double g = sobel_max_norm();
    EXPECT_DOUBLE_EQ(g, 65535.0 * std::sqrt(5.0) / 2.0);
    EXPECT_EQ(discretize_filter_value(0.0, 200), 0);
    EXPECT_EQ(discretize_filter_value(g, 200), 200);
    EXPECT_EQ(discretize_filter_value(g / 2, 200), 100);
    EXPECT_EQ(discretize_filter_value(g * 0.999, 200), 199);
    EXPECT_THROW(discretize_filter_value(-1.0, 200), std::logic_error);
    // values on a bin edge land in the upper bin, whichever way they were computed
    for (int k = 0; k <= 200; ++k) {
        EXPECT_EQ(discretize_filter_value(k * (g / 200), 200), k);
        EXPECT_EQ(discretize_filter_value(g * k / 200, 200), k);
    }
}

TEST(Sar, SobelConstantAndStep) {
    const auto flat = make_image(6, 7, [](auto, auto) { return 40000; });
    for (double v : sobel_gradient_norm(flat)) EXPECT_EQ(v, 0.0);

    const auto step = make_image(5, 6, [](std::size_t, std::size_t c) { return c >= 3 ? 65535 : 0; });
    const auto g = sobel_gradient_norm(step);
    ASSERT_EQ(g.size(), 3u * 4u);
    const double expect[4] = {0, 65535, 65535, 0};
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(g[r * 4 + c], expect[c]);
}

TEST(Sar, SobelTransposeAndMaximum) {
    const auto img = random_image(9, 13, 4);
    const auto t = make_image(13, 9, [&](std::size_t r, std::size_t c) { return img.at(c, r); });
    const auto g = sobel_gradient_norm(img), gt = sobel_gradient_norm(t);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 11; ++c) EXPECT_NEAR(g[r * 11 + c], gt[c * 7 + r], 1e-9);
    for (double v : g) EXPECT_LE(v, sobel_max_norm() * (1 + 1e-15));

    // corner pattern attaining the bound
    const auto cmax = make_image(3, 3, [](std::size_t r, std::size_t c) { return (c == 2 || (r == 2 && c == 1)) ? 65535 : 0; });
    const double v = sobel_gradient_norm(cmax)[0];
    EXPECT_NEAR(v, sobel_max_norm(), 1e-9);
    EXPECT_EQ(discretize_filter(std::vector<double>{v}, 200)[0], 200);
}

TEST(Sar, CheckerboardLevel) {
    const auto img = make_image(12, 12, [](std::size_t r, std::size_t c) { return ((r / 2 + c / 2) % 2) * 65535; });
    const auto g = sobel_gradient_norm(img);
    for (double v : g) EXPECT_NEAR(v, 46340.24290506039, 1e-8);
    for (int l : discretize_filter(g, 200)) EXPECT_EQ(l, 126);
}

TEST(Sar, RecordShapes) {
    const auto img = random_image(8, 10, 2);
    SarFeatureConfig uni;
    const auto r1 = extract_record(img, uni);
    EXPECT_EQ(r1.dim(), 1u);
    EXPECT_EQ(r1.empirical().sample_size(), 80u);

    SarFeatureConfig bi;
    bi.include_derivative = true;
    const auto r2 = extract_record(img, bi);
    EXPECT_EQ(r2.dim(), 2u);
    EXPECT_EQ(r2.empirical().sample_size(), 6u * 8u);

    const auto flat = make_image(3, 3, [](auto, auto) { return 30000; });
    const auto r3 = extract_record(flat, bi);
    ASSERT_EQ(r3.empirical().atom_count(), 1u);
    EXPECT_EQ(r3.empirical().value(0, 0), discretize_intensity_value(30000, 256));
    EXPECT_EQ(r3.empirical().value(0, 1), 0.0);

    const auto flat_u = extract_record(flat, uni);
    EXPECT_EQ(flat_u.empirical().atom_count(), 1u);
    EXPECT_EQ(flat_u.empirical().count(0), 9.0);

    SarFeatureConfig sub = uni;
    sub.max_pixels = 20;
    const auto rs = extract_record(img, sub);
    EXPECT_EQ(rs.empirical().sample_size(), 20u);
    EXPECT_EQ(extract_record(img, sub).empirical().expanded_rows(), rs.empirical().expanded_rows());

    SarImage tiny = make_image(2, 5, [](auto, auto) { return 0; });
    EXPECT_THROW(extract_record(tiny, uni), InputError);
}

TEST(Sar, PngRoundTrip) {
    const auto dir = distkm::testing::scratch_dir("sar_png");
    const auto img = random_image(7, 5, 8);
    write_png16(dir / "a.png", img);
    const auto back = read_png(dir / "a.png");
    EXPECT_EQ(back.height, 7u);
    EXPECT_EQ(back.width, 5u);
    EXPECT_EQ(back.pixels, img.pixels);

    {
        std::ofstream f(dir / "b.png", std::ios::binary);
        f.write(reinterpret_cast<const char*>(kPng8), sizeof kPng8);
    }
    const auto eight = read_png(dir / "b.png");
    const std::vector<std::uint16_t> expect{0, 257, 514, 25700, 32896, 51400, 65021, 65278, 65535};
    EXPECT_EQ(eight.pixels, expect);

    {
        std::ofstream f(dir / "c.png", std::ios::binary);
        f << "not a png";
    }
    EXPECT_THROW(read_png(dir / "c.png"), DataError);
    EXPECT_THROW(read_png(dir / "missing.png"), DataError);
}

TEST(Sar, Ingest) {
    const auto root = distkm::testing::scratch_dir("sar_ingest");
    for (const char* cls : {"F", "M"}) {
        fs::create_directories(root / cls);
        for (int i = 0; i < 6; ++i)
            write_png16(root / cls / ("img" + std::to_string(i) + ".png"), random_image(5, 5, 100 * (cls[0]) + i));
    }
    const std::vector<std::string> classes{"F", "M"};
    SarFeatureConfig cfg;
    Rng a(1), b(1);
    const auto x = ingest_dataset(root, classes, 4, a, cfg, 1, root / "sources.json");
    const auto y = ingest_dataset(root, classes, 4, b, cfg, 2);
    ASSERT_EQ(x.records.size(), 8u);
    EXPECT_EQ(x.files, y.files);
    EXPECT_TRUE(fs::exists(root / "sources.json"));
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(*x.records[i].label, i < 4 ? "F" : "M");
        EXPECT_EQ(x.records[i].empirical().expanded_rows(), y.records[i].empirical().expanded_rows());
    }

    Rng c(1);
    const std::vector<std::string> missing{"F", "X"};
    EXPECT_THROW(ingest_dataset(root, missing, 4, c, cfg), DataError);
    EXPECT_THROW(ingest_dataset(root, classes, 7, c, cfg), DataError);
}
