#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "neatboost/errors.hpp"
#include "neatboost/features.hpp"
#include "neatboost/image.hpp"

using namespace neatboost;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "neatboost_imaging";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

void write_png(const fs::path& p, std::size_t w, std::size_t h, int bits, const std::vector<unsigned>& px) {
    FILE* fp = std::fopen(p.c_str(), "wb");
    ASSERT_NE(fp, nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bits, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t bpp = bits == 16 ? 2 : 1;
    std::vector<unsigned char> row(w * bpp);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const unsigned v = px[y * w + x];
            if (bpp == 2) {
                row[2 * x] = static_cast<unsigned char>(v >> 8);
                row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
            } else {
                row[x] = static_cast<unsigned char>(v);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

ImageGray random_image(std::size_t w, std::size_t h, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageGray img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

ImageGray rotate90(const ImageGray& img) {
    // (x, y) -> (h-1-y, x)
    ImageGray out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.at(img.height - 1 - y, x) = img.at(x, y);
    return out;
}

}  // namespace

TEST(LoadGrayscale, AsciiPgmScalesByMaxval) {
    const auto p = temp_file("a.pgm");
    write_bytes(p, "P2\n# comment\n2 2\n255\n0 255\n128 64\n");
    const auto img = load_grayscale(p);
    ASSERT_EQ(img.width, 2u);
    ASSERT_EQ(img.height, 2u);
    EXPECT_DOUBLE_EQ(img.data[0], 0.0);
    EXPECT_DOUBLE_EQ(img.data[1], 1.0);
    EXPECT_NEAR(img.data[2], 0.50196, 1e-5);
    EXPECT_NEAR(img.data[3], 0.25098, 1e-5);
    EXPECT_EQ(img.bit_depth, 8);
}

TEST(LoadGrayscale, SixteenBitFullScaleIsOne) {
    const auto p = temp_file("b.pgm");
    std::string bytes = "P5\n2 1\n65535\n";
    bytes += std::string("\xff\xff\x00\x00", 4);
    write_bytes(p, bytes);
    const auto img = load_grayscale(p);
    EXPECT_DOUBLE_EQ(img.data[0], 1.0);
    EXPECT_DOUBLE_EQ(img.data[1], 0.0);
    EXPECT_EQ(img.bit_depth, 16);
}

TEST(LoadGrayscale, TruncatedHeaderIsUnsupported) {
    const auto p = temp_file("c.pgm");
    write_bytes(p, "P2\n2");
    try {
        load_grayscale(p);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported format"), std::string::npos);
    }
}

TEST(LoadGrayscale, MissingFileAndZeroDimension) {
    EXPECT_THROW(load_grayscale(temp_file("does_not_exist.pgm")), DataError);
    const auto p = temp_file("z.pgm");
    write_bytes(p, "P2\n0 3\n255\n");
    EXPECT_THROW(load_grayscale(p), DataError);
}

TEST(LoadGrayscale, PngEightAndSixteenBit) {
    const auto p8 = temp_file("g8.png");
    write_png(p8, 2, 1, 8, {255, 51});
    const auto a = load_grayscale(p8);
    EXPECT_DOUBLE_EQ(a.data[0], 1.0);
    EXPECT_DOUBLE_EQ(a.data[1], 0.2);

    const auto p16 = temp_file("g16.png");
    write_png(p16, 1, 2, 16, {65535, 0});
    const auto b = load_grayscale(p16);
    EXPECT_DOUBLE_EQ(b.data[0], 1.0);
    EXPECT_DOUBLE_EQ(b.data[1], 0.0);
    EXPECT_EQ(b.bit_depth, 16);
}

TEST(LoadGrayscale, PgmRoundTrip) {
    ImageGray img(3, 2);
    img.data = {0.0, 1.0, 0.5, 0.25, 0.75, 0.125};
    const auto p = temp_file("rt.pgm");
    write_pgm(p, img, 65535);
    const auto back = load_grayscale(p);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1.0 / 65535.0);
}

TEST(Downscale, AreaAveragesToMaxSide) {
    ImageGray img(4, 2);
    img.data = {0, 1, 0, 1, 1, 0, 1, 0};
    const auto small = downscale_to_max_side(img, 2);
    ASSERT_EQ(small.width, 2u);
    ASSERT_EQ(small.height, 1u);
    EXPECT_NEAR(small.data[0], 0.5, 1e-12);
    EXPECT_NEAR(small.data[1], 0.5, 1e-12);
    EXPECT_EQ(downscale_to_max_side(img, 10).data, img.data);
}

TEST(Segment, BimodalHalvesSelectsBrightHalf) {
    ImageGray img(20, 10, 0.1);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 10; x < 20; ++x) img.at(x, y) = 0.9;
    const auto m = segment_fillet(img);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 0; x < 20; ++x) EXPECT_EQ(m.at(x, y), x >= 10);
}

TEST(Segment, ConstantImageHasNoSpecimen) {
    try {
        segment_fillet(ImageGray(8, 8, 0.5));
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no specimen detected"), std::string::npos);
    }
}

TEST(Segment, KeepsLargestComponentOnly) {
    ImageGray img(30, 30, 0.05);
    for (std::size_t y = 5; y < 15; ++y)
        for (std::size_t x = 5; x < 15; ++x) img.at(x, y) = 0.95;
    img.at(25, 25) = 0.95;
    const auto m = segment_fillet(img);
    EXPECT_EQ(m.count(), 100u);
    EXPECT_FALSE(m.at(25, 25));
    EXPECT_TRUE(m.at(5, 5));
    EXPECT_TRUE(m.at(14, 14));
}

TEST(Segment, FillsHoles) {
    FilletMask m(7, 7);
    for (std::size_t y = 1; y < 6; ++y)
        for (std::size_t x = 1; x < 6; ++x) m.set(x, y, true);
    m.set(3, 3, false);
    const auto filled = fill_holes(m);
    EXPECT_TRUE(filled.at(3, 3));
    EXPECT_FALSE(filled.at(0, 0));
    EXPECT_EQ(filled.count(), 25u);
}

TEST(Segment, LargestComponentUsesFourConnectivity) {
    FilletMask m(4, 4);
    m.set(0, 0, true);
    m.set(1, 1, true);  // diagonal only
    m.set(3, 2, true);
    m.set(3, 3, true);
    const auto c = largest_component(m);
    EXPECT_EQ(c.count(), 2u);
    EXPECT_TRUE(c.at(3, 2));
}

TEST(Otsu, InvariantToAffineRescaling) {
    std::vector<double> v{0.1, 0.12, 0.15, 0.7, 0.72, 0.8, 0.3};
    const auto t = otsu_threshold(v);
    std::vector<double> w;
    for (double x : v) w.push_back(3.0 * x - 0.4);
    const auto u = otsu_threshold(w);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(t.above(v[i]), u.above(w[i]));
    EXPECT_FALSE(otsu_threshold(std::vector<double>{0.3, 0.3}).valid());
}

TEST(Sobel, ConstantImageHasZeroMagnitude) {
    const ImageGray img(9, 7, 0.42);
    const auto g = sobel_gradients(img, FilletMask(9, 7, true));
    for (double m : g.magnitude) EXPECT_EQ(m, 0.0);
}

TEST(Sobel, VerticalStepHandConvolution) {
    ImageGray img(8, 8, 0.0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 4; x < 8; ++x) img.at(x, y) = 1.0;
    const auto g = sobel_gradients(img, FilletMask(8, 8, true));
    // at (3, 4): right column all 1, left column all 0 -> gx = 1+2+1 = 4, gy = 0
    const std::size_t i = 4 * 8 + 3;
    EXPECT_DOUBLE_EQ(g.magnitude[i], 4.0);
    EXPECT_DOUBLE_EQ(g.orientation[i], 0.0);
    EXPECT_DOUBLE_EQ(g.magnitude[4 * 8 + 4], 4.0);
    EXPECT_DOUBLE_EQ(g.magnitude[4 * 8 + 1], 0.0);
}

TEST(Sobel, HorizontalStepHasOrientationHalfPi) {
    ImageGray img(8, 8, 0.0);
    for (std::size_t y = 4; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) img.at(x, y) = 1.0;
    const auto g = sobel_gradients(img, FilletMask(8, 8, true));
    const std::size_t i = 3 * 8 + 4;
    EXPECT_DOUBLE_EQ(g.magnitude[i], 4.0);
    EXPECT_NEAR(g.orientation[i], std::numbers::pi / 2.0, 1e-15);
    for (double o : g.orientation) {
        EXPECT_GE(o, 0.0);
        EXPECT_LT(o, std::numbers::pi);
    }
}

TEST(OrientationHistogram, SingleOrientationConcentrates) {
    GradientField g{2, 2, {1.0, 2.0, 0.5, 3.0}, {0.0, 0.0, 0.0, 0.0}};
    const auto h = orientation_histogram(g, FilletMask(2, 2, true));
    EXPECT_DOUBLE_EQ(h[0], 1.0);
    for (int b = 1; b < 5; ++b) EXPECT_DOUBLE_EQ(h[b], 0.0);
}

TEST(OrientationHistogram, ZeroGradientIsAllZero) {
    const ImageGray img(5, 5, 0.3);
    const FilletMask m(5, 5, true);
    const auto h = orientation_histogram(sobel_gradients(img, m), m);
    for (double v : h) EXPECT_EQ(v, 0.0);
}

TEST(OrientationHistogram, TwoPopulationsSplitEvenly) {
    GradientField g{4, 1, {1.0, 1.0, 1.0, 1.0}, {0.1, 0.1, 2.0, 2.0}};
    const auto h = orientation_histogram(g, FilletMask(4, 1, true));
    const std::array<double, 5> expected{0.5, 0.0, 0.0, 0.5, 0.0};
    for (int b = 0; b < 5; ++b) EXPECT_NEAR(h[b], expected[b], 1e-12);
}

TEST(OrientationHistogram, MaskExcludesPixels) {
    GradientField g{2, 1, {1.0, 5.0}, {0.1, 2.0}};
    FilletMask m(2, 1);
    m.set(0, 0, true);
    const auto h = orientation_histogram(g, m);
    EXPECT_DOUBLE_EQ(h[0], 1.0);
    EXPECT_DOUBLE_EQ(h[3], 0.0);
}

TEST(Gabor, KernelIsDcFree) {
    for (double deg : {0.0, 45.0, 90.0, 135.0}) {
        const auto k = gabor_kernel(deg);
        ASSERT_EQ(k.size(), 21u * 21u);
        double s = 0.0;
        for (double v : k) s += v;
        EXPECT_NEAR(s, 0.0, 1e-12);
    }
}

TEST(Gabor, ConstantImageHasZeroEnergy) {
    const ImageGray img(30, 30, 0.6);
    const FilletMask m(30, 30, true);
    for (double deg : {0.0, 45.0, 90.0, 135.0}) EXPECT_NEAR(gabor_energy(img, m, deg), 0.0, 1e-9);
}

TEST(Gabor, VerticalStripesFavourZeroDegrees) {
    ImageGray img(48, 48);
    for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 48; ++x) img.at(x, y) = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * x / 8.0);
    const FilletMask m(48, 48, true);
    EXPECT_GT(gabor_energy(img, m, 0.0), gabor_energy(img, m, 90.0));
}

TEST(Gabor, NinetyDegreeRotationSwapsEnergies) {
    const auto img = random_image(32, 32, 7);
    const auto rot = rotate90(img);
    const FilletMask m(32, 32, true);
    EXPECT_NEAR(gabor_energy(img, m, 0.0), gabor_energy(rot, m, 90.0), 1e-6);
    EXPECT_NEAR(gabor_energy(img, m, 90.0), gabor_energy(rot, m, 0.0), 1e-6);
    EXPECT_NEAR(gabor_energy(img, m, 45.0), gabor_energy(rot, m, 135.0), 1e-6);
    EXPECT_NEAR(gabor_energy(img, m, 135.0), gabor_energy(rot, m, 45.0), 1e-6);
}

TEST(Gabor, StripeRotationSwapsZeroAndNinety) {
    ImageGray img(40, 40);
    for (std::size_t y = 0; y < 40; ++y)
        for (std::size_t x = 0; x < 40; ++x) img.at(x, y) = 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * x / 8.0);
    const auto rot = rotate90(img);
    const FilletMask m(40, 40, true);
    EXPECT_NEAR(gabor_energy(img, m, 0.0), gabor_energy(rot, m, 90.0), 1e-6);
    EXPECT_NEAR(gabor_energy(img, m, 90.0), gabor_energy(rot, m, 0.0), 1e-6);
}

TEST(DenseArea, UniformRegionIsZero) {
    EXPECT_EQ(dense_area_fraction(ImageGray(10, 10, 0.8), FilletMask(10, 10, true)), 0.0);
}

TEST(DenseArea, SolidDarkBlockCountsQuarter) {
    ImageGray img(20, 20, 0.8);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 0; x < 10; ++x) img.at(x, y) = 0.2;
    EXPECT_NEAR(dense_area_fraction(img, FilletMask(20, 20, true)), 0.25, 0.01);
}

TEST(DenseArea, IsolatedDarkPixelsAreOpenedAway) {
    ImageGray img(20, 20, 0.8);
    for (std::size_t y = 1; y < 20; y += 3)
        for (std::size_t x = 1; x < 20; x += 3) img.at(x, y) = 0.2;
    EXPECT_EQ(dense_area_fraction(img, FilletMask(20, 20, true)), 0.0);
}

TEST(DenseArea, InvariantToAffineIntensityRescaling) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        ImageGray img(24, 24);
        // blocky texture so opening keeps structure
        for (std::size_t y = 0; y < 24; ++y)
            for (std::size_t x = 0; x < 24; ++x) img.at(x, y) = 0.0;
        for (std::size_t by = 0; by < 24; by += 4)
            for (std::size_t bx = 0; bx < 24; bx += 4) {
                const double v = u(rng);
                for (std::size_t y = by; y < by + 4; ++y)
                    for (std::size_t x = bx; x < bx + 4; ++x) img.at(x, y) = v;
            }
        const FilletMask m(24, 24, true);
        const double a = 0.2 + 2.0 * u(rng), b = u(rng) - 0.5;
        ImageGray scaled = img;
        for (double& v : scaled.data) v = a * v + b;
        EXPECT_DOUBLE_EQ(dense_area_fraction(img, m), dense_area_fraction(scaled, m));
    }
}

TEST(LocalVariance, ConstantIsZeroAndCheckerboardKnown) {
    for (double v : local_variance(ImageGray(9, 9, 0.3), 7)) EXPECT_NEAR(v, 0.0, 1e-15);
    ImageGray img(3, 3);
    img.data = {0, 1, 0, 1, 0, 1, 0, 1, 0};
    const auto lv = local_variance(img, 3);
    // centre window holds 4 ones and 5 zeros
    EXPECT_NEAR(lv[4], 4.0 / 9.0 - 16.0 / 81.0, 1e-12);
}

TEST(Descriptors, ConstantSpecimenIsZeroTexture) {
    const ImageGray img(30, 30, 0.7);
    const auto f = extract_descriptors(img, FilletMask(30, 30, true));
    for (std::size_t i = 0; i < kNumDescriptors; ++i) {
        if (i >= 11 && i <= 14)
            EXPECT_NEAR(f[i], 0.0, 1e-9) << i;
        else
            EXPECT_EQ(f[i], 0.0) << i;
    }
}

TEST(Descriptors, DeterministicAndWellFormed) {
    const auto img = random_image(40, 30, 11);
    const FilletMask m(40, 30, true);
    const auto a = extract_descriptors(img, m);
    const auto b = extract_descriptors(img, m);
    EXPECT_EQ(a, b);
    double hist = 0.0;
    for (std::size_t i = 6; i <= 10; ++i) {
        EXPECT_GE(a[i], 0.0);
        hist += a[i];
    }
    EXPECT_NEAR(hist, 1.0, 1e-9);
    for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(a[4], 0.0);
    EXPECT_LE(a[4], 1.0);
    EXPECT_NEAR(a[4] * 1200.0, a[5], 1e-9);
    EXPECT_GE(a[15], 0.0);
    EXPECT_LE(a[15], 1.0);
}

TEST(Descriptors, EmptyMaskRejected) {
    EXPECT_THROW(extract_descriptors(ImageGray(5, 5, 0.3), FilletMask(5, 5, false)), std::invalid_argument);
}

TEST(Descriptors, DenseCorePhantomMatchesAreaRatio) {
    const std::size_t w = 200, h = 160;
    const double cx = 100, cy = 80, a = 80, b = 60, r = 25;
    ImageGray img(w, h, 0.05);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = x - cx, dy = y - cy;
            if ((dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0) img.at(x, y) = 0.9;
            if (dx * dx + dy * dy <= r * r) img.at(x, y) = 0.4;
        }
    const auto f = describe_image(img);
    EXPECT_NEAR(f[15], (r * r) / (a * b), 0.02);
}

TEST(Descriptors, NamesAreStable) {
    EXPECT_EQ(descriptor_column(0), "f01");
    EXPECT_EQ(descriptor_column(15), "f16");
    EXPECT_EQ(descriptor_name(15), "percentage_dense_area");
}
