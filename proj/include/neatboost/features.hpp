#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "neatboost/image.hpp"

namespace neatboost {

inline constexpr std::size_t kNumDescriptors = 16;

/// The 16 structural descriptors of one specimen, in fixed order:
///  0 grad_mag_mean, 1 grad_mag_std, 2 mean_local_variance,
///  3 std_local_variance, 4 edge_density, 5 edge_pixel_count,
///  6..10 orientation histogram bins 1..5, 11..14 Gabor energy at
///  0/45/90/135 degrees, 15 percentage_dense_area.
struct FeatureVector {
    std::array<double, kNumDescriptors> values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Column names f01..f16 and descriptive names in descriptor order.
std::string_view descriptor_column(std::size_t index);
std::string_view descriptor_name(std::size_t index);

/// Descriptor extraction parameters. The defaults are the project's fixed
/// choices; they are exposed for tests only.
struct DescriptorParams {
    double edge_threshold = 0.1;
    std::size_t variance_window = 7;
    double gabor_wavelength = 8.0;
    double gabor_sigma = 4.0;
    double gabor_gamma = 0.5;
    double gabor_psi = 0.0;
    std::size_t gabor_size = 21;
};

struct GradientField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> magnitude;
    std::vector<double> orientation;  // [0, pi)
};

/// 3x3 Sobel (unit scale) with replicate padding. The mask argument only
/// validates dimensions; statistics restrict to the mask downstream.
GradientField sobel_gradients(const ImageGray& img, const FilletMask& mask);

/// Magnitude-weighted, L1-normalized histogram of orientations over the
/// mask, 5 equal bins on [0, pi). All zero when no gradient exists.
std::array<double, 5> orientation_histogram(const GradientField& grad, const FilletMask& mask);

/// Real, DC-corrected Gabor kernel (size x size, row-major).
std::vector<double> gabor_kernel(double orientation_deg, const DescriptorParams& params = {});

/// Mean absolute Gabor response over mask pixels.
double gabor_energy(const ImageGray& img, const FilletMask& mask, double orientation_deg,
                    const DescriptorParams& params = {});

/// Fraction of mask pixels classified dense (darker than the in-mask Otsu
/// threshold) after a 3x3 binary opening.
double dense_area_fraction(const ImageGray& img, const FilletMask& mask);

/// Per-pixel population variance over a square window (replicate padding).
std::vector<double> local_variance(const ImageGray& img, std::size_t window);

FeatureVector extract_descriptors(const ImageGray& img, const FilletMask& mask,
                                  const DescriptorParams& params = {});

/// Full image path: downscale, segment, extract.
FeatureVector describe_image(const ImageGray& img, std::size_t max_side = 1024);

}  // namespace neatboost
