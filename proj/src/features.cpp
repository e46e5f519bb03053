#include "neatboost/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace neatboost {

namespace {

constexpr std::array<std::string_view, kNumDescriptors> kColumns = {
    "f01", "f02", "f03", "f04", "f05", "f06", "f07", "f08",
    "f09", "f10", "f11", "f12", "f13", "f14", "f15", "f16"};

constexpr std::array<std::string_view, kNumDescriptors> kNames = {
    "grad_mag_mean",     "grad_mag_std",       "mean_local_variance", "std_local_variance",
    "edge_density",      "edge_pixel_count",   "orient_hist_bin1",    "orient_hist_bin2",
    "orient_hist_bin3",  "orient_hist_bin4",   "orient_hist_bin5",    "gabor_energy_0",
    "gabor_energy_45",   "gabor_energy_90",    "gabor_energy_135",    "percentage_dense_area"};

void require_same_shape(const ImageGray& img, const FilletMask& mask) {
    if (img.width != mask.width || img.height != mask.height)
        throw std::invalid_argument("mask dimensions do not match image");
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd masked_mean_std(const std::vector<double>& values, const FilletMask& mask) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask.mask[i]) {
            sum += values[i];
            ++n;
        }
    if (n == 0) return {};
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask.mask[i]) ss += (values[i] - mean) * (values[i] - mean);
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

double window_variance(const ImageGray& img, long cx, long cy, long half) {
    // accumulate offsets from the centre pixel
    const double n = static_cast<double>((2 * half + 1) * (2 * half + 1));
    const double centre = img.clamped(cx, cy);
    double sum = 0.0;
    for (long dy = -half; dy <= half; ++dy)
        for (long dx = -half; dx <= half; ++dx) sum += img.clamped(cx + dx, cy + dy) - centre;
    const double mean = sum / n;
    double ss = 0.0;
    for (long dy = -half; dy <= half; ++dy)
        for (long dx = -half; dx <= half; ++dx) {
            const double d = img.clamped(cx + dx, cy + dy) - centre - mean;
            ss += d * d;
        }
    return ss / n;
}

std::vector<char> binary_erode(const std::vector<char>& in, std::size_t w, std::size_t h) {
    std::vector<char> out(in.size(), 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            bool keep = true;
            for (long dy = -1; dy <= 1 && keep; ++dy)
                for (long dx = -1; dx <= 1 && keep; ++dx) {
                    const auto nx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1));
                    const auto ny = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1));
                    keep = in[ny * w + nx] != 0;
                }
            out[y * w + x] = keep ? 1 : 0;
        }
    return out;
}

std::vector<char> binary_dilate(const std::vector<char>& in, std::size_t w, std::size_t h) {
    std::vector<char> out(in.size(), 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            bool any = false;
            for (long dy = -1; dy <= 1 && !any; ++dy)
                for (long dx = -1; dx <= 1 && !any; ++dx) {
                    const auto nx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1));
                    const auto ny = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1));
                    any = in[ny * w + nx] != 0;
                }
            out[y * w + x] = any ? 1 : 0;
        }
    return out;
}

}  // namespace

std::string_view descriptor_column(std::size_t index) { return kColumns.at(index); }
std::string_view descriptor_name(std::size_t index) { return kNames.at(index); }

GradientField sobel_gradients(const ImageGray& img, const FilletMask& mask) {
    require_same_shape(img, mask);
    GradientField g;
    g.width = img.width;
    g.height = img.height;
    g.magnitude.resize(img.size());
    g.orientation.resize(img.size());
    for (std::size_t y = 0; y < img.height; ++y) {
        const long yl = static_cast<long>(y);
        for (std::size_t x = 0; x < img.width; ++x) {
            const long xl = static_cast<long>(x);
            auto p = [&](long dx, long dy) { return img.clamped(xl + dx, yl + dy); };
            const double gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            const double gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            const std::size_t i = y * img.width + x;
            g.magnitude[i] = std::sqrt(gx * gx + gy * gy);
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += std::numbers::pi;
            if (theta >= std::numbers::pi) theta -= std::numbers::pi;
            g.orientation[i] = theta;
        }
    }
    return g;
}

std::array<double, 5> orientation_histogram(const GradientField& grad, const FilletMask& mask) {
    if (grad.width != mask.width || grad.height != mask.height)
        throw std::invalid_argument("mask dimensions do not match gradient maps");
    std::array<double, 5> bins{};
    const double width = std::numbers::pi / 5.0;
    for (std::size_t i = 0; i < grad.magnitude.size(); ++i) {
        if (!mask.mask[i]) continue;
        const auto b = std::min<std::size_t>(4, static_cast<std::size_t>(grad.orientation[i] / width));
        bins[b] += grad.magnitude[i];
    }
    double total = 0.0;
    for (double b : bins) total += b;
    if (total > 0.0)
        for (double& b : bins) b /= total;
    return bins;
}

std::vector<double> gabor_kernel(double orientation_deg, const DescriptorParams& params) {
    const std::size_t n = params.gabor_size;
    const long half = static_cast<long>(n / 2);
    const double theta = orientation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double two_sigma2 = 2.0 * params.gabor_sigma * params.gabor_sigma;
    const double g2 = params.gabor_gamma * params.gabor_gamma;
    std::vector<double> k(n * n);
    double sum = 0.0;
    for (long i = -half; i <= half; ++i)
        for (long j = -half; j <= half; ++j) {
            const double x = static_cast<double>(j), y = static_cast<double>(i);
            const double xr = x * c + y * s;
            const double yr = -x * s + y * c;
            const double v = std::exp(-(xr * xr + g2 * yr * yr) / two_sigma2) *
                             std::cos(2.0 * std::numbers::pi * xr / params.gabor_wavelength + params.gabor_psi);
            k[static_cast<std::size_t>((i + half) * static_cast<long>(n) + (j + half))] = v;
            sum += v;
        }
    const double mean = sum / static_cast<double>(n * n);
    for (double& v : k) v -= mean;
    return k;
}

double gabor_energy(const ImageGray& img, const FilletMask& mask, double orientation_deg,
                    const DescriptorParams& params) {
    require_same_shape(img, mask);
    const auto kernel = gabor_kernel(orientation_deg, params);
    const long n = static_cast<long>(params.gabor_size);
    const long half = n / 2;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            if (!mask.at(x, y)) continue;
            double r = 0.0;
            const double* k = kernel.data();
            for (long i = -half; i <= half; ++i)
                for (long j = -half; j <= half; ++j)
                    r += *k++ * img.clamped(static_cast<long>(x) + j, static_cast<long>(y) + i);
            acc += std::abs(r);
            ++count;
        }
    return count ? acc / static_cast<double>(count) : 0.0;
}

double dense_area_fraction(const ImageGray& img, const FilletMask& mask) {
    require_same_shape(img, mask);
    std::vector<double> inside;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (mask.mask[i]) inside.push_back(img.data[i]);
    if (inside.empty()) return 0.0;
    const OtsuThreshold th = otsu_threshold(inside);
    if (!th.valid()) return 0.0;

    std::vector<char> dense(img.size(), 0);
    for (std::size_t i = 0; i < img.size(); ++i) dense[i] = (mask.mask[i] && !th.above(img.data[i])) ? 1 : 0;
    const auto opened = binary_dilate(binary_erode(dense, img.width, img.height), img.width, img.height);
    std::size_t n = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (opened[i] && mask.mask[i]) ++n;
    return static_cast<double>(n) / static_cast<double>(inside.size());
}

std::vector<double> local_variance(const ImageGray& img, std::size_t window) {
    const long half = static_cast<long>(window / 2);
    std::vector<double> out(img.size());
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out[y * img.width + x] = window_variance(img, static_cast<long>(x), static_cast<long>(y), half);
    return out;
}

FeatureVector extract_descriptors(const ImageGray& img, const FilletMask& mask, const DescriptorParams& params) {
    require_same_shape(img, mask);
    if (mask.count() == 0) throw std::invalid_argument("empty specimen mask");
    FeatureVector f;

    const GradientField grad = sobel_gradients(img, mask);
    const MeanStd gm = masked_mean_std(grad.magnitude, mask);
    f[0] = gm.mean;
    f[1] = gm.std;

    // local variance only where it is consumed
    const long half = static_cast<long>(params.variance_window / 2);
    std::vector<double> lv(img.size(), 0.0);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            if (mask.at(x, y))
                lv[y * img.width + x] = window_variance(img, static_cast<long>(x), static_cast<long>(y), half);
    const MeanStd lvs = masked_mean_std(lv, mask);
    f[2] = lvs.mean;
    f[3] = lvs.std;

    std::size_t edges = 0;
    for (std::size_t i = 0; i < grad.magnitude.size(); ++i)
        if (mask.mask[i] && grad.magnitude[i] > params.edge_threshold) ++edges;
    f[4] = static_cast<double>(edges) / static_cast<double>(mask.count());
    f[5] = static_cast<double>(edges);

    const auto hist = orientation_histogram(grad, mask);
    for (std::size_t b = 0; b < 5; ++b) f[6 + b] = hist[b];

    constexpr std::array<double, 4> orientations{0.0, 45.0, 90.0, 135.0};
    for (std::size_t k = 0; k < orientations.size(); ++k) f[11 + k] = gabor_energy(img, mask, orientations[k], params);

    f[15] = dense_area_fraction(img, mask);
    return f;
}

FeatureVector describe_image(const ImageGray& img, std::size_t max_side) {
    const ImageGray small = downscale_to_max_side(img, max_side);
    const FilletMask mask = segment_fillet(small);
    return extract_descriptors(small, mask);
}

}  // namespace neatboost
