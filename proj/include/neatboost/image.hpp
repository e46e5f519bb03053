#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace neatboost {

/// Grayscale image with intensities normalized to [0,1].
struct ImageGray {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> data;  // row-major
    int bit_depth = 8;

    ImageGray() = default;
    ImageGray(std::size_t w, std::size_t h, double fill = 0.0, int bits = 8)
        : width(w), height(h), data(w * h, fill), bit_depth(bits) {}

    double& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

    /// Replicate-padded access.
    double clamped(long x, long y) const;

    std::size_t size() const { return data.size(); }
};

/// Boolean specimen mask, true where the fillet is.
struct FilletMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<char> mask;

    FilletMask() = default;
    FilletMask(std::size_t w, std::size_t h, bool fill = false)
        : width(w), height(h), mask(w * h, fill ? 1 : 0) {}

    bool at(std::size_t x, std::size_t y) const { return mask[y * width + x] != 0; }
    void set(std::size_t x, std::size_t y, bool v) { mask[y * width + x] = v ? 1 : 0; }
    std::size_t count() const;
};

/// Reads a PGM (P2/P5) or 8/16-bit grayscale PNG. Throws DataError on
/// unreadable or unsupported input.
ImageGray load_grayscale(const std::filesystem::path& path);

/// Writes a binary PGM with the given maximum value (255 or 65535).
void write_pgm(const std::filesystem::path& path, const ImageGray& img, int maxval = 255);

/// Area-averaging downscale so that the longer side is at most `max_side`.
/// Images already within bounds are returned unchanged.
ImageGray downscale_to_max_side(const ImageGray& img, std::size_t max_side = 1024);

/// Otsu's threshold over a 256-bin histogram spanning [lo, hi] of the
/// selected samples. `split_bin` is the last bin of the lower class; a value
/// is "above" the threshold when its bin index exceeds it.
struct OtsuThreshold {
    double lo = 0.0;
    double hi = 0.0;
    int split_bin = -1;
    double between_variance = 0.0;

    int bin_of(double v) const;
    bool above(double v) const { return bin_of(v) > split_bin; }
    /// False when the samples are constant or no split separates them.
    bool valid() const { return split_bin >= 0 && between_variance > 0.0; }
};

OtsuThreshold otsu_threshold(std::span<const double> values);

/// Otsu segmentation of the bright (light-transmitting) specimen, keeping
/// the largest 4-connected component with holes filled.
FilletMask segment_fillet(const ImageGray& img);

/// Largest 4-connected component of `mask` (ties go to the first component
/// in raster order).
FilletMask largest_component(const FilletMask& mask);

/// Sets every background pixel that is not 4-connected to the border.
FilletMask fill_holes(const FilletMask& mask);

}  // namespace neatboost
