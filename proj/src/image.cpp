#include "neatboost/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "neatboost/errors.hpp"

namespace neatboost {

double ImageGray::clamped(long x, long y) const {
    x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
    y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
    return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
}

std::size_t FilletMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("unreadable file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

[[noreturn]] void unsupported(const std::filesystem::path& path, const std::string& why) {
    throw DataError("unsupported format: " + path.string() + " (" + why + ")");
}

class PgmCursor {
public:
    explicit PgmCursor(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    // Next header integer, skipping whitespace and '#' comments.
    bool next_int(long& out) {
        for (;;) {
            while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
            if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) return false;
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000'000L) return false;
            ++pos_;
        }
        out = v;
        return true;
    }

    std::size_t pos() const { return pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 2;
};

ImageGray decode_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    const bool ascii = bytes[1] == '2';
    PgmCursor cur(bytes);
    long w = 0, h = 0, maxval = 0;
    if (!cur.next_int(w) || !cur.next_int(h) || !cur.next_int(maxval)) unsupported(path, "truncated PGM header");
    if (w == 0 || h == 0) throw DataError("zero-dimension image: " + path.string());
    if (maxval < 1 || maxval > 65535) unsupported(path, "PGM maxval out of range");

    ImageGray img(static_cast<std::size_t>(w), static_cast<std::size_t>(h), 0.0, maxval > 255 ? 16 : 8);
    const double scale = static_cast<double>(maxval);
    if (ascii) {
        for (auto& v : img.data) {
            long raw = 0;
            if (!cur.next_int(raw)) unsupported(path, "truncated PGM raster");
            if (raw > maxval) unsupported(path, "PGM sample exceeds maxval");
            v = static_cast<double>(raw) / scale;
        }
        return img;
    }
    // single whitespace byte separates the header from the raster
    if (cur.pos() >= bytes.size() || !std::isspace(bytes[cur.pos()])) unsupported(path, "truncated PGM header");
    cur.skip(1);
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (bytes.size() - cur.pos() < img.size() * bps) unsupported(path, "truncated PGM raster");
    const unsigned char* p = bytes.data() + cur.pos();
    for (std::size_t i = 0; i < img.size(); ++i) {
        long raw = bps == 2 ? (static_cast<long>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
        if (raw > maxval) unsupported(path, "PGM sample exceeds maxval");
        img.data[i] = static_cast<double>(raw) / scale;
    }
    return img;
}

struct PngReadState {
    const std::vector<unsigned char>* bytes;
    std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + n > st->bytes->size()) png_error(png, "truncated PNG");
    std::memcpy(out, st->bytes->data() + st->pos, n);
    st->pos += n;
}

ImageGray decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng initialisation failed");
    }
    PngReadState state{&bytes, 0};
    ImageGray img;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raster;
    std::string error;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        unsupported(path, "corrupt PNG stream");
    }
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        error = "PNG is not grayscale";
    } else if (w == 0 || h == 0) {
        error = "zero-dimension";
    } else {
        if (depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
            depth = 8;
        }
        if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        raster.resize(stride * h);
        rows.resize(h);
        for (png_uint_32 y = 0; y < h; ++y) rows[y] = raster.data() + y * stride;
        png_read_image(png, rows.data());

        img = ImageGray(w, h, 0.0, depth);
        const double scale = depth == 16 ? 65535.0 : 255.0;
        for (png_uint_32 y = 0; y < h; ++y) {
            const unsigned char* r = rows[y];
            for (png_uint_32 x = 0; x < w; ++x) {
                const unsigned raw = depth == 16 ? (static_cast<unsigned>(r[2 * x]) << 8) | r[2 * x + 1] : r[x];
                img.at(x, y) = raw / scale;
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (error == "zero-dimension") throw DataError("zero-dimension image: " + path.string());
    if (!error.empty()) unsupported(path, error);
    return img;
}

}  // namespace

ImageGray load_grayscale(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    static constexpr std::array<unsigned char, 8> png_sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin())) return decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) return decode_pgm(bytes, path);
    unsupported(path, "not a PGM or PNG file");
}

void write_pgm(const std::filesystem::path& path, const ImageGray& img, int maxval) {
    if (maxval != 255 && maxval != 65535) throw std::invalid_argument("write_pgm: maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
    for (double v : img.data) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (maxval > 255) out.put(static_cast<char>(q >> 8));
        out.put(static_cast<char>(q & 0xff));
    }
}

ImageGray downscale_to_max_side(const ImageGray& img, std::size_t max_side) {
    const std::size_t longer = std::max(img.width, img.height);
    if (longer <= max_side) return img;
    const double factor = static_cast<double>(longer) / static_cast<double>(max_side);
    const auto out_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.width / factor)));
    const auto out_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.height / factor)));
    const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
    const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);

    ImageGray out(out_w, out_h, 0.0, img.bit_depth);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            double acc = 0.0, area = 0.0;
            for (auto y = static_cast<std::size_t>(y0); y < img.height && static_cast<double>(y) < y1; ++y) {
                const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                if (wy <= 0) continue;
                for (auto x = static_cast<std::size_t>(x0); x < img.width && static_cast<double>(x) < x1; ++x) {
                    const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    if (wx <= 0) continue;
                    acc += wx * wy * img.at(x, y);
                    area += wx * wy;
                }
            }
            out.at(ox, oy) = area > 0 ? std::clamp(acc / area, 0.0, 1.0) : 0.0;
        }
    }
    return out;
}

int OtsuThreshold::bin_of(double v) const {
    if (!(hi > lo)) return 0;
    const double t = (v - lo) / (hi - lo) * 256.0;
    return std::clamp(static_cast<int>(std::floor(t)), 0, 255);
}

OtsuThreshold otsu_threshold(std::span<const double> values) {
    OtsuThreshold th;
    if (values.empty()) return th;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    th.lo = *mn;
    th.hi = *mx;
    if (!(th.hi > th.lo)) return th;

    std::array<double, 256> hist{};
    for (double v : values) hist[static_cast<std::size_t>(th.bin_of(v))] += 1.0;
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < 256; ++b) sum_all += b * hist[b];

    double w0 = 0.0, sum0 = 0.0;
    for (int k = 0; k < 255; ++k) {
        w0 += hist[k];
        sum0 += k * hist[k];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if (var > th.between_variance) {
            th.between_variance = var;
            th.split_bin = k;
        }
    }
    return th;
}

FilletMask largest_component(const FilletMask& mask) {
    const std::size_t w = mask.width, h = mask.height;
    std::vector<int> label(w * h, -1);
    std::vector<std::size_t> stack;
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    for (std::size_t start = 0; start < w * h; ++start) {
        if (!mask.mask[start] || label[start] >= 0) continue;
        std::size_t size = 0;
        stack.push_back(start);
        label[start] = next;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++size;
            const std::size_t x = p % w, y = p / w;
            auto visit = [&](std::size_t q) {
                if (mask.mask[q] && label[q] < 0) {
                    label[q] = next;
                    stack.push_back(q);
                }
            };
            if (x > 0) visit(p - 1);
            if (x + 1 < w) visit(p + 1);
            if (y > 0) visit(p - w);
            if (y + 1 < h) visit(p + w);
        }
        if (size > best_size) {
            best_size = size;
            best_label = next;
        }
        ++next;
    }
    FilletMask out(w, h);
    for (std::size_t i = 0; i < w * h; ++i) out.mask[i] = (best_label >= 0 && label[i] == best_label) ? 1 : 0;
    return out;
}

FilletMask fill_holes(const FilletMask& mask) {
    const std::size_t w = mask.width, h = mask.height;
    std::vector<char> outside(w * h, 0);
    std::vector<std::size_t> stack;
    auto seed = [&](std::size_t p) {
        if (!mask.mask[p] && !outside[p]) {
            outside[p] = 1;
            stack.push_back(p);
        }
    };
    for (std::size_t x = 0; x < w; ++x) {
        seed(x);
        seed((h - 1) * w + x);
    }
    for (std::size_t y = 0; y < h; ++y) {
        seed(y * w);
        seed(y * w + w - 1);
    }
    while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const std::size_t x = p % w, y = p / w;
        if (x > 0) seed(p - 1);
        if (x + 1 < w) seed(p + 1);
        if (y > 0) seed(p - w);
        if (y + 1 < h) seed(p + w);
    }
    FilletMask out(w, h);
    for (std::size_t i = 0; i < w * h; ++i) out.mask[i] = outside[i] ? 0 : 1;
    return out;
}

FilletMask segment_fillet(const ImageGray& img) {
    if (img.width == 0 || img.height == 0) throw DataError("zero-dimension image");
    const OtsuThreshold th = otsu_threshold(img.data);
    if (!th.valid()) throw DataError("no specimen detected");
    FilletMask raw(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) raw.mask[i] = th.above(img.data[i]) ? 1 : 0;
    FilletMask mask = fill_holes(largest_component(raw));
    if (mask.count() == 0) throw DataError("no specimen detected");
    return mask;
}

}  // namespace neatboost
