#include "mvlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "mvlab/common.hpp"

namespace mvlab {

Image Image::filled(int height, int width, int channels, double value) {
    Image img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(height) * width * channels, value);
    img.validate();
    return img;
}

void Image::validate() const {
    MV_CHECK_ARG(height > 0 && width > 0, "Image: empty dimensions");
    MV_CHECK_ARG(channels == 1 || channels == 3, "Image: channels must be 1 or 3");
    MV_CHECK_ARG(pixels.size() == static_cast<std::size_t>(height) * width * channels,
                 "Image: pixel buffer size mismatch");
}

bool images_equal(const Image& a, const Image& b) {
    return a.height == b.height && a.width == b.width && a.channels == b.channels &&
           a.pixels == b.pixels;
}

namespace {

inline std::uint8_t to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void save_image(const std::string& path, const Image& img) {
    img.validate();
    std::ofstream out(path, std::ios::binary);
    MV_CHECK(out.good(), "cannot open for writing: " + path);
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) bytes[i] = to_byte(img.pixels[i]);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    MV_CHECK(out.good(), "short write: " + path);
}

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    MV_CHECK(in.good(), "cannot open: " + path);
    std::string magic;
    in >> magic;
    MV_CHECK(magic == "P6" || magic == "P5", "unsupported image format in " + path);
    int width = 0, height = 0, maxval = 0;
    in >> width >> height >> maxval;
    MV_CHECK(in.good() && width > 0 && height > 0, "bad image header in " + path);
    MV_CHECK(maxval == 255, "unsupported bit depth in " + path);
    in.get();
    const int channels = magic == "P6" ? 3 : 1;
    Image img = Image::filled(height, width, channels);
    std::vector<std::uint8_t> bytes(img.pixels.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    MV_CHECK(in.gcount() == static_cast<std::streamsize>(bytes.size()),
             "truncated image data in " + path);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
    return img;
}

Image resize_nearest(const Image& img, int height, int width) {
    img.validate();
    MV_CHECK_ARG(height > 0 && width > 0, "resize_nearest: empty target");
    Image out = Image::filled(height, width, img.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(img.height - 1, y * img.height / height);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(img.width - 1, x * img.width / width);
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

Image crop_image(const Image& img, int y0, int x0, int height, int width) {
    img.validate();
    MV_CHECK_ARG(height > 0 && width > 0, "crop_image: empty crop");
    MV_CHECK_ARG(y0 >= 0 && x0 >= 0 && y0 + height <= img.height && x0 + width <= img.width,
                 "crop_image: crop outside image");
    Image out = Image::filled(height, width, img.channels);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

Image transform_image(const Image& img, const ImageTransform& tf) {
    img.validate();
    MV_CHECK_ARG(tf.scale > 0.0, "transform_image: scale must be positive");
    Image out = Image::filled(img.height, img.width, img.channels);
    const double cy = (img.height - 1) / 2.0;
    const double cx = (img.width - 1) / 2.0;
    const double rad = tf.rotate_deg * 3.14159265358979323846 / 180.0;
    const double cosr = std::cos(rad);
    const double sinr = std::sin(rad);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            // Invert shift, then rotation, then scale, sampling the source.
            const double ux = (x - tf.shift_x) - cx;
            const double uy = (y - tf.shift_y) - cy;
            const double rx = cosr * ux + sinr * uy;
            const double ry = -sinr * ux + cosr * uy;
            const double sx = rx / tf.scale + cx;
            const double sy = ry / tf.scale + cy;
            const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, img.width - 1);
            const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, img.height - 1);
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = std::clamp(img.at(iy, ix, c) + tf.brightness, 0.0, 1.0);
            }
        }
    }
    return out;
}

LatentVideo encode_frames(const std::vector<Image>& frames, const LatentGrid& grid) {
    grid.validate();
    MV_CHECK_ARG(static_cast<int>(frames.size()) == grid.temporal_len,
                 "encode_frames: frame count != temporal_len");
    LatentVideo latent;
    latent.grid = grid;
    latent.data.resize(grid.temporal_len * grid.channels * grid.height * grid.width);
    for (int t = 0; t < grid.temporal_len; ++t) {
        const Image small = resize_nearest(frames[static_cast<std::size_t>(t)], grid.height,
                                           grid.width);
        for (int c = 0; c < grid.channels; ++c) {
            const int src_c = c % small.channels;
            for (int h = 0; h < grid.height; ++h)
                for (int w = 0; w < grid.width; ++w)
                    latent.at(t, c, h, w) = 2.0 * small.at(h, w, src_c) - 1.0;
        }
    }
    return latent;
}

ReferenceLatent encode_reference(const Image& crop, int channels, int height, int width) {
    MV_CHECK_ARG(channels >= 1, "encode_reference: channels must be >= 1");
    const Image small = resize_nearest(crop, height, width);
    ReferenceLatent ref;
    ref.channels = channels;
    ref.height = height;
    ref.width = width;
    ref.data.resize(static_cast<Eigen::Index>(channels) * height * width);
    for (int c = 0; c < channels; ++c) {
        const int src_c = c % small.channels;
        for (int h = 0; h < height; ++h)
            for (int w = 0; w < width; ++w) ref.at(c, h, w) = 2.0 * small.at(h, w, src_c) - 1.0;
    }
    return ref;
}

Image latent_frame_to_image(const LatentVideo& latent, int t) {
    latent.validate();
    MV_CHECK_ARG(t >= 0 && t < latent.grid.temporal_len, "latent_frame_to_image: frame index");
    const int channels = latent.grid.channels >= 3 ? 3 : 1;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < latent.grid.channels; ++c)
        for (int h = 0; h < latent.grid.height; ++h)
            for (int w = 0; w < latent.grid.width; ++w) {
                const double v = latent.at(t, c, h, w);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    Image img = Image::filled(latent.grid.height, latent.grid.width, channels, 0.5);
    if (hi - lo < 1e-12) return img;
    const double inv = 1.0 / (hi - lo);
    for (int c = 0; c < channels; ++c)
        for (int h = 0; h < latent.grid.height; ++h)
            for (int w = 0; w < latent.grid.width; ++w)
                img.at(h, w, c) = (latent.at(t, c, h, w) - lo) * inv;
    return img;
}

}  // namespace mvlab
