#ifndef MVLAB_IMAGE_HPP
#define MVLAB_IMAGE_HPP

#include <string>
#include <vector>

#include "mvlab/data.hpp"

namespace mvlab {

/// Dense HWC image with intensities in [0,1]. One or three channels.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    static Image filled(int height, int width, int channels, double value = 0.0);

    double& at(int y, int x, int c) {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
    double at(int y, int x, int c) const {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }

    void validate() const;
};

bool images_equal(const Image& a, const Image& b);

/// Binary PPM (P6) for 3 channels, PGM (P5) for 1 channel, 8-bit depth.
void save_image(const std::string& path, const Image& img);
Image load_image(const std::string& path);

Image resize_nearest(const Image& img, int height, int width);
Image crop_image(const Image& img, int y0, int x0, int height, int width);

/// Scale/rotate/shift taken about the image center, nearest sampling,
/// edge-clamped; brightness added last and clamped to [0,1].
struct ImageTransform {
    double scale = 1.0;
    double rotate_deg = 0.0;
    double shift_x = 0.0;
    double shift_y = 0.0;
    double brightness = 0.0;
};

Image transform_image(const Image& img, const ImageTransform& tf);

/// Toy patchifier: nearest-resamples each frame to the latent grid and maps
/// intensities [0,1] to [-1,1]. Latent channel c reads image channel
/// c mod channels.
LatentVideo encode_frames(const std::vector<Image>& frames, const LatentGrid& grid);
ReferenceLatent encode_reference(const Image& crop, int channels, int height, int width);

/// Linear min-max view of one latent frame for 8-bit dumps. Constant frames
/// map to mid-gray.
Image latent_frame_to_image(const LatentVideo& latent, int t);

}  // namespace mvlab

#endif  // MVLAB_IMAGE_HPP
