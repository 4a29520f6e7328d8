#ifndef SERVO_IMAGE_HPP
#define SERVO_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "servo/errors.hpp"

namespace servo {

// Row-major grayscale raster with intensities in [0,1]. The raw camera
// observation fed to both network streams.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // width*height entries, row-major

    ImageBuffer() = default;
    ImageBuffer(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const ImageBuffer& other) const = default;
};

// Quantize to the 8-bit scale used on disk: p -> round(p*255)/255.
// Applied to rendered frames before they reach the network so that live
// episodes see the same intensity grid as PGM-trained models.
ImageBuffer quantize_8bit(const ImageBuffer& img);

// Binary PGM (P5, maxval 255), intensity = round(p*255).
std::vector<std::uint8_t> encode_pgm(const ImageBuffer& img);
ImageBuffer decode_pgm(const std::vector<std::uint8_t>& bytes);

void write_pgm(const ImageBuffer& img, const std::string& path);
ImageBuffer read_pgm(const std::string& path);

}  // namespace servo

#endif
