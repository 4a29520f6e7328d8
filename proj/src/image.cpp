#include "servo/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace servo {

ImageBuffer::ImageBuffer(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) {
        throw ConfigError("image dimensions must be positive");
    }
}

namespace {

std::uint8_t to_byte(double p) {
    double v = std::lround(p * 255.0);
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    return static_cast<std::uint8_t>(v);
}

}  // namespace

ImageBuffer quantize_8bit(const ImageBuffer& img) {
    ImageBuffer out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[i] = to_byte(img.pixels[i]) / 255.0;
    }
    return out;
}

std::vector<std::uint8_t> encode_pgm(const ImageBuffer& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw ConfigError("cannot encode malformed image buffer");
    }
    char header[64];
    int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", img.width, img.height);
    std::vector<std::uint8_t> out(header, header + n);
    out.reserve(out.size() + img.pixels.size());
    for (double p : img.pixels) {
        out.push_back(to_byte(p));
    }
    return out;
}

namespace {

// Header tokens may be separated by whitespace and '#' comment lines.
std::size_t next_token(const std::vector<std::uint8_t>& b, std::size_t pos, std::string& tok) {
    tok.clear();
    while (pos < b.size()) {
        char c = static_cast<char>(b[pos]);
        if (c == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    while (pos < b.size()) {
        char c = static_cast<char>(b[pos]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    if (tok.empty()) throw IoFailure("truncated PGM header");
    return pos;
}

int parse_int(const std::string& tok) {
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw IoFailure("bad PGM header token: " + tok);
        return v;
    } catch (const std::exception&) {
        throw IoFailure("bad PGM header token: " + tok);
    }
}

}  // namespace

ImageBuffer decode_pgm(const std::vector<std::uint8_t>& bytes) {
    std::string tok;
    std::size_t pos = next_token(bytes, 0, tok);
    if (tok != "P5") throw IoFailure("not a binary PGM (expected P5 magic)");
    pos = next_token(bytes, pos, tok);
    const int width = parse_int(tok);
    pos = next_token(bytes, pos, tok);
    const int height = parse_int(tok);
    pos = next_token(bytes, pos, tok);
    const int maxval = parse_int(tok);
    if (width <= 0 || height <= 0) throw IoFailure("bad PGM dimensions");
    if (maxval != 255) throw IoFailure("unsupported PGM maxval (expected 255)");
    // Exactly one whitespace byte separates the header from the raster.
    if (pos >= bytes.size()) throw IoFailure("truncated PGM raster");
    ++pos;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    if (bytes.size() - pos < count) throw IoFailure("truncated PGM raster");
    ImageBuffer img(width, height);
    for (std::size_t i = 0; i < count; ++i) {
        img.pixels[i] = bytes[pos + i] / 255.0;
    }
    return img;
}

void write_pgm(const ImageBuffer& img, const std::string& path) {
    const auto bytes = encode_pgm(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoFailure("write failed: " + path);
}

ImageBuffer read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

}  // namespace servo
