#include "servo/nn/weights_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace servo::nn {

static_assert(std::endian::native == std::endian::little,
              "weights format assumes a little-endian host");
static_assert(sizeof(double) == 8);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            }
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) {
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    if (b.size() - pos < 4) throw IoFailure("truncated weights file");
    std::uint32_t v = b[pos] | (b[pos + 1] << 8) | (b[pos + 2] << 16) |
                      (static_cast<std::uint32_t>(b[pos + 3]) << 24);
    pos += 4;
    return v;
}

struct TaggedParam {
    LayerKind owner;
    const Tensor* value;
};

std::vector<TaggedParam> tagged_params(const Network& network) {
    std::vector<TaggedParam> out;
    for (const auto& layer : network.layers()) {
        for (ParamRef p : const_cast<Layer&>(*layer).params()) {
            out.push_back({p.owner, p.value});
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const Network& network) {
    std::vector<std::uint8_t> out = {'V', 'S', 'N', 'N'};
    const auto params = tagged_params(network);
    put_u32(out, kWeightsFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const TaggedParam& p : params) {
        out.push_back(static_cast<std::uint8_t>(p.owner));
        put_u32(out, static_cast<std::uint32_t>(p.value->rank()));
        for (std::size_t e : p.value->shape()) {
            put_u32(out, static_cast<std::uint32_t>(e));
        }
        const std::size_t off = out.size();
        out.resize(off + p.value->size() * 8);
        std::memcpy(out.data() + off, p.value->data(), p.value->size() * 8);
    }
    put_u32(out, crc32(out.data(), out.size()));
    return out;
}

void decode_weights(Network& network, const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) throw IoFailure("weights file too short");
    const std::uint32_t stored_crc =
        bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
        (bytes[bytes.size() - 2] << 16) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc) {
        throw IoFailure("weights file CRC mismatch");
    }
    if (bytes[0] != 'V' || bytes[1] != 'S' || bytes[2] != 'N' || bytes[3] != 'N') {
        throw IoFailure("bad weights file magic");
    }
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(bytes, pos);
    if (version != kWeightsFormatVersion) {
        throw IoFailure("unsupported weights format version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(bytes, pos);

    auto params = network.params();
    if (count != params.size()) {
        throw ShapeMismatch("weights file parameter count does not match network");
    }
    const std::size_t body_end = bytes.size() - 4;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (pos >= body_end) throw IoFailure("truncated weights file");
        const auto tag = static_cast<LayerKind>(bytes[pos++]);
        if (tag != params[i].owner) {
            throw ShapeMismatch("weights record kind tag does not match network layer");
        }
        const std::uint32_t rank = get_u32(bytes, pos);
        Tensor& value = *params[i].value;
        if (rank != value.rank()) {
            throw ShapeMismatch("weights record rank does not match parameter");
        }
        for (std::size_t d = 0; d < rank; ++d) {
            if (get_u32(bytes, pos) != value.shape()[d]) {
                throw ShapeMismatch("weights record extent does not match parameter");
            }
        }
        const std::size_t payload = value.size() * 8;
        if (body_end - pos < payload) throw IoFailure("truncated weights file");
        std::memcpy(value.data(), bytes.data() + pos, payload);
        pos += payload;
    }
    if (pos != body_end) throw IoFailure("trailing bytes in weights file");
}

void save_weights(const Network& network, const std::string& path) {
    const auto bytes = encode_weights(network);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoFailure("write failed: " + path);
}

void load_weights(Network& network, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    decode_weights(network, bytes);
}

}  // namespace servo::nn
