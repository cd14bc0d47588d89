#include "dsatlas/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"

namespace dsatlas {

namespace detail {

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t n) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

std::vector<std::uint8_t> zlib_compress_stored(const std::vector<std::uint8_t>& raw) {
    std::vector<std::uint8_t> out;
    out.reserve(raw.size() + raw.size() / 65535 * 5 + 16);
    out.push_back(0x78);  // CM=8, CINFO=7
    out.push_back(0x01);  // no dict, fastest
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool final = pos + len == raw.size();
        out.push_back(final ? 1 : 0);  // BFINAL, BTYPE=00
        out.push_back(std::uint8_t(len & 0xFF));
        out.push_back(std::uint8_t(len >> 8));
        out.push_back(std::uint8_t(~len & 0xFF));
        out.push_back(std::uint8_t((~len >> 8) & 0xFF));
        out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + len);
        pos += len;
    } while (pos < raw.size());
    const std::uint32_t ad = adler32(raw.data(), raw.size());
    out.push_back(std::uint8_t(ad >> 24));
    out.push_back(std::uint8_t(ad >> 16));
    out.push_back(std::uint8_t(ad >> 8));
    out.push_back(std::uint8_t(ad));
    return out;
}

namespace {

struct BitReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;  // byte position
    int bit = 0;          // bit position within current byte, LSB first

    std::uint32_t get(int nbits) {
        std::uint32_t v = 0;
        for (int i = 0; i < nbits; ++i) {
            if (pos >= size) throw Error("deflate stream truncated");
            v |= std::uint32_t((data[pos] >> bit) & 1) << i;
            if (++bit == 8) {
                bit = 0;
                ++pos;
            }
        }
        return v;
    }
    void align_byte() {
        if (bit != 0) {
            bit = 0;
            ++pos;
        }
    }
};

// canonical Huffman decoder over code lengths (puff-style)
struct Huffman {
    std::array<int, 16> counts{};
    std::vector<int> symbols;

    void build(const std::vector<int>& lengths) {
        counts.fill(0);
        for (int len : lengths)
            if (len > 0) ++counts[len];
        symbols.clear();
        std::array<int, 16> offsets{};
        int total = 0;
        for (int len = 1; len < 16; ++len) {
            offsets[len] = total;
            total += counts[len];
        }
        symbols.resize(total);
        for (int sym = 0; sym < int(lengths.size()); ++sym)
            if (lengths[sym] > 0) symbols[offsets[lengths[sym]]++] = sym;
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= int(br.get(1));
            const int count = counts[len];
            if (code - first < count) return symbols[index + code - first];
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        throw Error("invalid Huffman code");
    }
};

constexpr int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19, 23, 27,
                              31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                               2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
                               33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
                               1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
constexpr int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<std::uint8_t>& out) {
    for (;;) {
        const int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(std::uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            if (sym > 285) throw Error("invalid length symbol");
            const int li = sym - 257;
            const int length = kLenBase[li] + int(br.get(kLenExtra[li]));
            const int dsym = dist.decode(br);
            if (dsym > 29) throw Error("invalid distance symbol");
            const int distance = kDistBase[dsym] + int(br.get(kDistExtra[dsym]));
            if (std::size_t(distance) > out.size()) throw Error("distance beyond output");
            std::size_t from = out.size() - distance;
            for (int i = 0; i < length; ++i) out.push_back(out[from + i]);
        }
    }
}

std::vector<std::uint8_t> inflate(const std::uint8_t* data, std::size_t n) {
    BitReader br{data, n};
    std::vector<std::uint8_t> out;
    bool final = false;
    while (!final) {
        final = br.get(1) != 0;
        const std::uint32_t btype = br.get(2);
        if (btype == 0) {
            br.align_byte();
            if (br.pos + 4 > br.size) throw Error("deflate stream truncated");
            const unsigned len = data[br.pos] | unsigned(data[br.pos + 1]) << 8;
            const unsigned nlen = data[br.pos + 2] | unsigned(data[br.pos + 3]) << 8;
            if ((len ^ nlen) != 0xFFFF) throw Error("stored block length check failed");
            br.pos += 4;
            if (br.pos + len > br.size) throw Error("deflate stream truncated");
            out.insert(out.end(), data + br.pos, data + br.pos + len);
            br.pos += len;
        } else if (btype == 1) {
            static const auto fixed = [] {
                std::pair<Huffman, Huffman> t;
                std::vector<int> litlen(288);
                for (int i = 0; i < 144; ++i) litlen[i] = 8;
                for (int i = 144; i < 256; ++i) litlen[i] = 9;
                for (int i = 256; i < 280; ++i) litlen[i] = 7;
                for (int i = 280; i < 288; ++i) litlen[i] = 8;
                t.first.build(litlen);
                t.second.build(std::vector<int>(30, 5));
                return t;
            }();
            inflate_block(br, fixed.first, fixed.second, out);
        } else if (btype == 2) {
            const int hlit = int(br.get(5)) + 257;
            const int hdist = int(br.get(5)) + 1;
            const int hclen = int(br.get(4)) + 4;
            static const int order[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                          11, 4,  12, 3, 13, 2, 14, 1, 15};
            std::vector<int> clen(19, 0);
            for (int i = 0; i < hclen; ++i) clen[order[i]] = int(br.get(3));
            Huffman cl;
            cl.build(clen);
            std::vector<int> lengths;
            lengths.reserve(hlit + hdist);
            while (int(lengths.size()) < hlit + hdist) {
                const int sym = cl.decode(br);
                if (sym < 16) {
                    lengths.push_back(sym);
                } else if (sym == 16) {
                    if (lengths.empty()) throw Error("repeat with no previous length");
                    const int count = 3 + int(br.get(2));
                    lengths.insert(lengths.end(), count, lengths.back());
                } else if (sym == 17) {
                    lengths.insert(lengths.end(), 3 + int(br.get(3)), 0);
                } else {
                    lengths.insert(lengths.end(), 11 + int(br.get(7)), 0);
                }
            }
            if (int(lengths.size()) != hlit + hdist) throw Error("bad code length count");
            Huffman lit, dst;
            lit.build(std::vector<int>(lengths.begin(), lengths.begin() + hlit));
            dst.build(std::vector<int>(lengths.begin() + hlit, lengths.end()));
            inflate_block(br, lit, dst, out);
        } else {
            throw Error("invalid deflate block type");
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& stream) {
    if (stream.size() < 6) throw Error("zlib stream too short");
    const unsigned cmf = stream[0], flg = stream[1];
    if ((cmf & 0x0F) != 8) throw Error("unsupported zlib compression method");
    if ((cmf * 256 + flg) % 31 != 0) throw Error("bad zlib header check");
    if (flg & 0x20) throw Error("preset dictionary not supported");
    auto out = inflate(stream.data() + 2, stream.size() - 6);
    const std::uint32_t expect = std::uint32_t(stream[stream.size() - 4]) << 24 |
                                 std::uint32_t(stream[stream.size() - 3]) << 16 |
                                 std::uint32_t(stream[stream.size() - 2]) << 8 |
                                 std::uint32_t(stream[stream.size() - 1]);
    if (adler32(out.data(), out.size()) != expect) throw Error("zlib checksum mismatch");
    return out;
}

}  // namespace detail

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32_be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(std::uint8_t(x >> 24));
    v.push_back(std::uint8_t(x >> 16));
    v.push_back(std::uint8_t(x >> 8));
    v.push_back(std::uint8_t(x));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_u32_be(out, std::uint32_t(payload.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32_be(out, detail::crc32(body.data(), body.size()));
}

std::vector<std::uint8_t> make_ihdr(int w, int h, int bit_depth, int color_type) {
    std::vector<std::uint8_t> p;
    put_u32_be(p, std::uint32_t(w));
    put_u32_be(p, std::uint32_t(h));
    p.push_back(std::uint8_t(bit_depth));
    p.push_back(std::uint8_t(color_type));
    p.push_back(0);  // compression
    p.push_back(0);  // filter
    p.push_back(0);  // interlace
    return p;
}

void write_png(const std::string& path, int w, int h, int bit_depth, int color_type,
               const std::vector<std::uint8_t>& raw_scanlines,
               const std::vector<std::array<std::uint8_t, 3>>* palette = nullptr) {
    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    append_chunk(out, "IHDR", make_ihdr(w, h, bit_depth, color_type));
    if (palette) {
        std::vector<std::uint8_t> p;
        for (const auto& rgb : *palette) p.insert(p.end(), rgb.begin(), rgb.end());
        append_chunk(out, "PLTE", p);
    }
    append_chunk(out, "IDAT", detail::zlib_compress_stored(raw_scanlines));
    append_chunk(out, "IEND", {});
    atomic_write_file(path, out);
}

struct PngFile {
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> pixels;  // defiltered scanline bytes
    std::vector<std::array<std::uint8_t, 3>> palette;
};

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

PngFile read_png(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw Error("not a PNG file: " + path);
    PngFile png;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 12 <= bytes.size() && !seen_iend) {
        const std::uint32_t len = std::uint32_t(bytes[pos]) << 24 | std::uint32_t(bytes[pos + 1]) << 16 |
                                  std::uint32_t(bytes[pos + 2]) << 8 | bytes[pos + 3];
        if (pos + 12 + len > bytes.size()) throw Error("truncated PNG chunk: " + path);
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        const std::uint32_t crc = std::uint32_t(bytes[pos + 8 + len]) << 24 |
                                  std::uint32_t(bytes[pos + 9 + len]) << 16 |
                                  std::uint32_t(bytes[pos + 10 + len]) << 8 | bytes[pos + 11 + len];
        if (detail::crc32(bytes.data() + pos + 4, len + 4) != crc)
            throw Error("PNG chunk CRC mismatch: " + path);
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw Error("bad IHDR: " + path);
            png.width = int(std::uint32_t(payload[0]) << 24 | payload[1] << 16 | payload[2] << 8 | payload[3]);
            png.height = int(std::uint32_t(payload[4]) << 24 | payload[5] << 16 | payload[6] << 8 | payload[7]);
            png.bit_depth = payload[8];
            png.color_type = payload[9];
            if (payload[10] != 0 || payload[11] != 0) throw Error("unsupported PNG compression/filter");
            if (payload[12] != 0) throw Error("interlaced PNG not supported: " + path);
            seen_ihdr = true;
        } else if (std::memcmp(type, "PLTE", 4) == 0) {
            if (len % 3 != 0) throw Error("bad PLTE: " + path);
            for (std::uint32_t i = 0; i < len; i += 3)
                png.palette.push_back({payload[i], payload[i + 1], payload[i + 2]});
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr) throw Error("PNG missing IHDR: " + path);
    if (png.width <= 0 || png.height <= 0) throw Error("bad PNG dimensions: " + path);

    int channels = 0;
    switch (png.color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 3: channels = 1; break;
        default: throw Error("unsupported PNG color type: " + path);
    }
    if (png.bit_depth != 8 && png.bit_depth != 16)
        throw Error("unsupported PNG bit depth (need 8 or 16): " + path);
    if (png.color_type == 3 && png.bit_depth != 8)
        throw Error("indexed PNG must be 8-bit: " + path);

    const auto raw = detail::zlib_decompress(idat);
    const std::size_t bpp = std::size_t(channels) * png.bit_depth / 8;
    const std::size_t stride = std::size_t(png.width) * bpp;
    if (raw.size() != (stride + 1) * png.height) throw Error("PNG pixel data size mismatch: " + path);

    png.pixels.assign(stride * png.height, 0);
    std::vector<std::uint8_t> prev(stride, 0);
    for (int y = 0; y < png.height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = raw.data() + (stride + 1) * y + 1;
        std::uint8_t* dst = png.pixels.data() + stride * y;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= bpp ? dst[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= bpp ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw Error("bad PNG filter type: " + path);
            }
            dst[i] = std::uint8_t(v);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return png;
}

}  // namespace

GrayImage read_png_gray(const std::string& path) {
    const PngFile png = read_png(path);
    if (png.color_type != 0) throw Error("non-grayscale PNG: " + path);
    GrayImage img(png.width, png.height);
    if (png.bit_depth == 8) {
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = png.pixels[i] / 255.f;
    } else {
        for (std::size_t i = 0; i < img.size(); ++i) {
            const unsigned v = unsigned(png.pixels[2 * i]) << 8 | png.pixels[2 * i + 1];
            img.data[i] = float(v) / 65535.f;
        }
    }
    return img;
}

void write_png_gray(const GrayImage& img, const std::string& path) {
    img.validate();
    const std::size_t stride = std::size_t(img.width) * 2;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = raw.data() + (stride + 1) * y;
        row[0] = 0;
        for (int x = 0; x < img.width; ++x) {
            const float v = std::min(std::max(img.at(x, y), 0.f), 1.f);
            const unsigned q = unsigned(std::lround(v * 65535.0f));
            row[1 + 2 * x] = std::uint8_t(q >> 8);
            row[2 + 2 * x] = std::uint8_t(q & 0xFF);
        }
    }
    write_png(path, img.width, img.height, 16, 0, raw);
}

IndexedImage read_png_indexed(const std::string& path) {
    const PngFile png = read_png(path);
    if (png.color_type != 3) throw Error("not an indexed PNG: " + path);
    if (png.palette.empty()) throw Error("indexed PNG missing PLTE: " + path);
    IndexedImage img;
    img.width = png.width;
    img.height = png.height;
    img.indices = png.pixels;
    img.palette = png.palette;
    for (std::uint8_t i : img.indices)
        if (i >= img.palette.size()) throw Error("palette index out of range: " + path);
    return img;
}

void write_png_indexed(const IndexedImage& img, const std::string& path) {
    if (img.indices.size() != std::size_t(img.width) * img.height)
        throw Error("indexed image size mismatch");
    if (img.palette.empty() || img.palette.size() > 256) throw Error("palette must have 1..256 entries");
    for (std::uint8_t i : img.indices)
        if (i >= img.palette.size()) throw Error("palette index out of range");
    const std::size_t stride = std::size_t(img.width);
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[(stride + 1) * y] = 0;
        std::memcpy(raw.data() + (stride + 1) * y + 1, img.indices.data() + stride * y, stride);
    }
    write_png(path, img.width, img.height, 8, 3, raw, &img.palette);
}

void write_png_rgb(int width, int height, const std::vector<std::uint8_t>& rgb,
                   const std::string& path) {
    if (rgb.size() != std::size_t(width) * height * 3) throw Error("rgb buffer size mismatch");
    const std::size_t stride = std::size_t(width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw[(stride + 1) * y] = 0;
        std::memcpy(raw.data() + (stride + 1) * y + 1, rgb.data() + stride * y, stride);
    }
    write_png(path, width, height, 8, 2, raw);
}

}  // namespace dsatlas
