#include "eev/png_io.hpp"

#include <cstring>
#include <fstream>

#include "eev/bitstream.hpp"

namespace eev::png {

namespace {

const std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t adler32(const std::uint8_t* data, std::size_t size) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < size; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::vector<std::uint8_t>& out, const char* type,
                 const std::vector<std::uint8_t>& body) {
    put_u32_be(out, static_cast<std::uint32_t>(body.size()));
    std::vector<std::uint8_t> tagged;
    tagged.insert(tagged.end(), type, type + 4);
    tagged.insert(tagged.end(), body.begin(), body.end());
    out.insert(out.end(), tagged.begin(), tagged.end());
    put_u32_be(out, bitstream::crc32(tagged.data(), tagged.size()));
}

// ---- inflate -----------------------------------------------------------------

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t bits(int count) {
        while (have_ < count) {
            if (pos_ >= size_) throw IoError("png: deflate stream truncated");
            acc_ |= static_cast<std::uint64_t>(data_[pos_++]) << have_;
            have_ += 8;
        }
        const std::uint32_t v = static_cast<std::uint32_t>(acc_ & ((1ull << count) - 1));
        acc_ >>= count;
        have_ -= count;
        return v;
    }

    void align_byte() {
        const int drop = have_ % 8;
        acc_ >>= drop;
        have_ -= drop;
    }

    const std::uint8_t* raw(std::size_t count) {
        if (have_ != 0) throw IoError("png: stored block not byte aligned");
        if (pos_ + count > size_) throw IoError("png: stored block truncated");
        const std::uint8_t* p = data_ + pos_;
        pos_ += count;
        return p;
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::uint64_t acc_ = 0;
    int have_ = 0;
};

// canonical Huffman decoder built from code lengths
struct Huffman {
    std::vector<std::uint32_t> counts;  // per length
    std::vector<std::uint32_t> symbols; // sorted by (length, symbol)

    void build(const std::vector<std::uint8_t>& lengths) {
        counts.assign(16, 0);
        for (auto l : lengths) counts[l]++;
        counts[0] = 0;
        symbols.assign(lengths.size(), 0);
        std::vector<std::uint32_t> offsets(16, 0);
        for (int l = 1; l < 16; ++l) offsets[l] = offsets[l - 1] + counts[l - 1];
        for (std::uint32_t s = 0; s < lengths.size(); ++s)
            if (lengths[s] != 0) symbols[offsets[lengths[s]]++] = s;
    }

    std::uint32_t decode(BitReader& in) const {
        std::int32_t code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= static_cast<std::int32_t>(in.bits(1));
            const std::int32_t count = static_cast<std::int32_t>(counts[len]);
            if (code - first < count) return symbols[index + (code - first)];
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        throw IoError("png: invalid Huffman code");
    }
};

void inflate_block(BitReader& in, std::vector<std::uint8_t>& out, const Huffman& lit,
                   const Huffman& dist) {
    static const std::uint16_t len_base[] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,
                                             15, 17, 19, 23, 27, 31, 35, 43, 51,  59,
                                             67, 83, 99, 115, 131, 163, 195, 227, 258};
    static const std::uint8_t len_extra[] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                             2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
    static const std::uint16_t dist_base[] = {1,    2,    3,    4,    5,    7,     9,    13,
                                              17,   25,   33,   49,   65,   97,    129,  193,
                                              257,  385,  513,  769,  1025, 1537,  2049, 3073,
                                              4097, 6145, 8193, 12289, 16385, 24577};
    static const std::uint8_t dist_extra[] = {0, 0, 0,  0,  1,  1,  2,  2,  3,  3,
                                              4, 4, 5,  5,  6,  6,  7,  7,  8,  8,
                                              9, 9, 10, 10, 11, 11, 12, 12, 13, 13};
    while (true) {
        const std::uint32_t sym = lit.decode(in);
        if (sym < 256) {
            out.push_back(static_cast<std::uint8_t>(sym));
        } else if (sym == 256) {
            return;
        } else {
            const std::uint32_t li = sym - 257;
            if (li >= 29) throw IoError("png: invalid length symbol");
            const std::uint32_t length = len_base[li] + in.bits(len_extra[li]);
            const std::uint32_t ds = dist.decode(in);
            if (ds >= 30) throw IoError("png: invalid distance symbol");
            const std::uint32_t distance = dist_base[ds] + in.bits(dist_extra[ds]);
            if (distance > out.size()) throw IoError("png: distance past window start");
            for (std::uint32_t i = 0; i < length; ++i)
                out.push_back(out[out.size() - distance]);
        }
    }
}

std::vector<std::uint8_t> inflate(const std::uint8_t* data, std::size_t size) {
    if (size < 2) throw IoError("png: zlib stream too short");
    if ((data[0] & 0x0F) != 8) throw IoError("png: unsupported zlib method");
    BitReader in(data + 2, size - 2 - 4); // skip zlib header, stop before adler
    std::vector<std::uint8_t> out;

    Huffman fixed_lit, fixed_dist;
    {
        std::vector<std::uint8_t> ll(288);
        for (int i = 0; i < 144; ++i) ll[i] = 8;
        for (int i = 144; i < 256; ++i) ll[i] = 9;
        for (int i = 256; i < 280; ++i) ll[i] = 7;
        for (int i = 280; i < 288; ++i) ll[i] = 8;
        fixed_lit.build(ll);
        fixed_dist.build(std::vector<std::uint8_t>(30, 5));
    }

    bool final_block = false;
    while (!final_block) {
        final_block = in.bits(1) != 0;
        const std::uint32_t btype = in.bits(2);
        if (btype == 0) {
            in.align_byte();
            const std::uint8_t* p = in.raw(4);
            const std::uint32_t len = p[0] | (p[1] << 8);
            const std::uint32_t nlen = p[2] | (p[3] << 8);
            if ((len ^ 0xFFFF) != nlen) throw IoError("png: stored block length mismatch");
            const std::uint8_t* body = in.raw(len);
            out.insert(out.end(), body, body + len);
        } else if (btype == 1) {
            inflate_block(in, out, fixed_lit, fixed_dist);
        } else if (btype == 2) {
            static const int order[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5,
                                          11, 4, 12, 3, 13, 2, 14, 1, 15};
            const std::uint32_t hlit = in.bits(5) + 257;
            const std::uint32_t hdist = in.bits(5) + 1;
            const std::uint32_t hclen = in.bits(4) + 4;
            std::vector<std::uint8_t> clen(19, 0);
            for (std::uint32_t i = 0; i < hclen; ++i)
                clen[order[i]] = static_cast<std::uint8_t>(in.bits(3));
            Huffman cl;
            cl.build(clen);
            std::vector<std::uint8_t> lengths;
            while (lengths.size() < hlit + hdist) {
                const std::uint32_t sym = cl.decode(in);
                if (sym < 16) {
                    lengths.push_back(static_cast<std::uint8_t>(sym));
                } else if (sym == 16) {
                    if (lengths.empty()) throw IoError("png: repeat with no previous length");
                    const std::uint32_t n = 3 + in.bits(2);
                    lengths.insert(lengths.end(), n, lengths.back());
                } else if (sym == 17) {
                    lengths.insert(lengths.end(), 3 + in.bits(3), 0);
                } else {
                    lengths.insert(lengths.end(), 11 + in.bits(7), 0);
                }
            }
            if (lengths.size() != hlit + hdist) throw IoError("png: code length overflow");
            Huffman lit, dist;
            lit.build(std::vector<std::uint8_t>(lengths.begin(), lengths.begin() + hlit));
            dist.build(std::vector<std::uint8_t>(lengths.begin() + hlit, lengths.end()));
            inflate_block(in, out, lit, dist);
        } else {
            throw IoError("png: reserved deflate block type");
        }
    }
    const std::uint32_t stored_adler =
        (static_cast<std::uint32_t>(data[size - 4]) << 24) |
        (static_cast<std::uint32_t>(data[size - 3]) << 16) |
        (static_cast<std::uint32_t>(data[size - 2]) << 8) |
        static_cast<std::uint32_t>(data[size - 1]);
    if (adler32(out.data(), out.size()) != stored_adler)
        throw IoError("png: zlib adler32 mismatch");
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image8& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != image.pixel_count() * 3)
        throw IoError("encode_png: malformed image");

    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);

    // filter byte 0 per row
    std::vector<std::uint8_t> raw;
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), image.rgb.begin() + y * stride, image.rgb.begin() + (y + 1) * stride);
    }

    // zlib with stored deflate blocks
    std::vector<std::uint8_t> idat = {0x78, 0x01};
    std::size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - off);
        const bool last = off + len == raw.size();
        idat.push_back(last ? 1 : 0);
        idat.push_back(static_cast<std::uint8_t>(len & 0xFF));
        idat.push_back(static_cast<std::uint8_t>(len >> 8));
        idat.push_back(static_cast<std::uint8_t>(~len & 0xFF));
        idat.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
        idat.insert(idat.end(), raw.begin() + off, raw.begin() + off + len);
        off += len;
        if (last) break;
    }
    put_u32_be(idat, adler32(raw.data(), raw.size()));
    write_chunk(out, "IDAT", idat);
    write_chunk(out, "IEND", {});
    return out;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw IoError("decode_png: not a PNG file");

    Image8 image;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_end = false;
    while (pos + 8 <= bytes.size() && !saw_end) {
        const std::uint32_t len = (static_cast<std::uint32_t>(bytes[pos]) << 24) |
                                  (static_cast<std::uint32_t>(bytes[pos + 1]) << 16) |
                                  (static_cast<std::uint32_t>(bytes[pos + 2]) << 8) |
                                  static_cast<std::uint32_t>(bytes[pos + 3]);
        if (pos + 12 + len > bytes.size()) throw IoError("decode_png: chunk overruns file");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* body = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            image.width = static_cast<int>((body[0] << 24) | (body[1] << 16) | (body[2] << 8) | body[3]);
            image.height = static_cast<int>((body[4] << 24) | (body[5] << 16) | (body[6] << 8) | body[7]);
            bit_depth = body[8];
            color_type = body[9];
            interlace = body[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), body, body + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_end = true;
        }
        pos += 12 + len;
    }
    if (image.width <= 0 || image.height <= 0) throw IoError("decode_png: missing IHDR");
    if (bit_depth != 8) throw IoError("decode_png: only 8-bit images supported");
    if (interlace != 0) throw IoError("decode_png: interlaced images unsupported");
    int channels;
    switch (color_type) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default: throw IoError("decode_png: palette images unsupported");
    }

    auto raw = inflate(idat.data(), idat.size());
    const std::size_t stride = static_cast<std::size_t>(image.width) * channels;
    if (raw.size() != (stride + 1) * image.height)
        throw IoError("decode_png: decompressed size mismatch");

    // undo per-row filters in place
    std::vector<std::uint8_t> pixels(stride * image.height);
    for (int y = 0; y < image.height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = raw.data() + (stride + 1) * y + 1;
        std::uint8_t* dst = pixels.data() + stride * y;
        const std::uint8_t* up = y > 0 ? pixels.data() + stride * (y - 1) : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<std::size_t>(channels)) ? up[i - channels] : 0;
            int v = src[i];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += paeth(a, b, c); break;
            default: throw IoError("decode_png: unknown filter " + std::to_string(filter));
            }
            dst[i] = static_cast<std::uint8_t>(v);
        }
    }

    image.rgb.resize(image.pixel_count() * 3);
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        const std::uint8_t* px = pixels.data() + p * channels;
        switch (color_type) {
        case 0: image.rgb[p * 3] = image.rgb[p * 3 + 1] = image.rgb[p * 3 + 2] = px[0]; break;
        case 2: std::copy_n(px, 3, image.rgb.begin() + p * 3); break;
        case 4: image.rgb[p * 3] = image.rgb[p * 3 + 1] = image.rgb[p * 3 + 2] = px[0]; break;
        case 6: std::copy_n(px, 3, image.rgb.begin() + p * 3); break;
        }
    }
    return image;
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

} // namespace

void write_png_file(const std::string& path, const Image8& image) {
    write_file(path, encode_png(image));
}

Image8 read_png_file(const std::string& path) { return decode_png(read_file(path)); }

std::vector<std::uint8_t> encode_ppm(const Image8& image) {
    const std::string header =
        "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.rgb.begin(), image.rgb.end());
    return out;
}

Image8 decode_ppm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
        return t;
    };
    if (token() != "P6") throw IoError("decode_ppm: not a P6 file");
    Image8 image;
    image.width = std::stoi(token());
    image.height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (maxval != 255) throw IoError("decode_ppm: only 8-bit PPM supported");
    ++pos; // single whitespace after maxval
    const std::size_t need = image.pixel_count() * 3;
    if (bytes.size() - pos < need)
        throw IoError("decode_ppm: expected " + std::to_string(need) + " pixel bytes, found " +
                      std::to_string(bytes.size() - pos));
    image.rgb.assign(bytes.begin() + pos, bytes.begin() + pos + need);
    return image;
}

void write_ppm_file(const std::string& path, const Image8& image) {
    write_file(path, encode_ppm(image));
}

Image8 read_ppm_file(const std::string& path) { return decode_ppm(read_file(path)); }

} // namespace eev::png
