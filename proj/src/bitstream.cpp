#include "eev/bitstream.hpp"

#include <array>
#include <cstring>

namespace eev::bitstream {

const char kContainerMagic[4] = {'E', 'E', 'V', 'B'};

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = make_crc_table();
    return table;
}

} // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size, std::uint32_t seed) {
    const auto& table = crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void ByteWriter::u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
}
void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}
void ByteWriter::bytes(const std::uint8_t* data, std::size_t size) {
    out_.insert(out_.end(), data, data + size);
}
void ByteWriter::str(const std::string& s) {
    if (s.size() > 0xFFFF) throw FormatError("string too long for container");
    u16(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t count, const char* what) {
    if (pos_ + count > size_)
        throw FormatError(std::string("truncated input: reading ") + what + " needs " +
                          std::to_string(count) + " bytes at offset " + std::to_string(pos_) +
                          " but only " + std::to_string(size_ - pos_) + " remain");
}
std::uint8_t ByteReader::u8(const char* what) {
    need(1, what);
    return data_[pos_++];
}
std::uint16_t ByteReader::u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}
std::uint32_t ByteReader::u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}
std::uint64_t ByteReader::u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}
float ByteReader::f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}
std::vector<std::uint8_t> ByteReader::bytes(std::size_t count, const char* what) {
    need(count, what);
    std::vector<std::uint8_t> v(data_ + pos_, data_ + pos_ + count);
    pos_ += count;
    return v;
}
std::string ByteReader::str(const char* what) {
    const std::uint16_t len = u16(what);
    need(len, what);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
}

std::vector<std::uint8_t> write_container(const ContainerHeader& header,
                                          const std::vector<FrameChunk>& chunks) {
    ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>(kContainerMagic), 4);
    w.u16(header.version);
    w.u32(header.width);
    w.u32(header.height);
    w.u32(header.frame_count);
    w.u16(header.gop_size);
    w.u16(header.intra_period);
    w.u8(header.model_id);
    w.u8(header.metric);
    w.u32(header.lambda_value);
    w.u32(header.weights_crc);
    w.u32(static_cast<std::uint32_t>(chunks.size()));
    for (const auto& chunk : chunks) {
        w.u8(static_cast<std::uint8_t>(chunk.type));
        w.u8(static_cast<std::uint8_t>(chunk.payloads.size()));
        for (const auto& payload : chunk.payloads) {
            w.u8(static_cast<std::uint8_t>(payload.kind));
            w.u32(static_cast<std::uint32_t>(payload.bytes.size()));
            w.bytes(payload.bytes);
        }
    }
    const std::uint32_t crc = crc32(w.data().data(), w.size());
    w.u32(crc);
    return w.take();
}

Container read_container(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0)
        throw FormatError("bad magic: not an EEVB bitstream");
    const std::uint32_t stored_crc =
        static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
    const std::uint32_t computed = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != computed)
        throw FormatError("CRC mismatch: stored " + std::to_string(stored_crc) + ", computed " +
                          std::to_string(computed));

    ByteReader r(bytes.data(), bytes.size() - 4);
    r.bytes(4, "magic");
    Container c;
    c.header.version = r.u16("version");
    c.header.width = r.u32("width");
    c.header.height = r.u32("height");
    c.header.frame_count = r.u32("frame count");
    c.header.gop_size = r.u16("gop size");
    c.header.intra_period = r.u16("intra period");
    c.header.model_id = r.u8("model id");
    c.header.metric = r.u8("metric");
    c.header.lambda_value = r.u32("lambda");
    c.header.weights_crc = r.u32("weights crc");
    const std::uint32_t chunk_count = r.u32("chunk count");
    for (std::uint32_t i = 0; i < chunk_count; ++i) {
        const std::string tag = "frame chunk " + std::to_string(i);
        FrameChunk chunk;
        chunk.type = static_cast<FrameType>(r.u8(tag.c_str()));
        const std::uint8_t payload_count = r.u8(tag.c_str());
        for (std::uint8_t p = 0; p < payload_count; ++p) {
            Payload payload;
            payload.kind = static_cast<PayloadKind>(r.u8(tag.c_str()));
            const std::uint32_t len = r.u32(tag.c_str());
            payload.bytes = r.bytes(len, tag.c_str());
            chunk.payloads.push_back(std::move(payload));
        }
        c.chunks.push_back(std::move(chunk));
    }
    if (!r.done())
        throw FormatError("length mismatch: " + std::to_string(r.remaining()) +
                          " unexpected trailing bytes before the CRC");
    return c;
}

} // namespace eev::bitstream
