#pragma once

// Byte-exact serialized video container and the weight container it shares
// plumbing with. Little-endian throughout; a CRC32 (IEEE polynomial) over all
// preceding bytes closes each file.

#include <cstdint>
#include <string>
#include <vector>

#include "eev/common.hpp"

namespace eev::bitstream {

std::uint32_t crc32(const std::uint8_t* data, std::size_t size, std::uint32_t seed = 0);
inline std::uint32_t crc32(const std::vector<std::uint8_t>& data) {
    return crc32(data.data(), data.size());
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v);
    void bytes(const std::uint8_t* data, std::size_t size);
    void bytes(const std::vector<std::uint8_t>& data) { bytes(data.data(), data.size()); }
    void str(const std::string& s); // u16 length + raw bytes

    const std::vector<std::uint8_t>& data() const { return out_; }
    std::vector<std::uint8_t> take() { return std::move(out_); }
    std::size_t size() const { return out_.size(); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::vector<std::uint8_t>& data)
        : data_(data.data()), size_(data.size()) {}

    std::uint8_t u8(const char* what);
    std::uint16_t u16(const char* what);
    std::uint32_t u32(const char* what);
    std::uint64_t u64(const char* what);
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    float f32(const char* what);
    std::vector<std::uint8_t> bytes(std::size_t count, const char* what);
    std::string str(const char* what);

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }
    bool done() const { return pos_ == size_; }

private:
    void need(std::size_t count, const char* what);

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

enum class FrameType : std::uint8_t { intra = 0, predicted = 1 };

enum class PayloadKind : std::uint8_t {
    intra = 0,
    motion = 1,    // MV latent (EEV-0.1..0.3) or MV-difference latent (EEV-0.4)
    residual = 2,  // first residual stage
    residual_c2f = 3,
};

struct Payload {
    PayloadKind kind;
    std::vector<std::uint8_t> bytes;
};

struct FrameChunk {
    FrameType type = FrameType::intra;
    std::vector<Payload> payloads;

    std::uint64_t payload_bits() const {
        std::uint64_t total = 0;
        for (const auto& p : payloads) total += 8ull * p.bytes.size();
        return total;
    }
};

struct ContainerHeader {
    std::uint16_t version = 1;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t frame_count = 0;
    std::uint16_t gop_size = 16;
    std::uint16_t intra_period = 16;
    std::uint8_t model_id = 0; // 0..3 for EEV-0.1..EEV-0.4
    std::uint8_t metric = 0;   // 0 psnr, 1 msssim
    std::uint32_t lambda_value = 0;
    std::uint32_t weights_crc = 0;
};

extern const char kContainerMagic[4]; // "EEVB"

std::vector<std::uint8_t> write_container(const ContainerHeader& header,
                                          const std::vector<FrameChunk>& chunks);

struct Container {
    ContainerHeader header;
    std::vector<FrameChunk> chunks;
};

// Distinct FormatError messages for bad magic, CRC mismatch, and truncation
// (the truncation message names the chunk being read).
Container read_container(const std::vector<std::uint8_t>& bytes);

} // namespace eev::bitstream
