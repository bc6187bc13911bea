#include "doctest.h"

#include "eev/bitstream.hpp"

using namespace eev;
using namespace eev::bitstream;

namespace {

Container sample_stream() {
    Container c;
    c.header.width = 64;
    c.header.height = 64;
    c.header.frame_count = 3;
    c.header.model_id = 2;
    c.header.metric = 0;
    c.header.lambda_value = 512;
    c.header.weights_crc = 0xDEADBEEF;

    FrameChunk intra;
    intra.type = FrameType::intra;
    intra.payloads.push_back({PayloadKind::intra, {1, 2, 3, 4, 5}});
    c.chunks.push_back(intra);

    FrameChunk p1;
    p1.type = FrameType::predicted;
    p1.payloads.push_back({PayloadKind::motion, {9, 8}});
    p1.payloads.push_back({PayloadKind::residual, {7, 6, 5}});
    p1.payloads.push_back({PayloadKind::residual_c2f, {0xAA}});
    c.chunks.push_back(p1);

    FrameChunk p2;
    p2.type = FrameType::predicted;
    p2.payloads.push_back({PayloadKind::motion, {}});
    p2.payloads.push_back({PayloadKind::residual, {42}});
    c.chunks.push_back(p2);
    return c;
}

} // namespace

TEST_CASE("crc32 matches the classic check vector") {
    const char* s = "123456789";
    CHECK(crc32(reinterpret_cast<const std::uint8_t*>(s), 9) == 0xCBF43926u);
}

TEST_CASE("container round-trips a 3-frame stream byte-exactly") {
    auto c = sample_stream();
    auto bytes = write_container(c.header, c.chunks);
    auto back = read_container(bytes);
    CHECK(back.header.width == c.header.width);
    CHECK(back.header.height == c.header.height);
    CHECK(back.header.frame_count == c.header.frame_count);
    CHECK(back.header.model_id == c.header.model_id);
    CHECK(back.header.lambda_value == c.header.lambda_value);
    CHECK(back.header.weights_crc == c.header.weights_crc);
    REQUIRE(back.chunks.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.chunks[i].type == c.chunks[i].type);
        REQUIRE(back.chunks[i].payloads.size() == c.chunks[i].payloads.size());
        for (std::size_t p = 0; p < c.chunks[i].payloads.size(); ++p) {
            CHECK(back.chunks[i].payloads[p].kind == c.chunks[i].payloads[p].kind);
            CHECK(back.chunks[i].payloads[p].bytes == c.chunks[i].payloads[p].bytes);
        }
    }
    // writing again reproduces the same bytes
    CHECK(write_container(back.header, back.chunks) == bytes);
}

TEST_CASE("each corrupted byte is caught by the CRC") {
    auto c = sample_stream();
    auto bytes = write_container(c.header, c.chunks);
    for (std::size_t i = 4; i < bytes.size(); i += 7) {
        auto corrupted = bytes;
        corrupted[i] ^= 0x10;
        try {
            read_container(corrupted);
            FAIL("corruption at byte ", i, " not detected");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("CRC") != std::string::npos);
        }
    }
}

TEST_CASE("bad magic is a distinct error") {
    auto bytes = write_container(sample_stream().header, {});
    bytes[0] = 'X';
    try {
        read_container(bytes);
        FAIL("bad magic not detected");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
}

TEST_CASE("declared lengths beyond the file name the offending chunk") {
    // craft a container whose chunk declares more payload bytes than exist,
    // with a valid CRC over the malformed content
    ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>(kContainerMagic), 4);
    w.u16(1);        // version
    w.u32(64);       // width
    w.u32(64);       // height
    w.u32(1);        // frames
    w.u16(16);       // gop
    w.u16(16);       // intra period
    w.u8(0);         // model
    w.u8(0);         // metric
    w.u32(256);      // lambda
    w.u32(0);        // weights crc
    w.u32(1);        // one chunk
    w.u8(0);         // intra
    w.u8(1);         // one payload
    w.u8(0);         // kind
    w.u32(1000);     // declares 1000 bytes...
    w.u8(1);         // ...but provides a single byte
    const std::uint32_t crc = crc32(w.data().data(), w.size());
    w.u32(crc);
    try {
        read_container(w.take());
        FAIL("length mismatch not detected");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("truncated") != std::string::npos);
        CHECK(msg.find("chunk 0") != std::string::npos);
    }
}

TEST_CASE("trailing garbage with a fixed-up CRC is a length mismatch") {
    auto c = sample_stream();
    auto bytes = write_container(c.header, c.chunks);
    bytes.resize(bytes.size() - 4); // strip CRC
    bytes.push_back(0x77);          // junk
    const std::uint32_t crc = crc32(bytes.data(), bytes.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    try {
        read_container(bytes);
        FAIL("trailing bytes not detected");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
    }
}

TEST_CASE("payload_bits sums payload bytes") {
    auto c = sample_stream();
    CHECK(c.chunks[0].payload_bits() == 40);
    CHECK(c.chunks[1].payload_bits() == 8 * (2 + 3 + 1));
}
