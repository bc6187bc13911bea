#include "eev/nets.hpp"

#include <cstring>

namespace eev::nets {

// ---- weight store -------------------------------------------------------------------

const char kWeightMagic[4] = {'E', 'E', 'V', 'W'};

void WeightStore::add(const std::string& name, const Shape& shape, std::vector<float> values) {
    if (contains(name)) throw FormatError("weight store: duplicate name \"" + name + "\"");
    if (values.size() != shape.size())
        throw ShapeError("weight store: \"" + name + "\" has " + std::to_string(values.size()) +
                         " values for shape " + shape.str());
    entries_.push_back({name, shape, std::move(values)});
}

bool WeightStore::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const WeightStore::Entry& WeightStore::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw FormatError("weight store: missing name \"" + name + "\"");
}

std::vector<std::uint8_t> WeightStore::serialize() const {
    bitstream::ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>(kWeightMagic), 4);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        w.str(e.name);
        w.u32(static_cast<std::uint32_t>(e.shape.n));
        w.u32(static_cast<std::uint32_t>(e.shape.c));
        w.u32(static_cast<std::uint32_t>(e.shape.h));
        w.u32(static_cast<std::uint32_t>(e.shape.w));
        for (float v : e.values) w.f32(v);
    }
    const std::uint32_t crc = bitstream::crc32(w.data().data(), w.size());
    w.u32(crc);
    return w.take();
}

WeightStore WeightStore::deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0)
        throw FormatError("bad magic: not an EEVW weight container");
    const std::uint32_t stored =
        static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
    const std::uint32_t computed = bitstream::crc32(bytes.data(), bytes.size() - 4);
    if (stored != computed)
        throw FormatError("CRC mismatch in weight container: stored " + std::to_string(stored) +
                          ", computed " + std::to_string(computed));

    bitstream::ByteReader r(bytes.data(), bytes.size() - 4);
    r.bytes(4, "magic");
    const std::uint16_t version = r.u16("version");
    if (version != 1) throw FormatError("unsupported weight container version");
    const std::uint32_t count = r.u32("entry count");
    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str("entry name");
        Shape shape;
        shape.n = static_cast<int>(r.u32("shape"));
        shape.c = static_cast<int>(r.u32("shape"));
        shape.h = static_cast<int>(r.u32("shape"));
        shape.w = static_cast<int>(r.u32("shape"));
        std::vector<float> values(shape.size());
        for (auto& v : values) v = r.f32(name.c_str());
        store.add(name, shape, std::move(values));
    }
    if (!r.done()) throw FormatError("weight container has trailing bytes");
    return store;
}

std::vector<std::uint8_t> save_weights(const NamedParams& params) {
    WeightStore store;
    for (const auto& [name, tensor] : params) store.add(name, tensor->shape, tensor->data);
    return store.serialize();
}

void load_weights(const std::vector<std::uint8_t>& bytes, const NamedParams& params) {
    const WeightStore store = WeightStore::deserialize(bytes);

    std::string missing;
    for (const auto& [name, tensor] : params) {
        (void)tensor;
        if (!store.contains(name)) missing += missing.empty() ? name : (", " + name);
    }
    if (!missing.empty())
        throw FormatError("weight container is missing: " + missing);

    for (const auto& [name, tensor] : params) {
        const auto& entry = store.get(name);
        if (entry.shape != tensor->shape)
            throw ShapeError("weight \"" + name + "\" has shape " + entry.shape.str() +
                             " but the architecture expects " + tensor->shape.str());
        tensor->data = entry.values;
    }

    if (store.size() != params.size()) {
        std::string extra;
        for (const auto& e : store.entries()) {
            bool used = false;
            for (const auto& [name, tensor] : params) {
                (void)tensor;
                if (name == e.name) { used = true; break; }
            }
            if (!used) extra += extra.empty() ? e.name : (", " + e.name);
        }
        throw FormatError("weight container has entries the architecture does not expect: " + extra);
    }
}

std::uint32_t weights_crc(const NamedParams& params) {
    // hash the container body only: including its trailing CRC would collapse
    // every weight set onto the fixed CRC-32 residue
    const auto bytes = save_weights(params);
    return bitstream::crc32(bytes.data(), bytes.size() - 4);
}

} // namespace eev::nets
