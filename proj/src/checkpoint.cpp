#include "geomancer/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace geomancer {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = make_crc_table();
    return table;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) c = crc_table()[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void save_checkpoint(const std::string& path, const ParamStore& store) {
    std::vector<unsigned char> payload;
    put_u32(payload, kVersion);
    put_u32(payload, static_cast<std::uint32_t>(store.items.size()));
    for (const auto& [name, tensor] : store.items) {
        put_u32(payload, static_cast<std::uint32_t>(name.size()));
        payload.insert(payload.end(), name.begin(), name.end());
        put_u32(payload, 2);  // rank: all tensors are matrices
        put_u64(payload, static_cast<std::uint64_t>(tensor.rows()));
        put_u64(payload, static_cast<std::uint64_t>(tensor.cols()));
        put_u32(payload, kDtypeF32);
        for (double v : tensor.values()) put_f32(payload, static_cast<float>(v));
    }
    const std::uint32_t crc = crc32(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write("GMNC", 4);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    std::vector<unsigned char> tail;
    put_u32(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "GMNC", 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    const std::size_t payload_len = bytes.size() - 8;
    const std::uint32_t want = crc32(bytes.data() + 4, payload_len);
    std::uint32_t got = 0;
    for (int i = 0; i < 4; ++i) {
        got |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    }
    if (want != got) throw std::runtime_error("checkpoint: CRC mismatch");

    std::vector<unsigned char> payload(bytes.begin() + 4, bytes.end() - 4);
    Reader r{payload};
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    const std::uint32_t count = r.u32();
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
        CheckpointEntry entry;
        const std::uint32_t name_len = r.u32();
        entry.name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        std::uint64_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            entry.dims.push_back(r.u64());
            total *= entry.dims.back();
        }
        const std::uint32_t dtype = r.u32();
        if (dtype != kDtypeF32) throw std::runtime_error("checkpoint: unknown dtype tag");
        entry.values.resize(total);
        for (std::uint64_t i = 0; i < total; ++i) entry.values[i] = static_cast<double>(r.f32());
        entries.push_back(std::move(entry));
    }
    return entries;
}

void apply_checkpoint(ParamStore& store, const std::vector<CheckpointEntry>& entries) {
    for (auto& [name, tensor] : store.items) {
        const CheckpointEntry* found = nullptr;
        for (const auto& e : entries) {
            if (e.name == name) {
                found = &e;
                break;
            }
        }
        if (!found) throw std::runtime_error("checkpoint: missing entry " + name);
        if (found->dims.size() != 2 || found->dims[0] != static_cast<std::uint64_t>(tensor.rows()) ||
            found->dims[1] != static_cast<std::uint64_t>(tensor.cols())) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        }
        auto vals = tensor.values_mut();
        std::copy(found->values.begin(), found->values.end(), vals.begin());
        tensor.round_to_dtype();
    }
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("crc32: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return crc32(bytes.data(), bytes.size());
}

}  // namespace geomancer
