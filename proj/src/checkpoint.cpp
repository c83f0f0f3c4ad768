#include "ckr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ckr/util.hpp"

namespace ckr {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    std::uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw UsageError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32(os, e.kind);
        put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(os, static_cast<std::uint32_t>(e.dims.size()));
        std::size_t total = 1;
        for (std::size_t d : e.dims) {
            put_u64(os, d);
            total *= d;
        }
        if (total != e.data.size())
            throw UsageError("checkpoint: entry '" + e.name + "' dims do not match payload size");
    }
    for (const auto& e : entries)
        for (double d : e.data) put_f64(os, d);
    if (!os) throw UsageError("checkpoint: write to '" + path + "' failed");
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw UsageError("checkpoint: '" + path + "' is not a CKRW file");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw UsageError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = get_u32(is);
    std::vector<CheckpointEntry> entries(count);
    for (auto& e : entries) {
        e.kind = get_u32(is);
        const std::uint32_t name_len = get_u32(is);
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        const std::uint32_t ndim = get_u32(is);
        e.dims.resize(ndim);
        std::size_t total = 1;
        for (auto& d : e.dims) {
            d = static_cast<std::size_t>(get_u64(is));
            total *= d;
        }
        e.data.resize(total);
    }
    for (auto& e : entries)
        for (auto& d : e.data) d = get_f64(is);
    if (!is) throw UsageError("checkpoint: '" + path + "' is truncated");
    return entries;
}

const CheckpointEntry& checkpoint_find(const std::vector<CheckpointEntry>& entries,
                                       const std::string& name) {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw UsageError("checkpoint: missing entry '" + name + "'");
}

}  // namespace ckr
