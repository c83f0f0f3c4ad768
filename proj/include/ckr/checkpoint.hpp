#ifndef CKR_CHECKPOINT_HPP
#define CKR_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ckr {

// Checkpoint container: magic "CKRW", format version, a manifest of
// (kind tag, name, shape) entries, then the payloads as little-endian
// 64-bit floats in manifest order.
struct CheckpointEntry {
    enum Kind : std::uint32_t { Parameter = 0, Buffer = 1, Meta = 2 };
    std::uint32_t kind = Parameter;
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> data;
};

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Lookup helper; throws UsageError when absent.
const CheckpointEntry& checkpoint_find(const std::vector<CheckpointEntry>& entries,
                                       const std::string& name);

}  // namespace ckr

#endif
