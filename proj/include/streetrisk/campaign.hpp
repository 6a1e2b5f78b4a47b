#pragma once

#include <streetrisk/error.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace streetrisk {

enum class BatchPhase { common, disjoint };

inline const char* to_string(BatchPhase p) { return p == BatchPhase::common ? "common" : "disjoint"; }

struct BatchAssignment {
    std::string annotator_id;
    std::vector<std::string> addresses; ///< in serving order
    BatchPhase phase = BatchPhase::common;

    bool operator==(const BatchAssignment&) const = default;
};

/// Two-phase campaign layout: a uniformly random common set of
/// `common_size` addresses shared by every annotator, then the remainder
/// dealt round-robin after shuffling into near-equal disjoint batches.
/// Returns, per annotator in input order, the common batch then the
/// disjoint batch.
inline std::vector<BatchAssignment> assign_batches(const std::vector<std::string>& addresses,
                                                   const std::vector<std::string>& annotator_ids,
                                                   std::size_t common_size, std::uint64_t seed) {
    if (annotator_ids.empty()) throw InputError("assign_batches: at least one annotator required");
    if (common_size > addresses.size())
        throw InputError("assign_batches: common size " + std::to_string(common_size) + " exceeds address count " +
                         std::to_string(addresses.size()));
    {
        auto ids = annotator_ids;
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw InputError("assign_batches: duplicate annotator id");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::string> shuffled = addresses;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    const auto common_end = shuffled.begin() + static_cast<std::ptrdiff_t>(common_size);
    const std::vector<std::string> common(shuffled.begin(), common_end);
    std::vector<std::vector<std::string>> disjoint(annotator_ids.size());
    std::size_t k = 0;
    for (auto it = common_end; it != shuffled.end(); ++it, ++k) disjoint[k % annotator_ids.size()].push_back(*it);

    std::vector<BatchAssignment> out;
    for (std::size_t a = 0; a < annotator_ids.size(); ++a) {
        out.push_back({annotator_ids[a], common, BatchPhase::common});
        out.push_back({annotator_ids[a], std::move(disjoint[a]), BatchPhase::disjoint});
    }
    return out;
}

} // namespace streetrisk
