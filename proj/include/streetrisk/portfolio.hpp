#pragma once

#include <streetrisk/csv.hpp>
#include <streetrisk/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace streetrisk {

/// One insured policy. `model_b_frequency` is the incumbent model's expected
/// claims per unit exposure.
struct PolicyRecord {
    std::string policy_id;
    std::string address_id;
    double exposure = 0.0;
    std::int64_t claim_count = 0;
    double model_b_frequency = 0.0;

    bool operator==(const PolicyRecord&) const = default;
};

struct Rejection {
    std::size_t row = 0; ///< 1-based line number in the source, header is line 1
    std::string reason;

    bool operator==(const Rejection&) const = default;
};

struct PolicyIngest {
    std::vector<PolicyRecord> records;
    std::vector<Rejection> rejections;

    bool operator==(const PolicyIngest&) const = default;
};

inline constexpr const char* kPoliciesHeader = "policy_id,address_id,exposure,claim_count,model_b_frequency";
inline constexpr const char* kAddressesHeader = "address_id,raw_address,status,lat,lon";

namespace detail {

inline void check_header(const std::string& line, const char* expected, const char* file) {
    std::string_view got(line);
    if (!got.empty() && got.back() == '\r') got.remove_suffix(1);
    if (!got.empty() && got.substr(0, 3) == "\xEF\xBB\xBF") got.remove_prefix(3);
    if (got != expected)
        throw InputError(std::string(file) + ": header mismatch, expected '" + expected + "', got '" +
                         std::string(got) + "'");
}

inline std::optional<std::string> validate_policy(const std::vector<std::string>& f, PolicyRecord& rec) {
    if (f.size() != 5) return "wrong field count (" + std::to_string(f.size()) + ")";
    rec.policy_id = f[0];
    rec.address_id = f[1];
    if (rec.policy_id.empty()) return std::string("empty policy_id");
    if (rec.address_id.empty()) return std::string("empty address_id");

    auto exposure = csv::parse_double(f[2]);
    if (!exposure || !std::isfinite(*exposure)) return std::string("invalid exposure");
    if (*exposure <= 0.0) return std::string("nonpositive exposure");
    if (*exposure > 1.0) return std::string("exposure exceeds 1");
    rec.exposure = *exposure;

    auto claims = csv::parse_int(f[3]);
    if (!claims) return std::string("invalid claim_count");
    if (*claims < 0) return std::string("negative claim_count");
    rec.claim_count = *claims;

    if (f[4].empty()) return std::string("missing model_b_frequency");
    auto freq = csv::parse_double(f[4]);
    if (!freq || !std::isfinite(*freq)) return std::string("invalid model_b_frequency");
    if (*freq <= 0.0) return std::string("nonpositive model_b_frequency");
    rec.model_b_frequency = *freq;
    return std::nullopt;
}

} // namespace detail

/// Reads policies.csv. Row-level problems become rejections; only a header
/// mismatch aborts the whole ingest.
inline PolicyIngest ingest_policies(std::istream& in) {
    PolicyIngest out;
    std::string line;
    if (!csv::read_line(in, line)) throw InputError("policies.csv: missing header row");
    detail::check_header(line, kPoliciesHeader, "policies.csv");

    std::unordered_set<std::string> seen;
    std::size_t row = 1;
    while (csv::read_line(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        PolicyRecord rec;
        auto reason = detail::validate_policy(csv::split_line(line), rec);
        if (!reason && !seen.insert(rec.policy_id).second) reason = "duplicate policy_id";
        if (reason)
            out.rejections.push_back({row, *reason});
        else
            out.records.push_back(std::move(rec));
    }
    return out;
}

inline void write_policies(std::ostream& out, std::span<const PolicyRecord> records) {
    out << kPoliciesHeader << '\n';
    for (const auto& r : records) {
        out << csv::escape(r.policy_id) << ',' << csv::escape(r.address_id) << ',' << csv::format_double(r.exposure)
            << ',' << r.claim_count << ',' << csv::format_double(r.model_b_frequency) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Address registry

enum class AddressStatus { unresolved, foreign, resolved };

inline const char* to_string(AddressStatus s) {
    switch (s) {
    case AddressStatus::unresolved: return "unresolved";
    case AddressStatus::foreign: return "foreign";
    case AddressStatus::resolved: return "resolved";
    }
    return "unresolved";
}

inline std::optional<AddressStatus> parse_address_status(std::string_view s) {
    if (s == "unresolved") return AddressStatus::unresolved;
    if (s == "foreign") return AddressStatus::foreign;
    if (s == "resolved") return AddressStatus::resolved;
    return std::nullopt;
}

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
    bool operator==(const LatLon&) const = default;
};

struct AddressEntry {
    std::string address_id;
    std::string raw_address;
    AddressStatus status = AddressStatus::unresolved;
    std::optional<LatLon> location;

    bool operator==(const AddressEntry&) const = default;
    bool included() const { return status == AddressStatus::resolved; }
};

/// Ordered collection of addresses with id lookup. Copyable value type.
class AddressRegistry {
public:
    AddressRegistry() = default;
    explicit AddressRegistry(std::vector<AddressEntry> entries) {
        for (auto& e : entries) add(std::move(e));
    }

    void add(AddressEntry entry) {
        if (entry.status == AddressStatus::resolved && !entry.location)
            throw InputError("address '" + entry.address_id + "' is resolved but has no location");
        auto [it, inserted] = index_.emplace(entry.address_id, entries_.size());
        if (!inserted) throw InputError("duplicate address_id '" + entry.address_id + "'");
        entries_.push_back(std::move(entry));
    }

    const std::vector<AddressEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const AddressEntry* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &entries_[it->second];
    }
    AddressEntry* find(const std::string& id) {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &entries_[it->second];
    }

    std::vector<std::string> included_ids() const {
        std::vector<std::string> ids;
        for (const auto& e : entries_)
            if (e.included()) ids.push_back(e.address_id);
        return ids;
    }

    std::size_t included_count() const {
        return static_cast<std::size_t>(
            std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return e.included(); }));
    }

    bool operator==(const AddressRegistry& other) const { return entries_ == other.entries_; }

private:
    std::vector<AddressEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct AddressIngest {
    AddressRegistry registry;
    std::vector<Rejection> rejections;
};

inline AddressIngest ingest_addresses(std::istream& in) {
    AddressIngest out;
    std::string line;
    if (!csv::read_line(in, line)) throw InputError("addresses.csv: missing header row");
    detail::check_header(line, kAddressesHeader, "addresses.csv");
    std::size_t row = 1;
    while (csv::read_line(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto f = csv::split_line(line);
        auto reject = [&](std::string reason) { out.rejections.push_back({row, std::move(reason)}); };
        if (f.size() != 5) {
            reject("wrong field count (" + std::to_string(f.size()) + ")");
            continue;
        }
        AddressEntry e;
        e.address_id = f[0];
        e.raw_address = f[1];
        if (e.address_id.empty()) {
            reject("empty address_id");
            continue;
        }
        auto status = parse_address_status(f[2]);
        if (!status) {
            reject("unknown status '" + f[2] + "'");
            continue;
        }
        e.status = *status;
        if (!f[3].empty() || !f[4].empty()) {
            auto lat = csv::parse_double(f[3]);
            auto lon = csv::parse_double(f[4]);
            if (!lat || !lon || std::fabs(*lat) > 90.0 || std::fabs(*lon) > 180.0) {
                reject("invalid coordinates");
                continue;
            }
            e.location = LatLon{*lat, *lon};
        }
        if (e.status == AddressStatus::resolved && !e.location) {
            reject("resolved address without coordinates");
            continue;
        }
        if (out.registry.find(e.address_id)) {
            reject("duplicate address_id");
            continue;
        }
        out.registry.add(std::move(e));
    }
    return out;
}

inline void write_addresses(std::ostream& out, const AddressRegistry& registry) {
    out << kAddressesHeader << '\n';
    for (const auto& e : registry.entries()) {
        out << csv::escape(e.address_id) << ',' << csv::escape(e.raw_address) << ',' << to_string(e.status) << ',';
        if (e.location) out << csv::format_double(e.location->lat) << ',' << csv::format_double(e.location->lon);
        else out << ',';
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Exclusion

enum class ExclusionReason { unresolved, foreign };

struct Exclusion {
    std::string address_id;
    ExclusionReason reason = ExclusionReason::unresolved;
};

struct ExclusionReport {
    std::size_t newly_excluded = 0;
    std::size_t foreign = 0;     ///< total foreign after the call
    std::size_t unresolved = 0;  ///< total unresolved after the call
    std::size_t remaining = 0;   ///< included addresses after the call
};

struct ExclusionResult {
    AddressRegistry registry;
    ExclusionReport report;
};

/// Flags addresses as foreign/unresolved. Idempotent and order-independent:
/// when an id is flagged with both reasons, foreign takes precedence.
inline ExclusionResult exclude_addresses(const AddressRegistry& registry, std::span<const Exclusion> flags) {
    std::map<std::string, ExclusionReason> merged;
    for (const auto& f : flags) {
        if (!registry.find(f.address_id)) throw InputError("unknown address_id '" + f.address_id + "'");
        auto [it, inserted] = merged.emplace(f.address_id, f.reason);
        if (!inserted && f.reason == ExclusionReason::foreign) it->second = ExclusionReason::foreign;
    }

    ExclusionResult out{registry, {}};
    for (const auto& [id, reason] : merged) {
        AddressEntry* e = out.registry.find(id);
        AddressStatus target = reason == ExclusionReason::foreign ? AddressStatus::foreign : AddressStatus::unresolved;
        if (e->status == AddressStatus::resolved) {
            ++out.report.newly_excluded;
            e->status = target;
        } else if (target == AddressStatus::foreign) {
            e->status = AddressStatus::foreign;
        }
    }
    for (const auto& e : out.registry.entries()) {
        if (e.status == AddressStatus::foreign) ++out.report.foreign;
        else if (e.status == AddressStatus::unresolved) ++out.report.unresolved;
        else ++out.report.remaining;
    }
    return out;
}

} // namespace streetrisk
