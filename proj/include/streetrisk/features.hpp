#pragma once

#include <streetrisk/annotation.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/schema.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace streetrisk {

/// Binary modeling covariates for one address, plus the raw (calibrated)
/// ordinals of excluded variables for exploratory use.
struct FeatureVector {
    std::string address_id;
    std::vector<int> indicators;      ///< aligned with FeatureTable::names
    std::vector<double> raw_ordinals; ///< aligned with FeatureTable::raw_names

    bool operator==(const FeatureVector&) const = default;
};

struct FeatureTable {
    std::vector<std::string> names;     ///< retained (simplified) variables
    std::vector<std::string> raw_names; ///< excluded ordinal variables
    std::map<std::string, double> thresholds; ///< effective ordinal thresholds
    std::vector<FeatureVector> rows;          ///< sorted by address_id

    const FeatureVector* find(const std::string& address_id) const {
        auto it = std::lower_bound(rows.begin(), rows.end(), address_id,
                                   [](const FeatureVector& f, const std::string& id) { return f.address_id < id; });
        return it != rows.end() && it->address_id == address_id ? &*it : nullptr;
    }

    bool operator==(const FeatureTable&) const = default;
};

namespace detail {

/// Lower median of a nonempty sample (the middle order statistic, the lower
/// one for even sizes), so the threshold is always an observed value.
inline double median(std::vector<double> xs) {
    assert(!xs.empty());
    auto mid = xs.begin() + static_cast<std::ptrdiff_t>((xs.size() - 1) / 2);
    std::nth_element(xs.begin(), mid, xs.end());
    return *mid;
}

inline int map_code(const VariableSpec& v, const std::string& code) {
    const auto& s = v.simplification;
    if (std::find(s.positive_codes.begin(), s.positive_codes.end(), code) != s.positive_codes.end()) return 1;
    bool negative = s.negative_codes
                        ? std::find(s.negative_codes->begin(), s.negative_codes->end(), code) != s.negative_codes->end()
                        : v.has_code(code);
    if (!negative) throw InputError("variable '" + v.name + "': unmapped category code '" + code + "'");
    return 0;
}

} // namespace detail

/// Collapses calibrated annotations into one binary feature vector per
/// address.
///
/// Addresses rated by several annotators are combined first: ordinals by
/// the mean of calibrated values, single-choice codes by majority (ties go to
/// the earlier schema code), multi-choice codes kept when selected by more
/// than half of the raters (the most frequent code if that leaves the set
/// empty). Ordinal indicators are `value > threshold`; a missing threshold
/// resolves to the median of the combined per-address values.
inline FeatureTable simplify_features(std::span<const AnnotationRecord> records, const AnnotationSchema& schema) {
    FeatureTable table;
    std::vector<std::size_t> retained, raw;
    for (std::size_t vi = 0; vi < schema.variables.size(); ++vi) {
        const auto& v = schema.variables[vi];
        if (v.retained()) {
            retained.push_back(vi);
            table.names.push_back(v.name);
        } else if (v.kind == VariableKind::ordinal) {
            raw.push_back(vi);
            table.raw_names.push_back(v.name);
        }
    }

    std::map<std::string, std::vector<const AnnotationRecord*>> by_address;
    for (const auto& r : records) by_address[r.address_id].push_back(&r);

    // Combined per-address values, one slot per schema variable.
    struct Combined {
        std::string address_id;
        std::vector<AnnotationValue> values;
    };
    std::vector<Combined> combined;
    combined.reserve(by_address.size());
    for (const auto& [address, group] : by_address) {
        Combined c{address, {}};
        for (std::size_t vi = 0; vi < schema.variables.size(); ++vi) {
            const auto& v = schema.variables[vi];
            if (group.size() == 1) {
                c.values.push_back(group.front()->values[vi]);
                continue;
            }
            switch (v.kind) {
            case VariableKind::ordinal: {
                double sum = 0.0;
                for (const auto* r : group) sum += r->ordinal(vi);
                c.values.emplace_back(sum / static_cast<double>(group.size()));
                break;
            }
            case VariableKind::single_choice: {
                std::vector<int> votes(v.codes.size(), 0);
                for (const auto* r : group) {
                    int idx = v.code_index(r->code(vi));
                    if (idx < 0) throw InputError("variable '" + v.name + "': unmapped category code '" + r->code(vi) + "'");
                    ++votes[static_cast<std::size_t>(idx)];
                }
                auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
                c.values.emplace_back(v.codes[static_cast<std::size_t>(best)]);
                break;
            }
            case VariableKind::multi_choice: {
                std::vector<int> votes(v.codes.size(), 0);
                for (const auto* r : group)
                    for (const auto& code : r->codes(vi)) {
                        int idx = v.code_index(code);
                        if (idx < 0) throw InputError("variable '" + v.name + "': unmapped category code '" + code + "'");
                        ++votes[static_cast<std::size_t>(idx)];
                    }
                std::vector<std::string> chosen;
                for (std::size_t k = 0; k < votes.size(); ++k)
                    if (2 * static_cast<std::size_t>(votes[k]) > group.size()) chosen.push_back(v.codes[k]);
                if (chosen.empty())
                    chosen.push_back(v.codes[static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) -
                                                                      votes.begin())]);
                c.values.emplace_back(std::move(chosen));
                break;
            }
            }
        }
        combined.push_back(std::move(c));
    }

    // Resolve ordinal thresholds.
    std::vector<double> thresholds(schema.variables.size(), 0.0);
    for (auto vi : retained) {
        const auto& v = schema.variables[vi];
        if (v.kind != VariableKind::ordinal) continue;
        if (v.simplification.threshold) thresholds[vi] = *v.simplification.threshold;
        else if (!combined.empty()) {
            std::vector<double> xs;
            xs.reserve(combined.size());
            for (const auto& c : combined) xs.push_back(std::get<double>(c.values[vi]));
            thresholds[vi] = detail::median(std::move(xs));
        } else {
            thresholds[vi] = 0.5 * (v.min + v.max);
        }
        table.thresholds[v.name] = thresholds[vi];
    }

    table.rows.reserve(combined.size());
    for (const auto& c : combined) {
        FeatureVector fv{c.address_id, {}, {}};
        for (auto vi : retained) {
            const auto& v = schema.variables[vi];
            const auto& value = c.values[vi];
            switch (v.kind) {
            case VariableKind::ordinal: {
                double x = std::get<double>(value);
                assert(x >= v.min && x <= v.max);
                fv.indicators.push_back(x > thresholds[vi] ? 1 : 0);
                break;
            }
            case VariableKind::single_choice:
                fv.indicators.push_back(detail::map_code(v, std::get<std::string>(value)));
                break;
            case VariableKind::multi_choice: {
                int all_positive = 1;
                for (const auto& code : std::get<std::vector<std::string>>(value))
                    all_positive &= detail::map_code(v, code);
                fv.indicators.push_back(all_positive);
                break;
            }
            }
        }
        for (auto vi : raw) fv.raw_ordinals.push_back(std::get<double>(c.values[vi]));
        table.rows.push_back(std::move(fv));
    }
    return table;
}

inline void write_features_csv(std::ostream& out, const FeatureTable& table) {
    out << "address_id";
    for (const auto& n : table.names) out << ',' << n;
    for (const auto& n : table.raw_names) out << ',' << n;
    out << '\n';
    for (const auto& row : table.rows) {
        out << csv::escape(row.address_id);
        for (int x : row.indicators) out << ',' << x;
        for (double x : row.raw_ordinals) out << ',' << csv::format_number(x);
        out << '\n';
    }
}

} // namespace streetrisk
