#pragma once

#include <streetrisk/annotation.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/schema.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace streetrisk {

/// Item-by-category count table: counts[i][j] is the number of raters who
/// put item i in category j.
using CountTable = std::vector<std::vector<std::int64_t>>;

/// Fleiss' kappa for a fixed number of raters per item.
///
/// Everything up to the final division is integer arithmetic. With N items,
/// n raters, T = N n, A = sum n_ij (n_ij - 1) and S = sum_j c_j^2 (c_j the
/// category totals):
///
///     kappa = (A T - S (n - 1)) / ((n - 1)(T^2 - S))
inline double fleiss_kappa(const CountTable& counts, std::int64_t raters_per_item) {
    if (raters_per_item < 2) throw InputError("fleiss_kappa: at least 2 ratings per item required");
    if (counts.empty()) throw InputError("fleiss_kappa: no items");
    const std::size_t k = counts.front().size();
    if (k < 2) throw InputError("fleiss_kappa: at least 2 categories required");

    std::vector<__int128> totals(k, 0);
    __int128 agree = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& row = counts[i];
        if (row.size() != k) throw InputError("fleiss_kappa: ragged count table");
        std::int64_t sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw InputError("fleiss_kappa: negative count");
            sum += row[j];
            totals[j] += row[j];
            agree += static_cast<__int128>(row[j]) * (row[j] - 1);
        }
        if (sum != raters_per_item)
            throw InputError("fleiss_kappa: item " + std::to_string(i) + " has " + std::to_string(sum) +
                             " ratings, expected " + std::to_string(raters_per_item));
    }
    const __int128 n = raters_per_item;
    const __int128 t = static_cast<__int128>(counts.size()) * n;
    __int128 s = 0;
    for (auto c : totals) s += c * c;
    const __int128 den = (n - 1) * (t * t - s);
    if (den == 0) throw DegenerateAgreement("fleiss_kappa: all ratings fall in one category");
    const __int128 num = agree * t - s * (n - 1);
    return static_cast<double>(num) / static_cast<double>(den);
}

/// Landis-Koch verbal band.
inline std::string interpret_kappa(double kappa) {
    if (!(kappa >= -1.0 && kappa <= 1.0)) throw InputError("interpret_kappa: kappa outside [-1, 1]");
    if (kappa <= 0.0) return "poor agreement";
    if (kappa <= 0.20) return "slight agreement";
    if (kappa <= 0.40) return "fair agreement";
    if (kappa <= 0.60) return "moderate agreement";
    if (kappa <= 0.80) return "substantial agreement";
    return "almost perfect agreement";
}

struct ChoiceKappa {
    std::string code;
    std::optional<double> kappa; ///< empty when degenerate
};

struct VariableAgreement {
    std::string variable;
    std::optional<double> kappa; ///< empty when degenerate
    std::string band;            ///< "degenerate" when kappa is empty
    std::size_t items = 0;
    std::size_t raters = 0;
    std::vector<ChoiceKappa> per_choice; ///< multi-choice variables only
};

struct KappaReport {
    std::vector<VariableAgreement> variables;
    std::vector<std::string> raters;
};

/// Builds the count table for one variable from per-item rating lists.
/// Categories are indexed by schema code order or ordinal level.
inline CountTable category_counts(const VariableSpec& v, std::size_t var_index,
                                  const std::vector<std::vector<const AnnotationRecord*>>& items) {
    CountTable table;
    table.reserve(items.size());
    for (const auto& ratings : items) {
        std::vector<std::int64_t> row(v.granularity(), 0);
        for (const auto* r : ratings) {
            if (v.kind == VariableKind::single_choice) {
                row[static_cast<std::size_t>(v.code_index(r->code(var_index)))] += 1;
            } else {
                auto level = static_cast<long long>(std::lround(r->ordinal(var_index)));
                row[static_cast<std::size_t>(level - v.min)] += 1;
            }
        }
        table.push_back(std::move(row));
    }
    return table;
}

/// Per-variable Fleiss' kappa over a common item set.
///
/// Multi-choice variables are scored as one binary (selected / not selected)
/// kappa per code; the variable's kappa is the unweighted mean of the
/// non-degenerate per-code values. A degenerate variable is reported, not
/// thrown. When `raters` is empty every annotator found on the common set is
/// evaluated.
inline KappaReport agreement_report(std::span<const AnnotationRecord> annotations, const AnnotationSchema& schema,
                                    const std::vector<std::string>& common_set,
                                    std::vector<std::string> raters = {}) {
    if (raters.empty()) {
        std::set<std::string> common(common_set.begin(), common_set.end());
        std::set<std::string> found;
        for (const auto& r : annotations)
            if (common.count(r.address_id)) found.insert(r.annotator_id);
        raters.assign(found.begin(), found.end());
    }
    std::sort(raters.begin(), raters.end());
    raters.erase(std::unique(raters.begin(), raters.end()), raters.end());
    if (raters.size() < 2) throw InputError("at least 2 raters required");
    if (common_set.empty()) throw InputError("agreement_report: empty common set");

    std::map<std::pair<std::string, std::string>, const AnnotationRecord*> lookup;
    for (const auto& r : annotations) lookup[{r.address_id, r.annotator_id}] = &r;

    std::vector<std::vector<const AnnotationRecord*>> items;
    std::set<std::string> seen;
    for (const auto& address : common_set) {
        if (!seen.insert(address).second) continue;
        std::vector<const AnnotationRecord*> ratings;
        for (const auto& rater : raters) {
            auto it = lookup.find({address, rater});
            if (it == lookup.end())
                throw InputError("address '" + address + "' not annotated by rater '" + rater + "'");
            ratings.push_back(it->second);
        }
        items.push_back(std::move(ratings));
    }

    const auto n = static_cast<std::int64_t>(raters.size());
    KappaReport report;
    report.raters = raters;
    for (std::size_t vi = 0; vi < schema.variables.size(); ++vi) {
        const auto& v = schema.variables[vi];
        VariableAgreement row{v.name, std::nullopt, "degenerate", items.size(), raters.size(), {}};
        if (v.kind == VariableKind::multi_choice) {
            double sum = 0.0;
            int defined = 0;
            for (const auto& code : v.codes) {
                CountTable table;
                for (const auto& ratings : items) {
                    std::int64_t yes = 0;
                    for (const auto* r : ratings) {
                        const auto& set = r->codes(vi);
                        yes += std::find(set.begin(), set.end(), code) != set.end();
                    }
                    table.push_back({yes, n - yes});
                }
                ChoiceKappa ck{code, std::nullopt};
                try {
                    ck.kappa = fleiss_kappa(table, n);
                    sum += *ck.kappa;
                    ++defined;
                } catch (const DegenerateAgreement&) {
                }
                row.per_choice.push_back(ck);
            }
            if (defined > 0) row.kappa = sum / defined;
        } else {
            try {
                row.kappa = fleiss_kappa(category_counts(v, vi, items), n);
            } catch (const DegenerateAgreement&) {
            }
        }
        if (row.kappa) row.band = interpret_kappa(std::clamp(*row.kappa, -1.0, 1.0));
        report.variables.push_back(std::move(row));
    }
    return report;
}

inline nlohmann::json to_json(const KappaReport& report) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : report.variables) {
        nlohmann::json j{{"variable", v.variable},
                         {"kappa", v.kappa ? nlohmann::json(*v.kappa) : nlohmann::json(nullptr)},
                         {"band", v.band},
                         {"items", v.items},
                         {"raters", v.raters}};
        if (!v.per_choice.empty()) {
            nlohmann::json pc = nlohmann::json::object();
            for (const auto& c : v.per_choice)
                pc[c.code] = c.kappa ? nlohmann::json(*c.kappa) : nlohmann::json(nullptr);
            j["per_choice"] = pc;
        }
        vars.push_back(std::move(j));
    }
    return {{"raters", report.raters}, {"variables", vars}};
}

/// Table-shaped CSV: variable,kappa,band,items,raters.
inline void write_kappa_csv(std::ostream& out, const KappaReport& report) {
    out << "variable,kappa,band,items,raters\n";
    for (const auto& v : report.variables) {
        out << v.variable << ',' << (v.kappa ? csv::format_double(*v.kappa) : std::string()) << ',' << v.band << ','
            << v.items << ',' << v.raters << '\n';
    }
}

} // namespace streetrisk
