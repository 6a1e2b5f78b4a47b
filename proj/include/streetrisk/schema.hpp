#pragma once

#include <streetrisk/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace streetrisk {

enum class VariableKind { single_choice, multi_choice, ordinal };

inline const char* to_string(VariableKind k) {
    switch (k) {
    case VariableKind::single_choice: return "single_choice";
    case VariableKind::multi_choice: return "multi_choice";
    case VariableKind::ordinal: return "ordinal";
    }
    return "ordinal";
}

/// How a variable collapses to a binary modeling indicator.
///
/// * `excluded`  - not used in the risk model (kept as a raw ordinal only).
/// * `codes`     - choice variables; 1 when the value (every selected code for
///                 multi-choice) lies in `positive_codes`, 0 when in the
///                 negative set. The negative set defaults to every other
///                 schema code.
/// * `threshold` - ordinal variables; 1 when the calibrated value exceeds the
///                 threshold. No threshold means the pooled median.
struct Simplification {
    enum class Type { excluded, codes, threshold };
    Type type = Type::excluded;
    std::vector<std::string> positive_codes;
    std::optional<std::vector<std::string>> negative_codes;
    std::optional<double> threshold;
};

struct VariableSpec {
    std::string name;
    std::string label;
    VariableKind kind = VariableKind::ordinal;
    std::vector<std::string> codes; ///< choice variables only
    int min = 1;                    ///< ordinal range, inclusive
    int max = 1;
    Simplification simplification;

    bool is_choice() const { return kind != VariableKind::ordinal; }
    bool retained() const { return simplification.type != Simplification::Type::excluded; }
    bool has_code(const std::string& code) const {
        return std::find(codes.begin(), codes.end(), code) != codes.end();
    }
    int code_index(const std::string& code) const {
        auto it = std::find(codes.begin(), codes.end(), code);
        return it == codes.end() ? -1 : static_cast<int>(it - codes.begin());
    }
    /// Number of distinct categories (choice codes or ordinal levels).
    std::size_t granularity() const {
        return is_choice() ? codes.size() : static_cast<std::size_t>(max - min + 1);
    }
};

inline constexpr std::size_t kSchemaVariableCount = 7;

struct AnnotationSchema {
    std::vector<VariableSpec> variables;

    const VariableSpec* find(const std::string& name) const {
        for (const auto& v : variables)
            if (v.name == name) return &v;
        return nullptr;
    }
    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i].name == name) return static_cast<int>(i);
        return -1;
    }
    std::vector<std::string> retained_names() const {
        std::vector<std::string> out;
        for (const auto& v : variables)
            if (v.retained()) out.push_back(v.name);
        return out;
    }

    void validate() const {
        if (variables.size() != kSchemaVariableCount)
            throw InputError("schema must define exactly 7 variables, got " + std::to_string(variables.size()));
        std::set<std::string> names;
        for (const auto& v : variables) {
            if (v.name.empty()) throw InputError("schema variable with empty name");
            if (!names.insert(v.name).second) throw InputError("duplicate schema variable '" + v.name + "'");
            if (v.is_choice()) {
                if (v.codes.size() < 2) throw InputError("variable '" + v.name + "' needs at least 2 codes");
                std::set<std::string> codes(v.codes.begin(), v.codes.end());
                if (codes.size() != v.codes.size()) throw InputError("variable '" + v.name + "' has duplicate codes");
                for (const auto& c : v.codes)
                    if (c.empty() || c.find_first_of(";,\"") != std::string::npos)
                        throw InputError("variable '" + v.name + "' has invalid code '" + c + "'");
            } else if (v.max <= v.min) {
                throw InputError("variable '" + v.name + "' has an empty ordinal range");
            }
            const auto& s = v.simplification;
            using T = Simplification::Type;
            if (s.type == T::codes && !v.is_choice())
                throw InputError("variable '" + v.name + "': code mapping on an ordinal variable");
            if (s.type == T::threshold && v.is_choice())
                throw InputError("variable '" + v.name + "': threshold mapping on a choice variable");
            if (s.type == T::codes && s.positive_codes.empty())
                throw InputError("variable '" + v.name + "': empty positive code set");
        }
    }
};

/// The seven house/neighbourhood variables with their original granularity
/// and the default two-level simplifications. Density and wealth are excluded
/// from the risk model.
inline AnnotationSchema default_schema() {
    using T = Simplification::Type;
    AnnotationSchema s;
    s.variables = {
        {"neighbourhood", "Neighbourhood type", VariableKind::multi_choice,
         {"residential", "commercial", "industrial", "agricultural", "recreational", "woodland", "transport"}, 0, 0,
         {T::codes, {"residential"}, std::nullopt, std::nullopt}},
        {"density", "Building density", VariableKind::ordinal, {}, 1, 5, {}},
        {"sv_quality", "Street View quality", VariableKind::single_choice, {"good", "bad", "missing"}, 0, 0,
         {T::codes, {"good"}, std::nullopt, std::nullopt}},
        {"house_type", "House type", VariableKind::single_choice,
         {"detached", "semi_detached", "terraced", "apartment_block", "other"}, 0, 0,
         {T::codes, {"detached"}, std::nullopt, std::nullopt}},
        {"house_age", "House age", VariableKind::ordinal, {}, 1, 3, {T::threshold, {}, std::nullopt, std::nullopt}},
        {"house_condition", "House condition", VariableKind::ordinal, {}, 1, 3,
         {T::threshold, {}, std::nullopt, std::nullopt}},
        {"wealth", "Wealth of residents", VariableKind::ordinal, {}, 1, 10, {}},
    };
    return s;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const AnnotationSchema& schema) {
    using nlohmann::json;
    json vars = json::array();
    for (const auto& v : schema.variables) {
        json j{{"name", v.name}, {"label", v.label}, {"kind", to_string(v.kind)}};
        if (v.is_choice()) j["codes"] = v.codes;
        else {
            j["min"] = v.min;
            j["max"] = v.max;
        }
        json s;
        switch (v.simplification.type) {
        case Simplification::Type::excluded: s = {{"type", "excluded"}}; break;
        case Simplification::Type::codes:
            s = {{"type", "codes"}, {"positive", v.simplification.positive_codes}};
            if (v.simplification.negative_codes) s["negative"] = *v.simplification.negative_codes;
            break;
        case Simplification::Type::threshold:
            s = {{"type", "threshold"}};
            if (v.simplification.threshold) s["threshold"] = *v.simplification.threshold;
            else s["threshold"] = "median";
            break;
        }
        j["simplification"] = s;
        vars.push_back(std::move(j));
    }
    return json{{"variables", vars}};
}

inline AnnotationSchema schema_from_json(const nlohmann::json& j) {
    AnnotationSchema schema;
    try {
        for (const auto& jv : j.at("variables")) {
            VariableSpec v;
            v.name = jv.at("name").get<std::string>();
            v.label = jv.value("label", v.name);
            const auto kind = jv.at("kind").get<std::string>();
            if (kind == "single_choice") v.kind = VariableKind::single_choice;
            else if (kind == "multi_choice") v.kind = VariableKind::multi_choice;
            else if (kind == "ordinal") v.kind = VariableKind::ordinal;
            else throw InputError("unknown variable kind '" + kind + "'");
            if (v.is_choice()) v.codes = jv.at("codes").get<std::vector<std::string>>();
            else {
                v.min = jv.at("min").get<int>();
                v.max = jv.at("max").get<int>();
            }
            if (jv.contains("simplification")) {
                const auto& js = jv.at("simplification");
                const auto type = js.at("type").get<std::string>();
                auto& s = v.simplification;
                if (type == "excluded") s.type = Simplification::Type::excluded;
                else if (type == "codes") {
                    s.type = Simplification::Type::codes;
                    s.positive_codes = js.at("positive").get<std::vector<std::string>>();
                    if (js.contains("negative")) s.negative_codes = js.at("negative").get<std::vector<std::string>>();
                } else if (type == "threshold") {
                    s.type = Simplification::Type::threshold;
                    if (js.contains("threshold") && js.at("threshold").is_number())
                        s.threshold = js.at("threshold").get<double>();
                } else {
                    throw InputError("unknown simplification type '" + type + "'");
                }
            }
            schema.variables.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid schema JSON: ") + e.what());
    }
    schema.validate();
    return schema;
}

} // namespace streetrisk
