#pragma once

#include <streetrisk/error.hpp>
#include <streetrisk/features.hpp>
#include <streetrisk/glm.hpp>
#include <streetrisk/portfolio.hpp>

#include <string>
#include <vector>

namespace streetrisk {

enum class Provenance { real_ingest, synthetic };

inline const char* to_string(Provenance p) { return p == Provenance::synthetic ? "synthetic" : "real-ingest"; }

/// Policies at included addresses, each joined to its address's features.
/// Immutable after construction.
struct Dataset {
    std::vector<PolicyRecord> policies;
    std::vector<FeatureVector> features; ///< features[i] belongs to policies[i]
    std::vector<std::string> feature_names;
    Provenance provenance = Provenance::real_ingest;
    std::size_t excluded_policies = 0; ///< dropped because their address is excluded

    std::size_t size() const { return policies.size(); }
};

/// Joins policies to features through the address registry. Policies at
/// foreign or unresolved addresses are skipped; an included address without
/// features or a policy at an unknown address is an error.
inline Dataset join_dataset(const std::vector<PolicyRecord>& policies, const AddressRegistry& registry,
                            const FeatureTable& features, Provenance provenance) {
    Dataset d;
    d.provenance = provenance;
    d.feature_names = features.names;
    std::size_t missing = 0;
    std::string first_missing;
    for (const auto& p : policies) {
        const AddressEntry* a = registry.find(p.address_id);
        if (!a) throw InputError("policy '" + p.policy_id + "' references unknown address '" + p.address_id + "'");
        if (!a->included()) {
            ++d.excluded_policies;
            continue;
        }
        const FeatureVector* f = features.find(p.address_id);
        if (!f) {
            if (missing++ == 0) first_missing = p.address_id;
            continue;
        }
        d.policies.push_back(p);
        d.features.push_back(*f);
    }
    if (missing > 0)
        throw InputError(std::to_string(missing) + " included policies have no annotated features (first address '" +
                         first_missing + "')");
    return d;
}

/// Arrays consumed by the GLM and the evaluation harness.
struct ModelingData {
    DesignMatrix design; ///< intercept + every requested feature, nothing dropped
    std::vector<double> claims;
    std::vector<double> exposure;
    std::vector<double> model_b_frequency;

    std::size_t size() const { return claims.size(); }
};

inline ModelingData modeling_data(const Dataset& d, const std::vector<std::string>& variables) {
    ModelingData m;
    m.design = build_design(d.features, d.feature_names, variables, DesignOptions{false});
    for (const auto& p : d.policies) {
        m.claims.push_back(static_cast<double>(p.claim_count));
        m.exposure.push_back(p.exposure);
        m.model_b_frequency.push_back(p.model_b_frequency);
    }
    return m;
}

} // namespace streetrisk
