// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddose/domain.hpp"

namespace ddose::rules {

enum class RiskCategory {
    low,
    intermediate_favorable,
    intermediate_unfavorable,
    high,
    very_high,
};

/// Display form used in prose: "favorable intermediate", "very high", ...
std::string_view to_string(RiskCategory);

struct ProstateInputs {
    domain::TStage t_stage = domain::TStage::t1;
    domain::NStage n_stage = domain::NStage::n0;
    domain::MStage m_stage = domain::MStage::m0;
    int gleason_primary = 0;    // 1..5
    int gleason_secondary = 0;  // 1..5
    double psa_ng_ml = 0;       // finite, >= 0
    int cores_positive = 0;
    int cores_total = 0;  // > 0, >= cores_positive
    bool operator==(const ProstateInputs&) const = default;

    void check() const;  // throws std::invalid_argument on invariant violation
};

struct RiskAssessment {
    RiskCategory category = RiskCategory::low;
    std::vector<std::string> triggered_factors;  // empty only for low
    std::string explanation;
};

/// NCCN-style prostate risk grouping, evaluated in precedence order
/// very_high > high > intermediate > low:
///   very high: T3b-T4, primary Gleason pattern 5, more than 5 positive
///              cores with Gleason sum >= 8, N1, or M1
///   high:      T3/T3a, Gleason sum >= 8, or PSA > 20
///   intermediate: T2b-T2c, Gleason sum = 7, or PSA in [10, 20];
///              favorable iff exactly one factor AND under 50% cores
///              positive AND primary pattern != 4
///   low:       everything else (T1-T2a, Gleason <= 6, PSA < 10)
/// Pure function; throws std::invalid_argument on invalid inputs.
RiskAssessment classify_nccn_prostate(const ProstateInputs& inputs);

/// One prose sentence for prostate charts: highest biopsy Gleason score,
/// most recent PSA (with date), PSA closest to the diagnosis onset date
/// (ties broken toward the earlier measurement), and the risk category.
/// Returns nullopt when the chart has no PSA values (the addendum is
/// omitted, not an error). Throws std::invalid_argument when the chart
/// has no prostate diagnosis detail.
std::optional<std::string> prostate_addendum(const domain::PatientChart& chart);

}  // namespace ddose::rules
