// SPDX-License-Identifier: Apache-2.0
#include "ddose/clinical_rules.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace ddose::rules {

using domain::MStage;
using domain::NStage;
using domain::TStage;

std::string_view to_string(RiskCategory c) {
    switch (c) {
        case RiskCategory::low: return "low";
        case RiskCategory::intermediate_favorable: return "favorable intermediate";
        case RiskCategory::intermediate_unfavorable: return "unfavorable intermediate";
        case RiskCategory::high: return "high";
        case RiskCategory::very_high: return "very high";
    }
    return "low";
}

void ProstateInputs::check() const {
    domain::ProstateDetail detail{gleason_primary, gleason_secondary, cores_positive,
                                  cores_total};
    detail.check();
    if (!std::isfinite(psa_ng_ml) || psa_ng_ml < 0)
        throw std::invalid_argument("psa_ng_ml must be finite and non-negative");
}

namespace {

struct Factor {
    std::string code;
    std::string text;
};

std::string join_texts(const std::vector<Factor>& factors) {
    std::string out;
    for (const auto& f : factors) {
        if (!out.empty()) out += "; ";
        out += f.text;
    }
    return out;
}

}  // namespace

RiskAssessment classify_nccn_prostate(const ProstateInputs& in) {
    in.check();
    const int sum = in.gleason_primary + in.gleason_secondary;

    std::vector<Factor> very_high;
    if (in.t_stage == TStage::t3b || in.t_stage == TStage::t3c || in.t_stage == TStage::t4)
        very_high.push_back({"t3b_t4", "T stage T3b or higher"});
    if (in.gleason_primary == 5)
        very_high.push_back({"primary_pattern_5", "primary Gleason pattern 5"});
    if (in.cores_positive > 5 && sum >= 8)
        very_high.push_back(
            {"cores_over_5_gleason_8_plus", "more than 5 positive cores with Gleason sum 8 or more"});
    if (in.n_stage == NStage::n1) very_high.push_back({"n1", "nodal disease (N1)"});
    if (in.m_stage == MStage::m1) very_high.push_back({"m1", "metastatic disease (M1)"});

    // An unrefined T3 is treated at the T3a tier.
    std::vector<Factor> high;
    if (in.t_stage == TStage::t3 || in.t_stage == TStage::t3a)
        high.push_back({"t3a", "T stage T3/T3a"});
    if (sum >= 8) high.push_back({"gleason_sum_8_plus", "Gleason sum 8 or more"});
    if (in.psa_ng_ml > 20) high.push_back({"psa_over_20", "PSA over 20 ng/mL"});

    std::vector<Factor> intermediate;
    if (in.t_stage == TStage::t2b || in.t_stage == TStage::t2c)
        intermediate.push_back({"t2b_t2c", "T stage T2b-T2c"});
    if (sum == 7) intermediate.push_back({"gleason_sum_7", "Gleason sum 7"});
    if (in.psa_ng_ml >= 10 && in.psa_ng_ml <= 20)
        intermediate.push_back({"psa_10_to_20", "PSA 10-20 ng/mL"});

    RiskAssessment out;
    auto take = [&out](const std::vector<Factor>& factors) {
        for (const auto& f : factors) out.triggered_factors.push_back(f.code);
    };

    if (!very_high.empty()) {
        out.category = RiskCategory::very_high;
        take(very_high);
        out.explanation = fmt::format("very high risk: {}", join_texts(very_high));
        return out;
    }
    if (!high.empty()) {
        out.category = RiskCategory::high;
        take(high);
        out.explanation = fmt::format("high risk: {}", join_texts(high));
        return out;
    }
    if (!intermediate.empty()) {
        take(intermediate);
        std::vector<std::string> unfavorable_because;
        if (intermediate.size() >= 2) unfavorable_because.push_back("2 or more risk factors");
        if (in.gleason_primary == 4) unfavorable_because.push_back("primary Gleason pattern 4");
        if (in.cores_positive * 2 >= in.cores_total)
            unfavorable_because.push_back("50% or more biopsy cores positive");
        if (unfavorable_because.empty()) {
            out.category = RiskCategory::intermediate_favorable;
            out.explanation =
                fmt::format("favorable intermediate risk: {} (single risk factor, under 50% "
                            "cores positive, primary pattern not 4)",
                            join_texts(intermediate));
        } else {
            out.category = RiskCategory::intermediate_unfavorable;
            std::string why;
            for (const auto& w : unfavorable_because) {
                if (!why.empty()) why += "; ";
                why += w;
            }
            out.explanation = fmt::format("unfavorable intermediate risk: {} (unfavorable: {})",
                                          join_texts(intermediate), why);
        }
        return out;
    }
    out.category = RiskCategory::low;
    out.explanation = "low risk: T1-T2a, Gleason sum 6 or less, and PSA under 10 ng/mL";
    return out;
}

namespace {

/// "5" -> "5.0", "5.4" -> "5.4", "5.45" -> "5.45".
std::string format_psa(double value) {
    const double tenths = value * 10;
    if (std::abs(tenths - std::round(tenths)) < 1e-9) return fmt::format("{:.1f}", value);
    return fmt::format("{:.2f}", value);
}

}  // namespace

std::optional<std::string> prostate_addendum(const domain::PatientChart& chart) {
    const domain::DiagnosisDetail* prostate = nullptr;
    for (const auto& d : chart.diagnoses) {
        if (!d.prostate_detail) continue;
        if (!prostate || d.prostate_detail->gleason_sum() >
                             prostate->prostate_detail->gleason_sum())
            prostate = &d;
    }
    if (!prostate)
        throw std::invalid_argument(
            "prostate addendum requires a prostate diagnosis with Gleason detail");

    std::vector<const domain::LabResult*> psa;
    for (const auto& lab : chart.labs)
        if (lab.analyte == "PSA") psa.push_back(&lab);
    if (psa.empty()) return std::nullopt;

    const domain::LabResult* most_recent = psa.front();
    for (const auto* lab : psa)
        if (most_recent->date < lab->date) most_recent = lab;

    // Ties on distance to onset break toward the earlier measurement.
    const domain::LabResult* closest = psa.front();
    auto distance = [&](const domain::LabResult* lab) {
        return std::abs(days_between(prostate->onset_date, lab->date));
    };
    for (const auto* lab : psa) {
        const auto d = distance(lab);
        if (d < distance(closest) || (d == distance(closest) && lab->date < closest->date))
            closest = lab;
    }

    const auto& detail = *prostate->prostate_detail;
    ProstateInputs inputs;
    // Absent staging fields default to the lowest tier rather than guessing upward.
    inputs.t_stage = prostate->staging.t.value_or(TStage::t1);
    inputs.n_stage = prostate->staging.n.value_or(NStage::n0);
    inputs.m_stage = prostate->staging.m.value_or(MStage::m0);
    inputs.gleason_primary = detail.gleason_primary;
    inputs.gleason_secondary = detail.gleason_secondary;
    inputs.psa_ng_ml = most_recent->value;
    inputs.cores_positive = detail.cores_positive;
    inputs.cores_total = detail.cores_total;
    const auto risk = classify_nccn_prostate(inputs);

    return fmt::format(
        "Prostate findings: highest Gleason score on biopsy Gleason {}+{} ({} of {} cores "
        "positive); most recent PSA {} ng/mL ({}); PSA closest to diagnosis onset {} ng/mL "
        "({}); NCCN risk category: {} risk.",
        detail.gleason_primary, detail.gleason_secondary, detail.cores_positive,
        detail.cores_total, format_psa(most_recent->value), most_recent->date.to_string(),
        format_psa(closest->value), closest->date.to_string(), to_string(risk.category));
}

}  // namespace ddose::rules
