// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddose/domain.hpp"
#include "ddose/output_parser.hpp"
#include "ddose/registry.hpp"

namespace ddose::matcher {

// --- timeline -------------------------------------------------------------

enum class EventCategory {
    diagnostic,
    lab,
    staging,
    performance,
    symptom,
    comorbidity,
    biomarker,
    simulation,
    surgery,
    planning,
    treatment,
    other,
};
std::string_view to_string(EventCategory);

struct TimelineEvent {
    Date date;
    EventCategory category = EventCategory::other;
    std::string description;
    bool operator==(const TimelineEvent&) const = default;
};

struct Timeline {
    std::vector<TimelineEvent> events;  // sorted by (date, category, description)
    bool operator==(const Timeline&) const = default;
};

/// One event per dated chart item; undated facts (ECOG, comorbidities,
/// biomarkers) never appear. Deterministic: equal charts yield equal
/// timelines.
Timeline build_timeline(const domain::PatientChart& chart);

// --- keywords and combinations ---------------------------------------------

struct Lexicon {
    struct SiteEntry {
        std::vector<std::string> conditions;
        std::vector<std::string> interventions;
    };
    std::map<std::string, SiteEntry> sites;                     // keyed lowercase
    std::map<std::string, std::vector<std::string>> synonyms;   // keyed lowercase

    static Result<Lexicon> load(const std::filesystem::path& file);
};

struct RankedTerm {
    std::string term;  // lowercase
    int rank = 0;      // 1..n contiguous
    bool operator==(const RankedTerm&) const = default;
};

struct RankedKeywords {
    std::vector<RankedTerm> conditions;
    std::vector<RankedTerm> interventions;
};

/// Conditions come from the chart's diagnoses, most recent onset ranked
/// first, expanded through the site lexicon (unknown sites fall back to
/// "<site> cancer"); interventions follow lexicon order for those sites.
RankedKeywords generate_keywords(const Timeline& timeline, const domain::PatientChart& chart,
                                 const Lexicon& lexicon);

struct CombinationQuery {
    std::vector<std::string> condition_terms;     // >= 1
    std::vector<std::string> intervention_terms;  // may be empty
    int rank = 0;
    bool operator==(const CombinationQuery&) const = default;
};

/// Cross product in rank order (condition-major); when the cross product
/// alone has fewer than 10 entries, condition-only combinations are
/// appended. A short lexicon may still leave fewer than 10; the list is
/// returned as-is for the caller to log.
Result<std::vector<CombinationQuery>> make_combinations(const RankedKeywords& keywords);

/// Each head term becomes [head] + lexicon synonyms, lowercased,
/// deduplicated, order preserved. Terms without a lexicon entry stay alone.
CombinationQuery expand_synonyms(const CombinationQuery& combo, const Lexicon& lexicon);

// --- bounded iterative search ----------------------------------------------

// Frozen search-loop bounds, shared with the agent's trial protocol.
inline constexpr int kMinSearches = 2;
inline constexpr int kMaxSearches = 5;
inline constexpr int kStopThreshold = 7;  // cumulative unique trials
inline constexpr std::size_t kPoolCap = 15;

struct TrialPool {
    std::vector<registry::TrialRecord> trials;  // discovery order, unique ids
    int searches_performed = 0;
    std::vector<std::pair<int, int>> per_search_counts;  // (new_unique, cumulative)
};

struct Demographics {
    std::optional<int> age_years;
    std::optional<registry::TrialSex> sex;
};

struct SearchOutcome {
    enum class Kind { pool, demographics_missing, search_error };
    Kind kind = Kind::pool;
    TrialPool pool;  // meaningful when kind == pool
    Error error;     // meaningful when kind == search_error
};

/// Executes expanded combos in rank order with the frozen loop bounds:
/// no searches at all when age or sex is unknown (demographics_missing);
/// stop once cumulative >= 7 AND searches >= 2; never more than 5
/// searches; short combo lists may stop earlier; a pool exceeding 15 is
/// truncated to the 15 trials first discovered. Any transport failure is
/// search_error.
SearchOutcome iterative_search(const std::vector<CombinationQuery>& combos,
                               registry::RegistryClient& client, const Demographics& demographics,
                               const std::string& institution);

// --- criterion evaluation ----------------------------------------------------

enum class CriterionStatus { met, not_met, unknown, not_applicable };
std::string_view to_string(CriterionStatus);

struct CriterionReport {
    std::string criterion_id;
    CriterionStatus status = CriterionStatus::unknown;
    std::string evidence;  // names the chart fact or its absence
    bool operator==(const CriterionReport&) const = default;
};

/// Evaluates every criterion against chart facts as of `as_of` (the run
/// date anchors the age). Exclusion-polarity criteria report met when the
/// disqualifying condition is absent; absent facts yield unknown;
/// free-text criteria are always unknown; criteria whose applies_to_site
/// names a site the patient lacks yield not_applicable. Prior-treatment
/// terms match the treatment history (treatments, prior radiation, prior
/// systemic therapies, medications) bag-of-words, ignoring a leading
/// "prior"; an entirely empty history yields unknown.
std::vector<CriterionReport> evaluate_eligibility(const registry::TrialRecord& trial,
                                                  const domain::PatientChart& chart,
                                                  const Date& as_of);

struct ShortlistEntry {
    registry::TrialRecord trial;
    std::vector<CriterionReport> reports;
};

/// Shortlist = pool trials with zero not_met criteria, in discovery order.
/// Throws std::invalid_argument when a pool trial has no report list.
std::vector<ShortlistEntry> filter_pool(
    const TrialPool& pool,
    const std::map<std::string, std::vector<CriterionReport>>& reports_by_trial);

// --- result formatting -------------------------------------------------------

/// Renders the scenario's output template (each scenario keeps its own
/// fence layout) with numbered entries for the success case. The output
/// parses back via parser::extract_analysis_summary. Fails on an
/// inconsistent scenario/shortlist pairing. `patient_name` fills every
/// name slot; callers pass the patient id when no display name exists.
Result<std::string> format_result(parser::Scenario scenario,
                                  const std::vector<ShortlistEntry>& shortlist,
                                  const std::string& patient_name);

// --- whole pipeline ----------------------------------------------------------

struct MatchResult {
    parser::Scenario scenario = parser::Scenario::none_found;
    TrialPool pool;
    std::vector<ShortlistEntry> shortlist;
    std::string rendered;  // format_result output
};

/// Timeline -> keywords -> combinations -> synonym expansion -> bounded
/// search -> criterion evaluation -> exclusion filter -> formatting, as
/// one sequential pipeline for a single patient.
MatchResult run_trial_matching(const domain::PatientChart& chart,
                               registry::RegistryClient& client, const Lexicon& lexicon,
                               const std::string& institution, const Date& as_of,
                               const std::string& patient_display_name);

}  // namespace ddose::matcher
