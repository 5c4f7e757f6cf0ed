// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ddose/result.hpp"

namespace ddose::parser {

/// The standardized fallback sentence the summary agent emits when the
/// chart does not support a status report.
inline constexpr std::string_view kFallbackSummary =
    "There is not enough information to provide a status report.";

struct SummaryPayload {
    std::string text;
    bool is_fallback = false;  // true iff text equals kFallbackSummary
    bool operator==(const SummaryPayload&) const = default;
};

enum class Scenario { trials_found, none_found, demographics_missing, search_error };
std::string_view to_string(Scenario);

struct TrialEntry {
    std::string nct_id;
    std::string title;
    std::string met_summary;
    std::string unknown_summary;
    std::string not_applicable_summary;
    std::string url;
    bool operator==(const TrialEntry&) const = default;
};

struct AnalysisSummary {
    Scenario scenario = Scenario::none_found;
    std::vector<TrialEntry> entries;  // non-empty iff scenario == trials_found
    std::string patient_display_name;
    bool operator==(const AnalysisSummary&) const = default;
};

/// Scans fenced code blocks and returns the patient_status_summary value
/// from the LAST block carrying that key. Blocks that are not pure JSON
/// are salvaged by balanced-brace extraction before giving up on them.
/// Errors: "no_summary" (no qualifying block), "bad_summary" (value is
/// not a string).
Result<SummaryPayload> extract_json_summary(const std::string& text);

/// Extracts the region between <ANALYSIS_SUMMARY> and </ANALYSIS_SUMMARY>
/// (the surrounding code fences vary across layouts and are ignored),
/// classifies the scenario by its sentinel phrase, and for the success
/// scenario parses the numbered trial entries.
/// Errors: "missing_scope", "unparseable" (sentinel or entries missing;
/// the raw region is attached to the message).
Result<AnalysisSummary> extract_analysis_summary(const std::string& text);

/// True iff the literal token <DONE> appears outside fenced code blocks.
bool detect_done(const std::string& text);

}  // namespace ddose::parser
