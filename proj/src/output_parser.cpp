// SPDX-License-Identifier: Apache-2.0
#include "ddose/output_parser.hpp"

#include <fmt/format.h>

#include "json.hpp"

#include "ddose/registry.hpp"
#include "ddose/text.hpp"

namespace ddose::parser {

using nlohmann::json;

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::trials_found: return "trials_found";
        case Scenario::none_found: return "none_found";
        case Scenario::demographics_missing: return "demographics_missing";
        case Scenario::search_error: return "search_error";
    }
    return "none_found";
}

namespace {

bool is_fence_line(std::string_view line) {
    return text::trim(line).substr(0, 3) == "```";
}

/// Contents of each triple-backtick fenced block, in order of appearance.
/// A fence opener may carry a language tag; the tag is not part of the body.
std::vector<std::string> fenced_blocks(const std::string& input) {
    std::vector<std::string> blocks;
    bool in_fence = false;
    std::string current;
    for (const auto& line : text::split_lines(input)) {
        if (is_fence_line(line)) {
            if (in_fence) {
                blocks.push_back(current);
                current.clear();
            }
            in_fence = !in_fence;
            continue;
        }
        if (in_fence) {
            current += line;
            current += '\n';
        }
    }
    return blocks;
}

/// Extracts the first balanced {...} span, skipping brace characters that
/// sit inside JSON string literals.
std::optional<std::string> balanced_object(const std::string& s) {
    const size_t start = s.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        if (c == '{') ++depth;
        if (c == '}' && --depth == 0) return s.substr(start, i - start + 1);
    }
    return std::nullopt;
}

std::optional<json> parse_block(const std::string& body) {
    json doc = json::parse(body, nullptr, false);
    if (!doc.is_discarded()) return doc;
    if (auto obj = balanced_object(body)) {
        doc = json::parse(*obj, nullptr, false);
        if (!doc.is_discarded()) return doc;
    }
    return std::nullopt;
}

}  // namespace

Result<SummaryPayload> extract_json_summary(const std::string& input) {
    using R = Result<SummaryPayload>;
    std::optional<json> last_with_key;
    for (const auto& body : fenced_blocks(input)) {
        auto doc = parse_block(body);
        if (doc && doc->is_object() && doc->contains("patient_status_summary"))
            last_with_key = std::move(doc);
    }
    if (!last_with_key)
        return R::failure("no_summary", "no fenced JSON block carries patient_status_summary");
    const json& value = last_with_key->at("patient_status_summary");
    if (!value.is_string())
        return R::failure("bad_summary", "patient_status_summary is not a string");
    SummaryPayload payload;
    payload.text = value.get<std::string>();
    payload.is_fallback = payload.text == kFallbackSummary;
    return payload;
}

namespace {

constexpr std::string_view kOpenMark = "<ANALYSIS_SUMMARY>";
constexpr std::string_view kCloseMark = "</ANALYSIS_SUMMARY>";
constexpr std::string_view kNameAnchor = "Clinical Trials Eligibility Summary for ";

/// Sentinel phrases checked in this fixed order.
constexpr std::string_view kTrialsFound = "is potentially eligible to participate";
constexpr std::string_view kNoneFound = "No relevant clinical trials were found";
constexpr std::string_view kDemographics = "age and sex could not be retrieved";
constexpr std::string_view kSearchError = "An error occurred when searching";

/// Value after a bold "- **Label:**" bullet, or nullopt if the line is a
/// different bullet.
std::optional<std::string> bullet_value(std::string_view line, std::string_view label) {
    const auto trimmed = text::trim(line);
    if (trimmed.substr(0, label.size()) != label) return std::nullopt;
    return std::string(text::trim(trimmed.substr(label.size())));
}

Result<std::vector<TrialEntry>> parse_entries(const std::vector<std::string>& lines) {
    using R = Result<std::vector<TrialEntry>>;
    std::vector<TrialEntry> entries;
    TrialEntry* open = nullptr;
    std::string* last_field = nullptr;

    for (const auto& raw : lines) {
        const auto line = text::trim(raw);
        if (line.empty() || line.substr(0, 3) == "```") continue;
        if (line.substr(0, 4) == "####") {
            const auto star = line.find("**");
            const auto star_end = star == std::string::npos
                                      ? std::string::npos
                                      : line.find("**", star + 2);
            if (star_end == std::string::npos)
                return R::failure("unparseable",
                                  fmt::format("entry heading without bold id: '{}'", line));
            TrialEntry entry;
            entry.nct_id = line.substr(star + 2, star_end - star - 2);
            if (!registry::valid_nct_id(entry.nct_id))
                return R::failure("unparseable",
                                  fmt::format("entry id '{}' is not a valid NCT id", entry.nct_id));
            entries.push_back(std::move(entry));
            open = &entries.back();
            last_field = nullptr;
            continue;
        }
        if (!open) continue;
        if (auto v = bullet_value(line, "- **Title:**")) {
            open->title = *v;
            last_field = &open->title;
        } else if (bullet_value(line, "- **Criteria Evaluation Summary:**")) {
            last_field = nullptr;
        } else if (auto m = bullet_value(line, "- **Met:**")) {
            open->met_summary = *m;
            last_field = &open->met_summary;
        } else if (auto u = bullet_value(line, "- **Unknown:**")) {
            open->unknown_summary = *u;
            last_field = &open->unknown_summary;
        } else if (auto n = bullet_value(line, "- **Not Applicable:**")) {
            open->not_applicable_summary = *n;
            last_field = &open->not_applicable_summary;
        } else if (auto u2 = bullet_value(line, "- **URL:**")) {
            open->url = *u2;
            last_field = &open->url;
        } else if (line[0] != '-' && line[0] != '<' && last_field) {
            // Hard-wrapped continuation of the previous bullet.
            *last_field += ' ';
            *last_field += line;
        }
    }
    return entries;
}

}  // namespace

Result<AnalysisSummary> extract_analysis_summary(const std::string& input) {
    using R = Result<AnalysisSummary>;
    const auto close = input.rfind(kCloseMark);
    const auto open = close == std::string::npos
                          ? std::string::npos
                          : input.rfind(kOpenMark, close);
    if (open == std::string::npos)
        return R::failure("missing_scope", "no <ANALYSIS_SUMMARY> scope found");
    const std::string region =
        input.substr(open + kOpenMark.size(), close - open - kOpenMark.size());

    AnalysisSummary out;
    if (region.find(kTrialsFound) != std::string::npos)
        out.scenario = Scenario::trials_found;
    else if (region.find(kNoneFound) != std::string::npos)
        out.scenario = Scenario::none_found;
    else if (region.find(kDemographics) != std::string::npos)
        out.scenario = Scenario::demographics_missing;
    else if (region.find(kSearchError) != std::string::npos)
        out.scenario = Scenario::search_error;
    else
        return R::failure("unparseable",
                          fmt::format("no scenario sentinel matched in scope: {}", region));

    const auto lines = text::split_lines(region);
    for (const auto& line : lines) {
        const auto at = line.find(kNameAnchor);
        if (at != std::string::npos) {
            out.patient_display_name = text::trim(line.substr(at + kNameAnchor.size()));
            break;
        }
    }

    if (out.scenario == Scenario::trials_found) {
        auto entries = parse_entries(lines);
        if (!entries) return {entries.error()};
        out.entries = std::move(entries).take();
        if (out.entries.empty())
            return R::failure("unparseable",
                              fmt::format("success scenario without trial entries: {}", region));
    }
    return out;
}

bool detect_done(const std::string& input) {
    bool in_fence = false;
    for (const auto& line : text::split_lines(input)) {
        if (is_fence_line(line)) {
            in_fence = !in_fence;
            continue;
        }
        if (!in_fence && line.find("<DONE>") != std::string::npos) return true;
    }
    return false;
}

}  // namespace ddose::parser
