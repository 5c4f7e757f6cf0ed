// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ddose/domain.hpp"

namespace ddose::registry {

enum class TrialStatus { recruiting, active_not_recruiting, completed, other };
enum class TrialSex { all, female, male };
enum class Polarity { inclusion, exclusion };

std::string_view to_string(TrialStatus);
std::string_view to_string(TrialSex);
std::string_view to_string(Polarity);
Result<TrialStatus> parse_trial_status(std::string_view);
Result<TrialSex> parse_trial_sex(std::string_view);
Result<Polarity> parse_polarity(std::string_view);

// --- criterion predicates (closed set) -----------------------------------

struct AgeRangePredicate {
    std::optional<double> min_years;
    std::optional<double> max_years;
    bool operator==(const AgeRangePredicate&) const = default;
};
struct SexPredicate {
    TrialSex sex = TrialSex::all;
    bool operator==(const SexPredicate&) const = default;
};
struct DiagnosisMatchPredicate {
    std::string term;
    bool operator==(const DiagnosisMatchPredicate&) const = default;
};
struct RequiresPriorTreatmentPredicate {
    std::string term;
    bool operator==(const RequiresPriorTreatmentPredicate&) const = default;
};
struct ExcludesPriorTreatmentPredicate {
    std::string term;
    bool operator==(const ExcludesPriorTreatmentPredicate&) const = default;
};
struct LabThresholdPredicate {
    std::string analyte;
    std::string op;  // one of < <= > >=
    double value = 0;
    std::string unit;
    bool operator==(const LabThresholdPredicate&) const = default;
};
struct EcogMaxPredicate {
    int max = 0;
    bool operator==(const EcogMaxPredicate&) const = default;
};
struct FreeTextPredicate {
    std::string text;
    bool operator==(const FreeTextPredicate&) const = default;
};

using CriterionPredicate =
    std::variant<AgeRangePredicate, SexPredicate, DiagnosisMatchPredicate,
                 RequiresPriorTreatmentPredicate, ExcludesPriorTreatmentPredicate,
                 LabThresholdPredicate, EcogMaxPredicate, FreeTextPredicate>;

struct Criterion {
    std::string criterion_id;
    std::string description;
    Polarity polarity = Polarity::inclusion;
    CriterionPredicate predicate;
    std::optional<std::string> applies_to_site;
    bool operator==(const Criterion&) const = default;
};

struct TrialRecord {
    std::string nct_id;  // "NCT" + 8 digits
    std::string title;
    TrialStatus overall_status = TrialStatus::other;
    std::vector<std::string> locations;
    std::vector<std::string> conditions;
    std::vector<std::string> interventions;
    std::optional<double> min_age_years;
    std::optional<double> max_age_years;
    TrialSex sex = TrialSex::all;
    std::vector<Criterion> criteria;
    std::string url;  // non-empty
    bool operator==(const TrialRecord&) const = default;
};

struct TrialQuery {
    std::vector<std::string> condition_terms;  // >= 1
    std::vector<std::string> intervention_terms;
    std::optional<double> age_years;
    std::optional<TrialSex> sex;
    std::string institution;
    // status filter is fixed to recruiting
};

bool valid_nct_id(std::string_view id);

/// The frozen matching semantics shared by both backends: recruiting status,
/// institution in locations, per-bound inclusive age check (a missing bound
/// never excludes), trial sex `all` matches any query sex, at least one
/// condition term matches AND (no intervention terms given OR at least one
/// matches). Term matching is whole-token (text::token_phrase_match).
bool matches_query(const TrialRecord& trial, const TrialQuery& query);

nlohmann::json to_json(const Criterion&);
nlohmann::json to_json(const TrialRecord&);
Result<Criterion> criterion_from_json(const nlohmann::json&);
Result<TrialRecord> trial_from_json(const nlohmann::json&);

// --- backends -------------------------------------------------------------

/// Search failures surface as error code "search_error": a failed search is
/// a distinct outcome, never an empty result list.
class RegistryClient {
public:
    virtual ~RegistryClient() = default;
    virtual Result<std::vector<TrialRecord>> search_trials(const TrialQuery& query) = 0;
    virtual Result<TrialRecord> get_trial(const std::string& nct_id) = 0;
};

/// Local file-backed registry; the test path.
class FileRegistry : public RegistryClient {
public:
    static Result<FileRegistry> load(const std::filesystem::path& trials_file);

    Result<std::vector<TrialRecord>> search_trials(const TrialQuery& query) override;
    Result<TrialRecord> get_trial(const std::string& nct_id) override;

    const std::vector<TrialRecord>& trials() const { return trials_; }

private:
    std::vector<TrialRecord> trials_;
    std::map<std::string, size_t> by_id_;
};

/// HTTP client shaped like a minimal clinicaltrials.gov v2 query subset.
/// Responses are re-filtered locally with matches_query, so a permissive
/// server cannot widen results.
class HttpRegistry : public RegistryClient {
public:
    struct Options {
        std::string host;  // "127.0.0.1"
        int port = 80;
        int timeout_seconds = 10;
        int max_in_flight = 4;
        int page_size = 50;
    };
    explicit HttpRegistry(Options options);
    ~HttpRegistry() override;

    Result<std::vector<TrialRecord>> search_trials(const TrialQuery& query) override;
    Result<TrialRecord> get_trial(const std::string& nct_id) override;

    /// Hard cap on trials accumulated across pagination for one query.
    static constexpr int kMaxTrialsPerQuery = 200;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ddose::registry
