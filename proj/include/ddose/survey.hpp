// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddose/result.hpp"

namespace ddose::survey {

// --- response data ---------------------------------------------------------------

enum class Domain {
    demographics,
    usage,
    usability_satisfaction,
    usefulness,
    impact_future,
};

std::string_view to_string(Domain domain);
Result<Domain> parse_domain(std::string_view name);

enum class ItemKind { likert, categorical };

struct Item {
    std::string id;
    Domain domain = Domain::demographics;
    ItemKind kind = ItemKind::likert;
    std::map<std::string, std::string> labels;  // categorical: code -> label
};

/// Respondent-by-item grid. Likert cells hold 1..5; categorical cells hold
/// coded answers; missing cells are explicitly absent.
struct ResponseMatrix {
    std::vector<std::string> respondents;
    std::vector<Item> items;
    std::vector<std::vector<std::optional<int>>> values;  // [respondent][item]

    Result<void> check() const;
    std::optional<std::size_t> item_index(const std::string& id) const;
    /// Indices of the domain's Likert items, in matrix order.
    std::vector<std::size_t> likert_items(Domain domain) const;
    /// Indices of every Likert item, in matrix order.
    std::vector<std::size_t> likert_items() const;
};

/// Loads the delimiter-separated response grid plus the sidecar manifest
/// that maps item ids to domains, kinds, and categorical label sets. Empty
/// cells are missing; every data column must be declared and vice versa.
Result<ResponseMatrix> load_survey(const std::filesystem::path& data_file,
                                   const std::filesystem::path& manifest_file);

// --- test results ----------------------------------------------------------------

struct TestResult {
    std::string statistic_name;  // "alpha" | "rho" | "U" | "H"
    double statistic_value = 0.0;
    std::optional<double> p_value;  // absent for alpha
    int n_used = 0;                 // reflects the deletion rule applied
    std::string method_note;
};

// --- operations ------------------------------------------------------------------

/// Cronbach's alpha over an explicit set of Likert items, listwise deletion
/// (the variance-of-sums formula needs complete rows). Errors:
/// "insufficient" (fewer than 2 items or 2 complete rows), "zero_variance"
/// (constant row sums make alpha undefined).
Result<TestResult> cronbach_alpha(const ResponseMatrix& matrix,
                                  const std::vector<std::size_t>& item_indices);
Result<TestResult> cronbach_alpha(const ResponseMatrix& matrix, Domain domain);

struct DomainScore {
    std::vector<std::optional<double>> per_respondent;  // mean of answered items
    double mean = 0.0;  // pooled over respondents with >=1 answered item
    double sd = 0.0;    // n-1 denominator; 0 when n < 2
    int n = 0;
};

Result<DomainScore> domain_score(const ResponseMatrix& matrix, Domain domain);

/// Spearman's rho over paired observations (pairwise deletion applied
/// here). Average ranks for ties; two-sided p via the t approximation with
/// n-2 degrees of freedom.
Result<TestResult> spearman_rho(const std::vector<std::optional<double>>& x,
                                const std::vector<std::optional<double>>& y);

struct MannWhitneyOptions {
    /// Skip the exact branch even when it applies (cross-validation seam).
    bool force_normal = false;
    /// Continuity correction on the normal branch. The uncorrected branch
    /// matches the two-group Kruskal-Wallis chi-square p exactly (z^2 is
    /// chi-square with 1 df), which is what the cross-check tests assert.
    bool continuity_correction = true;
};

/// U for group_a. Exact enumeration when n_a+n_b <= 10 with no ties,
/// otherwise a normal approximation with tie-corrected variance; the
/// method_note names the branch taken.
Result<TestResult> mann_whitney_u(const std::vector<double>& group_a,
                                  const std::vector<double>& group_b,
                                  const MannWhitneyOptions& options = {});

/// H with average ranks and the tie-correction divisor; p via the
/// chi-square approximation with k-1 df. All-identical input defines
/// H = 0, p = 1.
Result<TestResult> kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Sum of count * midpoint. The midpoint map is an explicit input; a
/// category without a midpoint is an error naming it.
Result<double> time_saved_total(const std::map<std::string, long>& counts,
                                const std::map<std::string, double>& midpoints);

// --- reporting -------------------------------------------------------------------

/// Renders the full Markdown analysis report: data overview, categorical
/// frequencies, per-domain scores with Cronbach's alpha, the time-savings
/// aggregate (with the reported figure alongside when the manifest carries
/// one), plus any comparisons and correlations the manifest requests.
Result<std::string> analyze(const ResponseMatrix& matrix, const nlohmann::json& manifest);

Result<std::string> analyze_files(const std::filesystem::path& data_file,
                                  const std::filesystem::path& manifest_file);

}  // namespace ddose::survey
