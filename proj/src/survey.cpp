// SPDX-License-Identifier: Apache-2.0
#include "ddose/survey.hpp"

#include <fmt/format.h>
#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ddose/text.hpp"

namespace ddose::survey {

namespace fs = std::filesystem;
using nlohmann::json;

// --- response data ---------------------------------------------------------------

std::string_view to_string(Domain domain) {
    switch (domain) {
        case Domain::demographics: return "demographics";
        case Domain::usage: return "usage";
        case Domain::usability_satisfaction: return "usability_satisfaction";
        case Domain::usefulness: return "usefulness";
        case Domain::impact_future: return "impact_future";
    }
    return "demographics";
}

Result<Domain> parse_domain(std::string_view name) {
    for (auto domain : {Domain::demographics, Domain::usage, Domain::usability_satisfaction,
                        Domain::usefulness, Domain::impact_future})
        if (to_string(domain) == name) return domain;
    return Result<Domain>::failure("unknown_domain",
                                   "not a survey domain: " + std::string(name));
}

Result<void> ResponseMatrix::check() const {
    if (values.size() != respondents.size())
        return Result<void>::failure("shape", "one value row per respondent required");
    std::set<std::string> ids;
    for (const auto& item : items)
        if (!ids.insert(item.id).second)
            return Result<void>::failure("shape", "duplicate item id: " + item.id);
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (values[r].size() != items.size())
            return Result<void>::failure("shape", "ragged row: " + respondents[r]);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& cell = values[r][i];
            if (cell && items[i].kind == ItemKind::likert && (*cell < 1 || *cell > 5))
                return Result<void>::failure(
                    "range", fmt::format("Likert cell out of 1..5: {} {}",
                                         respondents[r], items[i].id));
        }
    }
    return Result<void>::success();
}

std::optional<std::size_t> ResponseMatrix::item_index(const std::string& id) const {
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].id == id) return i;
    return std::nullopt;
}

std::vector<std::size_t> ResponseMatrix::likert_items(Domain domain) const {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].kind == ItemKind::likert && items[i].domain == domain)
            indices.push_back(i);
    return indices;
}

std::vector<std::size_t> ResponseMatrix::likert_items() const {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].kind == ItemKind::likert) indices.push_back(i);
    return indices;
}

// --- loading ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(std::string(text::trim(field)));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

Result<std::map<std::string, Item>> load_manifest_items(const fs::path& manifest_file,
                                                        json& manifest_out) {
    using R = Result<std::map<std::string, Item>>;
    std::ifstream in(manifest_file);
    if (!in) return R::failure("io", "cannot read manifest: " + manifest_file.string());
    manifest_out = json::parse(in, nullptr, false);
    if (manifest_out.is_discarded() || !manifest_out.is_object())
        return R::failure("malformed", "manifest is not a JSON object");
    if (!manifest_out.contains("items") || !manifest_out.at("items").is_array())
        return R::failure("malformed", "manifest needs an items array");

    std::map<std::string, Item> items;
    for (const auto& row : manifest_out.at("items")) {
        if (!row.is_object() || !row.contains("id") || !row.contains("domain"))
            return R::failure("malformed", "manifest item needs id and domain");
        Item item;
        item.id = row.at("id").get<std::string>();
        auto domain = parse_domain(row.at("domain").get<std::string>());
        if (!domain.ok()) return R(domain.error());
        item.domain = domain.value();
        const std::string kind = row.value("kind", "likert");
        if (kind != "likert" && kind != "categorical")
            return R::failure("malformed", "item kind must be likert or categorical");
        item.kind = kind == "likert" ? ItemKind::likert : ItemKind::categorical;
        if (row.contains("labels"))
            for (const auto& [code, label] : row.at("labels").items())
                item.labels[code] = label.get<std::string>();
        if (!items.emplace(item.id, std::move(item)).second)
            return R::failure("malformed", "duplicate manifest item: " +
                                               row.at("id").get<std::string>());
    }
    return items;
}

}  // namespace

Result<ResponseMatrix> load_survey(const fs::path& data_file, const fs::path& manifest_file) {
    using R = Result<ResponseMatrix>;
    json manifest;
    auto declared = load_manifest_items(manifest_file, manifest);
    if (!declared.ok()) return R(declared.error());

    std::ifstream in(data_file);
    if (!in) return R::failure("io", "cannot read survey data: " + data_file.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!text::trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) return R::failure("malformed", "survey data has no header row");

    const auto header = split_fields(lines.front());
    if (header.empty() || header.front() != "respondent_id")
        return R::failure("malformed", "first column must be respondent_id");

    ResponseMatrix matrix;
    std::set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto declared_item = declared.value().find(header[c]);
        if (declared_item == declared.value().end())
            return R::failure("unknown_item", "column not in manifest: " + header[c]);
        if (!seen.insert(header[c]).second)
            return R::failure("malformed", "duplicate column: " + header[c]);
        matrix.items.push_back(declared_item->second);
    }
    for (const auto& [id, _] : declared.value())
        if (!seen.count(id)) return R::failure("missing_item", "manifest item has no column: " + id);

    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto fields = split_fields(lines[l]);
        if (fields.size() != header.size())
            return R::failure("malformed",
                              fmt::format("row {} has {} fields, header has {}", l + 1,
                                          fields.size(), header.size()));
        matrix.respondents.push_back(fields.front());
        std::vector<std::optional<int>> row;
        for (std::size_t c = 1; c < fields.size(); ++c) {
            if (fields[c].empty()) {
                row.push_back(std::nullopt);
                continue;
            }
            int value = 0;
            try {
                std::size_t used = 0;
                value = std::stoi(fields[c], &used);
                if (used != fields[c].size()) throw std::invalid_argument(fields[c]);
            } catch (const std::exception&) {
                return R::failure("malformed", fmt::format("cell is not an integer: {} {}",
                                                           fields.front(), header[c]));
            }
            const auto& item = matrix.items[c - 1];
            if (item.kind == ItemKind::categorical && !item.labels.empty() &&
                !item.labels.count(std::to_string(value)))
                return R::failure("unknown_code",
                                  fmt::format("unlabelled code {} for {}", value, item.id));
            row.push_back(value);
        }
        matrix.values.push_back(std::move(row));
    }

    if (auto checked = matrix.check(); !checked.ok()) return R(checked.error());
    return matrix;
}

// --- shared numerics -------------------------------------------------------------

namespace {

/// Average (midrank) ranks, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    for (std::size_t at = 0; at < order.size();) {
        std::size_t end = at;
        while (end < order.size() && values[order[end]] == values[order[at]]) ++end;
        const double midrank = (static_cast<double>(at + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t k = at; k < end; ++k) ranks[order[k]] = midrank;
        at = end;
    }
    return ranks;
}

/// Sum of (t^3 - t) over tie groups.
double tie_term(const std::vector<double>& values) {
    std::map<double, long> groups;
    for (double v : values) groups[v] += 1;
    double total = 0.0;
    for (const auto& [_, t] : groups)
        total += static_cast<double>(t) * t * t - static_cast<double>(t);
    return total;
}

double sum_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

/// Raw sum of squared deviations (variance numerator).
double squared_deviations(const std::vector<double>& v) {
    const double mean = sum_of(v) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss;
}

}  // namespace

// --- Cronbach's alpha ------------------------------------------------------------

Result<TestResult> cronbach_alpha(const ResponseMatrix& matrix,
                                  const std::vector<std::size_t>& item_indices) {
    using R = Result<TestResult>;
    const std::size_t k = item_indices.size();
    if (k < 2) return R::failure("insufficient", "alpha needs at least 2 items");

    // Listwise deletion: the variance-of-sums formula needs complete rows.
    std::vector<std::vector<double>> columns(k);
    std::vector<double> row_sums;
    for (std::size_t r = 0; r < matrix.respondents.size(); ++r) {
        bool complete = true;
        for (std::size_t i : item_indices)
            if (!matrix.values[r][i]) complete = false;
        if (!complete) continue;
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double v = *matrix.values[r][item_indices[c]];
            columns[c].push_back(v);
            sum += v;
        }
        row_sums.push_back(sum);
    }
    if (row_sums.size() < 2)
        return R::failure("insufficient", "alpha needs at least 2 complete respondents");

    // Both numerator and denominator carry the same n-1, so raw sums of
    // squared deviations keep the ratio (and the alpha=1 identities) exact.
    double item_ss = 0.0;
    for (const auto& column : columns) item_ss += squared_deviations(column);
    const double total_ss = squared_deviations(row_sums);
    if (total_ss == 0.0)
        return R::failure("zero_variance", "row sums are constant; alpha is undefined");

    TestResult result;
    result.statistic_name = "alpha";
    result.statistic_value = (static_cast<double>(k) * (total_ss - item_ss)) /
                             (static_cast<double>(k - 1) * total_ss);
    result.n_used = static_cast<int>(row_sums.size());
    result.method_note = fmt::format(
        "listwise deletion within the item set; k={} items, n={} complete respondents", k,
        row_sums.size());
    return result;
}

Result<TestResult> cronbach_alpha(const ResponseMatrix& matrix, Domain domain) {
    return cronbach_alpha(matrix, matrix.likert_items(domain));
}

// --- domain scores ---------------------------------------------------------------

Result<DomainScore> domain_score(const ResponseMatrix& matrix, Domain domain) {
    using R = Result<DomainScore>;
    const auto indices = matrix.likert_items(domain);
    if (indices.empty())
        return R::failure("empty", fmt::format("domain {} has no Likert items",
                                               to_string(domain)));
    DomainScore score;
    std::vector<double> pooled;
    for (std::size_t r = 0; r < matrix.respondents.size(); ++r) {
        double sum = 0.0;
        int answered = 0;
        for (std::size_t i : indices)
            if (matrix.values[r][i]) {
                sum += *matrix.values[r][i];
                ++answered;
            }
        if (answered == 0) {
            score.per_respondent.push_back(std::nullopt);
        } else {
            score.per_respondent.push_back(sum / answered);
            pooled.push_back(sum / answered);
        }
    }
    score.n = static_cast<int>(pooled.size());
    if (score.n > 0) score.mean = sum_of(pooled) / score.n;
    if (score.n > 1) score.sd = std::sqrt(squared_deviations(pooled) / (score.n - 1));
    return score;
}

// --- Spearman --------------------------------------------------------------------

Result<TestResult> spearman_rho(const std::vector<std::optional<double>>& x,
                                const std::vector<std::optional<double>>& y) {
    using R = Result<TestResult>;
    if (x.size() != y.size())
        return R::failure("mismatch", "paired inputs differ in length");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] && y[i]) {
            xs.push_back(*x[i]);
            ys.push_back(*y[i]);
        }
    const int n = static_cast<int>(xs.size());
    if (n < 3) return R::failure("insufficient", "spearman needs n >= 3 complete pairs");

    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double ssx = squared_deviations(rx);
    const double ssy = squared_deviations(ry);
    if (ssx == 0.0 || ssy == 0.0)
        return R::failure("zero_variance", "an input has constant ranks");
    const double mx = sum_of(rx) / n;
    const double my = sum_of(ry) / n;
    double sxy = 0.0;
    for (int i = 0; i < n; ++i) sxy += (rx[i] - mx) * (ry[i] - my);
    const double rho = sxy / std::sqrt(ssx * ssy);

    TestResult result;
    result.statistic_name = "rho";
    result.statistic_value = rho;
    result.n_used = n;
    const double squared = rho * rho;
    if (1.0 - squared < 1e-15) {
        result.p_value = 0.0;
    } else {
        const double t = std::fabs(rho) * std::sqrt((n - 2) / (1.0 - squared));
        result.p_value = 2.0 * gsl_cdf_tdist_Q(t, n - 2);
    }
    result.method_note = fmt::format(
        "average ranks; two-sided p via t approximation (df={}); pairwise deletion", n - 2);
    return result;
}

// --- Mann-Whitney ----------------------------------------------------------------

namespace {

/// Exact two-sided p over all C(N, n_a) equally likely rank assignments.
double exact_mann_whitney_p(int n_a, int n_b, double u_observed) {
    const int total = n_a + n_b;
    const long long u_small =
        std::llround(std::min(u_observed, static_cast<double>(n_a) * n_b - u_observed));
    std::vector<int> mask(total, 0);
    std::fill(mask.end() - n_a, mask.end(), 1);  // ascending start for next_permutation
    long long hits = 0;
    long long arrangements = 0;
    do {
        long long rank_sum = 0;
        for (int i = 0; i < total; ++i)
            if (mask[i]) rank_sum += i + 1;
        const long long u = rank_sum - static_cast<long long>(n_a) * (n_a + 1) / 2;
        if (u <= u_small) ++hits;
        ++arrangements;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return std::min(1.0, (2.0 * static_cast<double>(hits)) / static_cast<double>(arrangements));
}

}  // namespace

Result<TestResult> mann_whitney_u(const std::vector<double>& group_a,
                                  const std::vector<double>& group_b,
                                  const MannWhitneyOptions& options) {
    using R = Result<TestResult>;
    if (group_a.empty() || group_b.empty())
        return R::failure("insufficient", "both groups must be non-empty");
    const int n_a = static_cast<int>(group_a.size());
    const int n_b = static_cast<int>(group_b.size());
    const int total = n_a + n_b;

    std::vector<double> combined = group_a;
    combined.insert(combined.end(), group_b.begin(), group_b.end());
    const auto ranks = average_ranks(combined);
    double rank_sum_a = 0.0;
    for (int i = 0; i < n_a; ++i) rank_sum_a += ranks[i];
    const double u = rank_sum_a - static_cast<double>(n_a) * (n_a + 1) / 2.0;

    const double ties = tie_term(combined);
    TestResult result;
    result.statistic_name = "U";
    result.statistic_value = u;
    result.n_used = total;

    if (!options.force_normal && total <= 10 && ties == 0.0) {
        result.p_value = exact_mann_whitney_p(n_a, n_b, u);
        result.method_note =
            fmt::format("exact enumeration over C({},{}) rank assignments", total, n_a);
        return result;
    }

    const double mu = static_cast<double>(n_a) * n_b / 2.0;
    const double variance =
        (static_cast<double>(n_a) * n_b / 12.0) *
        ((total + 1) - ties / (static_cast<double>(total) * (total - 1)));
    if (variance <= 0.0) {
        result.p_value = 1.0;
        result.method_note = "degenerate: zero rank variance (all observations tied)";
        return result;
    }
    double deviation = std::fabs(u - mu);
    if (options.continuity_correction) deviation = std::max(0.0, deviation - 0.5);
    const double z = deviation / std::sqrt(variance);
    result.p_value = std::min(1.0, 2.0 * gsl_cdf_ugaussian_Q(z));
    result.method_note =
        fmt::format("normal approximation, tie-corrected variance{}",
                    options.continuity_correction ? ", continuity correction" : "");
    return result;
}

// --- Kruskal-Wallis --------------------------------------------------------------

Result<TestResult> kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    using R = Result<TestResult>;
    if (groups.size() < 2)
        return R::failure("insufficient", "kruskal-wallis needs at least 2 groups");
    for (const auto& group : groups)
        if (group.empty())
            return R::failure("insufficient", "kruskal-wallis groups must be non-empty");

    std::vector<double> pooled;
    for (const auto& group : groups) pooled.insert(pooled.end(), group.begin(), group.end());
    const int total = static_cast<int>(pooled.size());
    const auto ranks = average_ranks(pooled);

    double rank_square_sum = 0.0;
    std::size_t at = 0;
    for (const auto& group : groups) {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < group.size(); ++i) rank_sum += ranks[at + i];
        rank_square_sum += rank_sum * rank_sum / static_cast<double>(group.size());
        at += group.size();
    }

    TestResult result;
    result.statistic_name = "H";
    result.n_used = total;
    const double n = total;
    const double ties = tie_term(pooled);
    const double divisor = 1.0 - ties / (n * n * n - n);
    if (divisor <= 0.0) {
        // All observations identical: no rank variation by definition.
        result.statistic_value = 0.0;
        result.p_value = 1.0;
        result.method_note = "degenerate: all observations tied; H defined as 0";
        return result;
    }
    // Single final division keeps hand-computable cases (e.g. 32/7) exact.
    double h = (12.0 * rank_square_sum - 3.0 * (n + 1) * n * (n + 1)) / (n * (n + 1));
    if (ties != 0.0) h /= divisor;
    result.statistic_value = h;
    result.p_value = gsl_cdf_chisq_Q(h, static_cast<double>(groups.size() - 1));
    result.method_note = fmt::format(
        "average ranks{}; chi-square approximation (df={})",
        ties != 0.0 ? ", tie-corrected" : "", groups.size() - 1);
    return result;
}

// --- time savings ----------------------------------------------------------------

Result<double> time_saved_total(const std::map<std::string, long>& counts,
                                const std::map<std::string, double>& midpoints) {
    double total = 0.0;
    for (const auto& [category, count] : counts) {
        if (count < 0)
            return Result<double>::failure("invalid", "negative count for " + category);
        const auto midpoint = midpoints.find(category);
        if (midpoint == midpoints.end())
            return Result<double>::failure("missing_midpoint",
                                           "no midpoint for category: " + category);
        total += static_cast<double>(count) * midpoint->second;
    }
    return total;
}

// --- reporting -------------------------------------------------------------------

namespace {

std::string label_for(const Item& item, int code) {
    const auto found = item.labels.find(std::to_string(code));
    return found == item.labels.end() ? std::to_string(code) : found->second;
}

std::string format_p(double p) { return fmt::format("{:.4g}", p); }

void render_frequencies(const ResponseMatrix& matrix, std::string& out) {
    for (std::size_t i = 0; i < matrix.items.size(); ++i) {
        const auto& item = matrix.items[i];
        if (item.kind != ItemKind::categorical) continue;
        out += fmt::format("### {}\n\n| Answer | Count | Share |\n| --- | --- | --- |\n",
                           item.id);
        std::map<int, long> counts;
        long answered = 0;
        for (std::size_t r = 0; r < matrix.respondents.size(); ++r)
            if (matrix.values[r][i]) {
                counts[*matrix.values[r][i]] += 1;
                ++answered;
            }
        for (const auto& [code, count] : counts)
            out += fmt::format("| {} | {} | {:.1f}% |\n", label_for(item, code), count,
                               100.0 * static_cast<double>(count) / answered);
        out += "\n";
    }
}

std::string alpha_cell(const Result<TestResult>& alpha) {
    if (alpha.ok()) return fmt::format("{:.4f}", alpha.value().statistic_value);
    return fmt::format("undefined ({})", alpha.error().code);
}

Result<void> render_domains(const ResponseMatrix& matrix, std::string& out) {
    out += "## Likert domains\n\n";
    out += "| Domain | Items | n | Mean | SD | Cronbach's alpha | Note |\n";
    out += "| --- | --- | --- | --- | --- | --- | --- |\n";
    for (auto domain : {Domain::usability_satisfaction, Domain::usefulness,
                        Domain::impact_future, Domain::usage}) {
        const auto indices = matrix.likert_items(domain);
        if (indices.empty()) continue;
        auto score = domain_score(matrix, domain);
        if (!score.ok()) return score.error();
        const auto alpha = cronbach_alpha(matrix, indices);
        out += fmt::format("| {} | {} | {} | {:.4f} | {:.4f} | {} | {} |\n",
                           to_string(domain), indices.size(), score.value().n,
                           score.value().mean, score.value().sd, alpha_cell(alpha),
                           alpha.ok() ? alpha.value().method_note : alpha.error().message);
    }
    const auto all = matrix.likert_items();
    if (all.size() >= 2) {
        double sum = 0.0;
        long cells = 0;
        std::vector<double> per_respondent;
        for (std::size_t r = 0; r < matrix.respondents.size(); ++r) {
            double row_sum = 0.0;
            int answered = 0;
            for (std::size_t i : all)
                if (matrix.values[r][i]) {
                    row_sum += *matrix.values[r][i];
                    ++answered;
                }
            if (answered > 0) per_respondent.push_back(row_sum / answered);
            sum += row_sum;
            cells += answered;
        }
        const double mean =
            per_respondent.empty()
                ? 0.0
                : sum_of(per_respondent) / static_cast<double>(per_respondent.size());
        const double sd = per_respondent.size() > 1
                              ? std::sqrt(squared_deviations(per_respondent) /
                                          (static_cast<double>(per_respondent.size()) - 1.0))
                              : 0.0;
        const auto alpha = cronbach_alpha(matrix, all);
        out += fmt::format("| overall (all Likert items) | {} | {} | {:.4f} | {:.4f} | {} | {} |\n",
                           all.size(), per_respondent.size(), mean, sd, alpha_cell(alpha),
                           alpha.ok() ? alpha.value().method_note : alpha.error().message);
        (void)cells;
    }
    out += "\n";
    return Result<void>::success();
}

Result<void> render_time_saved(const ResponseMatrix& matrix, const json& spec,
                               std::string& out) {
    const std::string item_id = spec.at("item").get<std::string>();
    const auto index = matrix.item_index(item_id);
    if (!index)
        return Result<void>::failure("unknown_item", "time_saved item not found: " + item_id);
    const auto& item = matrix.items[*index];

    std::map<std::string, long> counts;
    for (const auto& [_, label] : item.labels) counts[label] = 0;
    for (std::size_t r = 0; r < matrix.respondents.size(); ++r)
        if (matrix.values[r][*index]) counts[label_for(item, *matrix.values[r][*index])] += 1;

    std::map<std::string, double> midpoints;
    for (const auto& [label, minutes] : spec.at("midpoints").items())
        midpoints[label] = minutes.get<double>();

    auto total = time_saved_total(counts, midpoints);
    if (!total.ok()) return total.error();

    out += "## Time savings\n\n| Category | Count | Midpoint (minutes) |\n| --- | --- | --- |\n";
    // Rows in code order so the table reads none -> most.
    for (const auto& [code, label] : item.labels)
        out += fmt::format("| {} | {} | {:g} |\n", label, counts[label], midpoints[label]);
    out += fmt::format("\nComputed total: {:.1f} minutes per day.\n", total.value());
    if (spec.contains("reported_total"))
        out += fmt::format(
            "Reported total alongside: {:g} minutes per day. The computed figure follows "
            "the explicit midpoint map above; the midpoints behind the reported figure are "
            "not stated, so the two are presented side by side rather than reconciled.\n",
            spec.at("reported_total").get<double>());
    out += "\n";
    return Result<void>::success();
}

struct GroupedValues {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> groups;
};

Result<GroupedValues> group_values(const ResponseMatrix& matrix, const json& spec) {
    using R = Result<GroupedValues>;
    const auto item = matrix.item_index(spec.at("item").get<std::string>());
    const auto by = matrix.item_index(spec.at("group_by").get<std::string>());
    if (!item || !by)
        return R::failure("unknown_item", "comparison names an unknown item");
    const auto& group_item = matrix.items[*by];

    GroupedValues grouped;
    auto group_name = [&](int code) {
        const std::string key = std::to_string(code);
        if (spec.contains("groups") && spec.at("groups").contains(key))
            return spec.at("groups").at(key).get<std::string>();
        return label_for(group_item, code);
    };
    // Group order follows the label code order for deterministic output.
    for (const auto& [code, _] : group_item.labels) {
        const std::string name = group_name(std::stoi(code));
        if (!grouped.groups.count(name)) {
            grouped.order.push_back(name);
            grouped.groups[name] = {};
        }
    }
    for (std::size_t r = 0; r < matrix.respondents.size(); ++r) {
        // Pairwise deletion: only respondents with both answers count.
        if (!matrix.values[r][*item] || !matrix.values[r][*by]) continue;
        grouped.groups[group_name(*matrix.values[r][*by])].push_back(
            static_cast<double>(*matrix.values[r][*item]));
    }
    std::erase_if(grouped.order,
                  [&](const std::string& name) { return grouped.groups.at(name).empty(); });
    return grouped;
}

Result<void> render_comparisons(const ResponseMatrix& matrix, const json& comparisons,
                                std::string& out) {
    out += "## Comparisons\n\n";
    for (const auto& spec : comparisons) {
        const std::string name = spec.at("name").get<std::string>();
        const std::string test = spec.at("test").get<std::string>();
        auto grouped = group_values(matrix, spec);
        if (!grouped.ok()) return grouped.error();
        const auto& order = grouped.value().order;

        std::string sizes;
        for (const auto& group : order)
            sizes += fmt::format("{}{} (n={})", sizes.empty() ? "" : ", ", group,
                                 grouped.value().groups.at(group).size());

        if (test == "mann_whitney") {
            if (order.size() != 2) {
                out += fmt::format("- {}: skipped; mann_whitney needs exactly 2 groups, got {}.\n",
                                   name, order.size());
                continue;
            }
            auto result = mann_whitney_u(grouped.value().groups.at(order[0]),
                                         grouped.value().groups.at(order[1]));
            if (!result.ok()) return result.error();
            out += fmt::format("- {}: U = {:g}, p = {}, n = {}. Groups: {}. Method: {}.\n",
                               name, result.value().statistic_value,
                               format_p(*result.value().p_value), result.value().n_used,
                               sizes, result.value().method_note);
        } else if (test == "kruskal_wallis") {
            std::vector<std::vector<double>> groups;
            for (const auto& group : order) groups.push_back(grouped.value().groups.at(group));
            auto result = kruskal_wallis(groups);
            if (!result.ok()) return result.error();
            out += fmt::format("- {}: H = {:.4f}, p = {}, n = {}. Groups: {}. Method: {}.\n",
                               name, result.value().statistic_value,
                               format_p(*result.value().p_value), result.value().n_used,
                               sizes, result.value().method_note);
        } else {
            return Result<void>::failure("config", "unknown comparison test: " + test);
        }
    }
    out += "\n";
    return Result<void>::success();
}

Result<void> render_correlations(const ResponseMatrix& matrix, const json& correlations,
                                 std::string& out) {
    out += "## Correlations\n\n";
    for (const auto& spec : correlations) {
        const std::string name = spec.at("name").get<std::string>();
        const auto x = matrix.item_index(spec.at("x").get<std::string>());
        const auto y = matrix.item_index(spec.at("y").get<std::string>());
        if (!x || !y)
            return Result<void>::failure("unknown_item", "correlation names an unknown item");
        std::vector<std::optional<double>> xs, ys;
        for (std::size_t r = 0; r < matrix.respondents.size(); ++r) {
            const auto& cx = matrix.values[r][*x];
            const auto& cy = matrix.values[r][*y];
            xs.push_back(cx ? std::optional<double>(*cx) : std::nullopt);
            ys.push_back(cy ? std::optional<double>(*cy) : std::nullopt);
        }
        auto result = spearman_rho(xs, ys);
        if (!result.ok()) {
            out += fmt::format("- {}: undefined ({}).\n", name, result.error().code);
            continue;
        }
        out += fmt::format("- {}: rho = {:.4f}, p = {}, n = {}. Method: {}.\n", name,
                           result.value().statistic_value, format_p(*result.value().p_value),
                           result.value().n_used, result.value().method_note);
    }
    out += "\n";
    return Result<void>::success();
}

}  // namespace

Result<std::string> analyze(const ResponseMatrix& matrix, const json& manifest) {
    using R = Result<std::string>;
    static const std::set<std::string> known = {"items", "time_saved", "comparisons",
                                                "correlations"};
    for (const auto& [key, _] : manifest.items())
        if (!known.count(key))
            return R::failure("unknown_key", "unknown manifest key: " + key);

    long missing = 0;
    for (const auto& row : matrix.values)
        for (const auto& cell : row)
            if (!cell) ++missing;
    const long cells = static_cast<long>(matrix.respondents.size() * matrix.items.size());
    std::size_t likert_count = matrix.likert_items().size();

    std::string out = "# Survey Analysis\n\n";
    out += fmt::format(
        "Respondents: {}. Items: {} ({} Likert, {} categorical). Missing cells: {} of {}.\n\n",
        matrix.respondents.size(), matrix.items.size(), likert_count,
        matrix.items.size() - likert_count, missing, cells);

    out += "## Categorical frequencies\n\n";
    render_frequencies(matrix, out);

    if (auto rendered = render_domains(matrix, out); !rendered.ok()) return R(rendered.error());

    try {
        if (manifest.contains("time_saved"))
            if (auto rendered = render_time_saved(matrix, manifest.at("time_saved"), out);
                !rendered.ok())
                return R(rendered.error());
        if (manifest.contains("comparisons"))
            if (auto rendered = render_comparisons(matrix, manifest.at("comparisons"), out);
                !rendered.ok())
                return R(rendered.error());
        if (manifest.contains("correlations"))
            if (auto rendered = render_correlations(matrix, manifest.at("correlations"), out);
                !rendered.ok())
                return R(rendered.error());
    } catch (const json::exception& e) {
        return R::failure("malformed", std::string("manifest: ") + e.what());
    }
    return out;
}

Result<std::string> analyze_files(const fs::path& data_file, const fs::path& manifest_file) {
    auto matrix = load_survey(data_file, manifest_file);
    if (!matrix.ok()) return Result<std::string>(matrix.error());
    std::ifstream in(manifest_file);
    const json manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded())
        return Result<std::string>::failure("malformed", "manifest is not valid JSON");
    return analyze(matrix.value(), manifest);
}

}  // namespace ddose::survey
