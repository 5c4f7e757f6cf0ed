// SPDX-License-Identifier: Apache-2.0
#include "ddose/trial_matcher.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "ddose/text.hpp"

namespace ddose::matcher {

using nlohmann::json;
using registry::TrialRecord;

std::string_view to_string(EventCategory c) {
    switch (c) {
        case EventCategory::diagnostic: return "diagnostic";
        case EventCategory::lab: return "lab";
        case EventCategory::staging: return "staging";
        case EventCategory::performance: return "performance";
        case EventCategory::symptom: return "symptom";
        case EventCategory::comorbidity: return "comorbidity";
        case EventCategory::biomarker: return "biomarker";
        case EventCategory::simulation: return "simulation";
        case EventCategory::surgery: return "surgery";
        case EventCategory::planning: return "planning";
        case EventCategory::treatment: return "treatment";
        case EventCategory::other: return "other";
    }
    return "other";
}

std::string_view to_string(CriterionStatus s) {
    switch (s) {
        case CriterionStatus::met: return "met";
        case CriterionStatus::not_met: return "not_met";
        case CriterionStatus::unknown: return "unknown";
        case CriterionStatus::not_applicable: return "not_applicable";
    }
    return "unknown";
}

// --- timeline -------------------------------------------------------------

namespace {

std::string staging_suffix(const domain::TnmStaging& s) {
    std::string out;
    if (s.t) out += fmt::format(" {}", domain::to_string(*s.t));
    if (s.n) out += fmt::format(" {}", domain::to_string(*s.n));
    if (s.m) out += fmt::format(" {}", domain::to_string(*s.m));
    return out;
}

}  // namespace

Timeline build_timeline(const domain::PatientChart& chart) {
    Timeline tl;
    auto add = [&tl](const Date& date, EventCategory cat, std::string desc) {
        tl.events.push_back({date, cat, std::move(desc)});
    };

    for (const auto& r : chart.radiology_reports)
        add(r.date, EventCategory::diagnostic, fmt::format("imaging: {}", r.title));
    for (const auto& p : chart.pathology_reports)
        add(p.date, EventCategory::diagnostic, fmt::format("pathology: {}", p.title));
    for (const auto& lab : chart.labs)
        add(lab.date, EventCategory::lab,
            fmt::format("lab: {} {:g} {}", lab.analyte, lab.value, lab.unit));
    for (const auto& d : chart.diagnoses)
        add(d.onset_date, EventCategory::staging,
            fmt::format("diagnosis: {} {}{}", d.site, d.histology,
                        staging_suffix(d.staging)));
    for (const auto& m : chart.medications)
        add(m.start_date, EventCategory::treatment,
            fmt::format("medication started: {}", m.name));
    for (const auto& t : chart.treatments) {
        // A course with nothing delivered and not underway is still a plan.
        const bool planned = !t.dose_gy_delivered && !t.fractions_delivered && !t.current;
        add(t.start_date, planned ? EventCategory::planning : EventCategory::treatment,
            fmt::format("{}: {} to {}", planned ? "treatment planned" : "treatment started",
                        t.modality, t.site));
    }
    for (const auto& pr : chart.eligibility_facts.prior_radiation)
        add(Date{pr.year, 1, 1}, EventCategory::treatment,
            fmt::format("prior radiation {:g} Gy ({})", pr.dose_gy, pr.year));
    for (const auto& [specialty, docs] : chart.notes)
        for (const auto& doc : docs)
            add(doc.date,
                specialty == domain::Specialty::surgery ? EventCategory::surgery
                                                        : EventCategory::other,
                fmt::format("note ({}): {}", domain::to_string(specialty), doc.title));
    for (const auto& a : chart.appointments) {
        EventCategory cat = EventCategory::other;
        if (a.visit_kind == domain::VisitKind::simulation) cat = EventCategory::simulation;
        if (a.visit_kind == domain::VisitKind::treatment) cat = EventCategory::treatment;
        add(a.start_time.date, cat, fmt::format("appointment: {}", a.raw_type_label));
    }

    std::sort(tl.events.begin(), tl.events.end(),
              [](const TimelineEvent& a, const TimelineEvent& b) {
                  if (a.date != b.date) return a.date < b.date;
                  if (a.category != b.category) return a.category < b.category;
                  return a.description < b.description;
              });
    return tl;
}

// --- lexicon ----------------------------------------------------------------

Result<Lexicon> Lexicon::load(const std::filesystem::path& file) {
    using R = Result<Lexicon>;
    std::ifstream in(file);
    if (!in) return R::failure("io", fmt::format("cannot open {}", file.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        return R::failure("malformed", fmt::format("{}: {}", file.string(), e.what()));
    }
    Lexicon lex;
    try {
        for (const auto& [site, entry] : doc.at("sites").items()) {
            SiteEntry se;
            se.conditions = entry.at("conditions").get<std::vector<std::string>>();
            se.interventions = entry.at("interventions").get<std::vector<std::string>>();
            lex.sites[text::to_lower(site)] = std::move(se);
        }
        for (const auto& [term, syns] : doc.at("synonyms").items())
            lex.synonyms[text::to_lower(term)] = syns.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        return R::failure("malformed", fmt::format("{}: {}", file.string(), e.what()));
    }
    return lex;
}

// --- keywords ----------------------------------------------------------------

RankedKeywords generate_keywords(const Timeline&, const domain::PatientChart& chart,
                                 const Lexicon& lexicon) {
    // Most recent onset first: the active problem sits near the end of the
    // timeline.
    std::vector<const domain::DiagnosisDetail*> ordered;
    for (const auto& d : chart.diagnoses) ordered.push_back(&d);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return b->onset_date < a->onset_date; });

    RankedKeywords out;
    std::set<std::string> seen_conditions;
    std::set<std::string> seen_interventions;
    auto push = [](std::vector<RankedTerm>& list, std::set<std::string>& seen,
                   const std::string& raw) {
        const std::string term = text::to_lower(raw);
        if (!seen.insert(term).second) return;
        list.push_back({term, static_cast<int>(list.size()) + 1});
    };

    for (const auto* d : ordered) {
        const std::string site = text::to_lower(d->site);
        const auto entry = lexicon.sites.find(site);
        if (entry == lexicon.sites.end()) {
            push(out.conditions, seen_conditions, site + " cancer");
            continue;
        }
        for (const auto& c : entry->second.conditions) push(out.conditions, seen_conditions, c);
        for (const auto& i : entry->second.interventions)
            push(out.interventions, seen_interventions, i);
    }
    return out;
}

Result<std::vector<CombinationQuery>> make_combinations(const RankedKeywords& keywords) {
    using R = Result<std::vector<CombinationQuery>>;
    if (keywords.conditions.empty())
        return R::failure("no_conditions", "no condition keywords to combine");

    std::vector<CombinationQuery> combos;
    for (const auto& c : keywords.conditions)
        for (const auto& i : keywords.interventions)
            combos.push_back({{c.term}, {i.term}, 0});
    if (combos.size() < 10)
        for (const auto& c : keywords.conditions) combos.push_back({{c.term}, {}, 0});
    for (size_t k = 0; k < combos.size(); ++k) combos[k].rank = static_cast<int>(k) + 1;
    return combos;
}

CombinationQuery expand_synonyms(const CombinationQuery& combo, const Lexicon& lexicon) {
    auto expand = [&lexicon](const std::vector<std::string>& heads) {
        std::vector<std::string> out;
        std::set<std::string> seen;
        auto push = [&](const std::string& raw) {
            const std::string term = text::to_lower(raw);
            if (seen.insert(term).second) out.push_back(term);
        };
        for (const auto& head : heads) {
            push(head);
            const auto found = lexicon.synonyms.find(text::to_lower(head));
            if (found == lexicon.synonyms.end()) continue;
            for (const auto& syn : found->second) push(syn);
        }
        return out;
    };
    CombinationQuery out;
    out.condition_terms = expand(combo.condition_terms);
    out.intervention_terms = expand(combo.intervention_terms);
    out.rank = combo.rank;
    return out;
}

// --- iterative search ----------------------------------------------------------

SearchOutcome iterative_search(const std::vector<CombinationQuery>& combos,
                               registry::RegistryClient& client,
                               const Demographics& demographics,
                               const std::string& institution) {
    SearchOutcome out;
    if (!demographics.age_years || !demographics.sex) {
        out.kind = SearchOutcome::Kind::demographics_missing;
        return out;
    }

    std::set<std::string> seen;
    for (const auto& combo : combos) {
        if (out.pool.searches_performed >= kMaxSearches) break;
        if (out.pool.searches_performed >= kMinSearches &&
            out.pool.trials.size() >= kStopThreshold)
            break;

        registry::TrialQuery query;
        query.condition_terms = combo.condition_terms;
        query.intervention_terms = combo.intervention_terms;
        query.age_years = *demographics.age_years;
        query.sex = *demographics.sex;
        query.institution = institution;

        auto res = client.search_trials(query);
        ++out.pool.searches_performed;
        if (!res) {
            out.kind = SearchOutcome::Kind::search_error;
            out.error = res.error();
            return out;
        }
        int new_unique = 0;
        for (auto& trial : res.value()) {
            if (!seen.insert(trial.nct_id).second) continue;
            ++new_unique;
            if (out.pool.trials.size() < kPoolCap) out.pool.trials.push_back(std::move(trial));
        }
        out.pool.per_search_counts.emplace_back(new_unique,
                                                static_cast<int>(out.pool.trials.size()));
    }
    out.kind = SearchOutcome::Kind::pool;
    return out;
}

// --- criterion evaluation --------------------------------------------------------

namespace {

using registry::Criterion;
using registry::Polarity;

/// Tri-state predicate outcome before polarity is applied.
enum class Holds { yes, no, unknown };

struct Verdict {
    Holds holds = Holds::unknown;
    std::string evidence;
};

std::string format_bound(double v) { return fmt::format("{:g}", v); }

/// The treatment-history universe: courses, prior radiation, prior
/// systemic agents, and medications, each rendered as a searchable string.
std::vector<std::string> treatment_history(const domain::PatientChart& chart) {
    std::vector<std::string> out;
    for (const auto& t : chart.treatments)
        out.push_back(fmt::format("{} to {} ({})", t.modality, t.site, t.start_date.year));
    for (const auto& pr : chart.eligibility_facts.prior_radiation)
        out.push_back(fmt::format("radiation {:g} Gy ({})", pr.dose_gy, pr.year));
    for (const auto& s : chart.eligibility_facts.prior_systemic_therapies) out.push_back(s);
    for (const auto& m : chart.medications) out.push_back(m.name);
    return out;
}

/// Bag-of-words match: every term token (a leading "prior" is the
/// predicate's own word, not a history word) appears among the item's
/// tokens.
bool history_item_matches(const std::string& term, const std::string& item) {
    auto needle = text::tokenize(term);
    if (!needle.empty() && needle.front() == "prior") needle.erase(needle.begin());
    if (needle.empty()) return false;
    const auto hay = text::tokenize(item);
    for (const auto& tok : needle)
        if (std::find(hay.begin(), hay.end(), tok) == hay.end()) return false;
    return true;
}

Verdict eval_prior_treatment(const std::string& term, const domain::PatientChart& chart) {
    const auto history = treatment_history(chart);
    if (history.empty())
        return {Holds::unknown, "no treatment history recorded in chart"};
    for (const auto& item : history)
        if (history_item_matches(term, item))
            return {Holds::yes, fmt::format("history lists '{}'", item)};
    return {Holds::no, fmt::format("no '{}' in treatment history", term)};
}

Verdict eval_predicate(const registry::CriterionPredicate& predicate,
                       const domain::PatientChart& chart, const Date& as_of) {
    using namespace registry;
    Verdict v;
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, AgeRangePredicate>) {
                const auto age = chart.age_years_on(as_of);
                if (!age) {
                    v = {Holds::unknown, "date of birth not available"};
                    return;
                }
                const bool above = !p.min_years || *age >= *p.min_years;
                const bool below = !p.max_years || *age <= *p.max_years;
                if (p.min_years && p.max_years) {
                    v.holds = above && below ? Holds::yes : Holds::no;
                    v.evidence = fmt::format("age {} {} [{},{}]", *age,
                                             v.holds == Holds::yes ? "within" : "outside",
                                             format_bound(*p.min_years),
                                             format_bound(*p.max_years));
                } else if (p.min_years) {
                    v.holds = above ? Holds::yes : Holds::no;
                    v.evidence = fmt::format("age {} {} minimum {}", *age,
                                             above ? "at or above" : "below",
                                             format_bound(*p.min_years));
                } else {
                    v.holds = below ? Holds::yes : Holds::no;
                    v.evidence = fmt::format("age {} {} maximum {}", *age,
                                             below ? "at or below" : "above",
                                             format_bound(*p.max_years));
                }
            } else if constexpr (std::is_same_v<P, SexPredicate>) {
                if (chart.sex == domain::Sex::unknown) {
                    v = {Holds::unknown, "sex not recorded in chart"};
                    return;
                }
                const bool match = (p.sex == TrialSex::female) ==
                                   (chart.sex == domain::Sex::female);
                v.holds = match ? Holds::yes : Holds::no;
                v.evidence = fmt::format("sex {} {} requirement {}",
                                         domain::to_string(chart.sex),
                                         match ? "matches" : "does not match",
                                         registry::to_string(p.sex));
            } else if constexpr (std::is_same_v<P, DiagnosisMatchPredicate>) {
                if (chart.diagnoses.empty()) {
                    v = {Holds::unknown, "no diagnosis recorded in chart"};
                    return;
                }
                for (const auto& d : chart.diagnoses) {
                    const auto label = fmt::format("{} {}", d.site, d.histology);
                    if (text::token_phrase_match(p.term, label)) {
                        v.holds = Holds::yes;
                        v.evidence = fmt::format("diagnosis '{}' matches '{}'", label, p.term);
                        return;
                    }
                }
                v.holds = Holds::no;
                v.evidence = fmt::format("no diagnosis matching '{}'", p.term);
            } else if constexpr (std::is_same_v<P, RequiresPriorTreatmentPredicate>) {
                v = eval_prior_treatment(p.term, chart);
            } else if constexpr (std::is_same_v<P, ExcludesPriorTreatmentPredicate>) {
                v = eval_prior_treatment(p.term, chart);
            } else if constexpr (std::is_same_v<P, LabThresholdPredicate>) {
                const domain::LabResult* latest = nullptr;
                for (const auto& lab : chart.labs)
                    if (lab.analyte == p.analyte && (!latest || !(lab.date < latest->date)))
                        latest = &lab;
                if (!latest) {
                    v = {Holds::unknown, fmt::format("no {} value recorded", p.analyte)};
                    return;
                }
                bool holds = false;
                if (p.op == "<") holds = latest->value < p.value;
                if (p.op == "<=") holds = latest->value <= p.value;
                if (p.op == ">") holds = latest->value > p.value;
                if (p.op == ">=") holds = latest->value >= p.value;
                v.holds = holds ? Holds::yes : Holds::no;
                v.evidence = fmt::format("{} {:g} {} {} {} {}", p.analyte, latest->value,
                                         latest->unit, holds ? "satisfies" : "violates", p.op,
                                         format_bound(p.value));
            } else if constexpr (std::is_same_v<P, EcogMaxPredicate>) {
                const auto& ecog = chart.eligibility_facts.ecog;
                if (!ecog) {
                    v = {Holds::unknown, "no ECOG recorded in chart"};
                    return;
                }
                v.holds = *ecog <= p.max ? Holds::yes : Holds::no;
                v.evidence = fmt::format("ECOG {} {} maximum {}", *ecog,
                                         *ecog <= p.max ? "within" : "exceeds", p.max);
            } else {
                v = {Holds::unknown,
                     fmt::format("free-text criterion requires clinical review: {}", p.text)};
            }
        },
        predicate);
    return v;
}

bool site_applies(const std::string& site, const domain::PatientChart& chart) {
    for (const auto& d : chart.diagnoses)
        if (text::token_phrase_match(site, d.site)) return true;
    return false;
}

}  // namespace

std::vector<CriterionReport> evaluate_eligibility(const TrialRecord& trial,
                                                  const domain::PatientChart& chart,
                                                  const Date& as_of) {
    std::vector<CriterionReport> reports;
    reports.reserve(trial.criteria.size());
    for (const auto& c : trial.criteria) {
        CriterionReport report;
        report.criterion_id = c.criterion_id;
        if (c.applies_to_site && !site_applies(*c.applies_to_site, chart)) {
            report.status = CriterionStatus::not_applicable;
            report.evidence = fmt::format("no {} diagnosis on chart", *c.applies_to_site);
            reports.push_back(std::move(report));
            continue;
        }
        const Verdict v = eval_predicate(c.predicate, chart, as_of);
        if (v.holds == Holds::unknown) {
            report.status = CriterionStatus::unknown;
        } else if (c.polarity == Polarity::inclusion) {
            report.status = v.holds == Holds::yes ? CriterionStatus::met : CriterionStatus::not_met;
        } else {
            // Exclusions are met when the disqualifying condition is absent.
            report.status = v.holds == Holds::yes ? CriterionStatus::not_met : CriterionStatus::met;
        }
        report.evidence = v.evidence;
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<ShortlistEntry> filter_pool(
    const TrialPool& pool,
    const std::map<std::string, std::vector<CriterionReport>>& reports_by_trial) {
    std::vector<ShortlistEntry> shortlist;
    for (const auto& trial : pool.trials) {
        const auto found = reports_by_trial.find(trial.nct_id);
        if (found == reports_by_trial.end())
            throw std::invalid_argument(
                fmt::format("pool trial {} has no criterion reports", trial.nct_id));
        const bool excluded =
            std::any_of(found->second.begin(), found->second.end(), [](const CriterionReport& r) {
                return r.status == CriterionStatus::not_met;
            });
        if (!excluded) shortlist.push_back({trial, found->second});
    }
    return shortlist;
}

// --- formatting --------------------------------------------------------------

namespace {

std::string status_summary(const std::vector<CriterionReport>& reports, CriterionStatus status) {
    std::string out;
    for (const auto& r : reports) {
        if (r.status != status) continue;
        if (!out.empty()) out += "; ";
        out += r.evidence;
    }
    return out.empty() ? "none" : out;
}

}  // namespace

Result<std::string> format_result(parser::Scenario scenario,
                                  const std::vector<ShortlistEntry>& shortlist,
                                  const std::string& patient_name) {
    using R = Result<std::string>;
    const bool success = scenario == parser::Scenario::trials_found;
    if (success != !shortlist.empty())
        return R::failure("inconsistent",
                          fmt::format("scenario {} with {} shortlist entries",
                                      parser::to_string(scenario), shortlist.size()));

    switch (scenario) {
        case parser::Scenario::trials_found: {
            std::string out = fmt::format(
                "```<ANALYSIS_SUMMARY>\n"
                "Clinical Trials Eligibility Summary for {0}\n"
                "{0} is potentially eligible to participate in the following clinical trials:\n"
                "```\n",
                patient_name);
            int n = 0;
            for (const auto& entry : shortlist) {
                out += fmt::format(
                    "\n#### {}. **{}**\n"
                    "\n"
                    "- **Title:** {}\n"
                    "- **Criteria Evaluation Summary:**\n"
                    "  - **Met:** {}\n"
                    "  - **Unknown:** {}\n"
                    "  - **Not Applicable:** {}\n"
                    "- **URL:** {}\n",
                    ++n, entry.trial.nct_id, entry.trial.title,
                    status_summary(entry.reports, CriterionStatus::met),
                    status_summary(entry.reports, CriterionStatus::unknown),
                    status_summary(entry.reports, CriterionStatus::not_applicable),
                    entry.trial.url);
            }
            out += "\n```\n</ANALYSIS_SUMMARY>```\n";
            return out;
        }
        case parser::Scenario::none_found:
            return fmt::format(
                "```<ANALYSIS_SUMMARY>\n"
                "### Clinical Trials Eligibility Summary for {0}\n"
                "No relevant clinical trials were found for {0}.\n"
                "</ANALYSIS_SUMMARY>```\n",
                patient_name);
        case parser::Scenario::demographics_missing:
            return fmt::format(
                "```<ANALYSIS_SUMMARY>\n"
                "Clinical Trials Eligibility Summary for {0}\n"
                "Clinical trial eligibility could not be evaluated for patient {0} because "
                "their age and sex could not be retrieved.\n"
                "</ANALYSIS_SUMMARY>```\n",
                patient_name);
        case parser::Scenario::search_error:
            return fmt::format(
                "```<ANALYSIS_SUMMARY>\n"
                "### Clinical Trials Eligibility Summary for {0}\n"
                "An error occurred when searching for clinical trials for {0}.\n"
                "```\n"
                "\n"
                "</ANALYSIS_SUMMARY>\n",
                patient_name);
    }
    return R::failure("inconsistent", "unknown scenario");
}

// --- pipeline ----------------------------------------------------------------

MatchResult run_trial_matching(const domain::PatientChart& chart,
                               registry::RegistryClient& client, const Lexicon& lexicon,
                               const std::string& institution, const Date& as_of,
                               const std::string& patient_display_name) {
    MatchResult result;

    const auto timeline = build_timeline(chart);
    const auto keywords = generate_keywords(timeline, chart, lexicon);

    Demographics demo;
    demo.age_years = chart.age_years_on(as_of);
    if (chart.sex == domain::Sex::female) demo.sex = registry::TrialSex::female;
    if (chart.sex == domain::Sex::male) demo.sex = registry::TrialSex::male;

    std::vector<CombinationQuery> combos;
    if (auto made = make_combinations(keywords)) {
        combos = std::move(made).take();
        for (auto& combo : combos) combo = expand_synonyms(combo, lexicon);
    }
    // No condition keywords leaves combos empty: zero searches, none_found.

    auto outcome = iterative_search(combos, client, demo, institution);
    switch (outcome.kind) {
        case SearchOutcome::Kind::demographics_missing:
            result.scenario = parser::Scenario::demographics_missing;
            break;
        case SearchOutcome::Kind::search_error:
            result.scenario = parser::Scenario::search_error;
            break;
        case SearchOutcome::Kind::pool: {
            result.pool = std::move(outcome.pool);
            std::map<std::string, std::vector<CriterionReport>> reports;
            for (const auto& trial : result.pool.trials)
                reports[trial.nct_id] = evaluate_eligibility(trial, chart, as_of);
            result.shortlist = filter_pool(result.pool, reports);
            result.scenario = result.shortlist.empty() ? parser::Scenario::none_found
                                                       : parser::Scenario::trials_found;
            break;
        }
    }
    result.rendered =
        format_result(result.scenario, result.shortlist, patient_display_name).value();
    return result;
}

}  // namespace ddose::matcher
