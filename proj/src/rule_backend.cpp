// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ddose/agent.hpp"
#include "ddose/clinical_rules.hpp"
#include "ddose/output_parser.hpp"
#include "ddose/text.hpp"

namespace ddose::agent {
namespace {

using nlohmann::json;

// --- small shared helpers ----------------------------------------------------

ToolCall make_call(ToolName name, json args = json::object()) {
    ToolCall c;
    c.name = name;
    c.arguments = std::move(args);
    return c;
}

ToolCall notes_call(std::string_view specialty) {
    return make_call(ToolName::get_clinical_notes, json{{"specialty", specialty}});
}

bool payload_errored(const json& p) { return !p.is_object() || p.contains("error"); }

bool payload_empty_or_errored(const json& p) {
    return payload_errored(p) || p.value("empty", false);
}

std::string slice_between(const std::string& text, std::string_view before,
                          std::string_view after) {
    const size_t a = text.find(before);
    if (a == std::string::npos) return "";
    const size_t start = a + before.size();
    const size_t b = text.find(after, start);
    if (b == std::string::npos) return "";
    return text.substr(start, b - start);
}

std::string timeline_table(const matcher::Timeline& timeline) {
    std::string out = "| Date | Category | Event |\n| --- | --- | --- |\n";
    if (timeline.events.empty()) return out + "| - | - | (no dated events) |\n";
    for (const auto& e : timeline.events)
        out += fmt::format("| {} | {} | {} |\n", e.date.to_string(), matcher::to_string(e.category),
                           e.description);
    return out;
}

/// Closes any fence the message leaves open, then appends a live `<DONE>`.
std::string append_done(std::string text) {
    int fences = 0;
    for (const auto& line : text::split_lines(text))
        if (text::trim(line).substr(0, 3) == "```") ++fences;
    if (fences % 2 != 0) text += "```\n";
    text += "\n<DONE>\n";
    return text;
}

/// Anchor date for ages: today's appointment, else the newest dated event.
Date reconstruct_as_of(const domain::PatientChart& chart, const matcher::Timeline& timeline) {
    if (!chart.appointments.empty()) return chart.appointments.front().start_time.date;
    if (!timeline.events.empty()) return timeline.events.back().date;
    return Date{};
}

// --- clinical summary protocol -----------------------------------------------

const std::vector<ToolCall>& summary_retrieval_calls() {
    static const std::vector<ToolCall> calls = {
        make_call(ToolName::get_patient_details),
        make_call(ToolName::get_treatment_details),
        make_call(ToolName::get_diagnosis_details),
        make_call(ToolName::get_appointments),
        make_call(ToolName::get_radiology_reports),
        make_call(ToolName::get_pathology_reports),
        notes_call("radiology"),
        notes_call("pathology"),
        notes_call("surgery"),
        notes_call("medonc"),
        notes_call("ent"),
        notes_call("urology"),
        notes_call("radonc"),
    };
    return calls;
}

std::string staging_text(const domain::TnmStaging& staging) {
    std::vector<std::string> parts;
    if (staging.t) parts.emplace_back(domain::to_string(*staging.t));
    if (staging.n) parts.emplace_back(domain::to_string(*staging.n));
    if (staging.m) parts.emplace_back(domain::to_string(*staging.m));
    return fmt::format("{}", fmt::join(parts, " "));
}

std::string diagnosis_text(const domain::DiagnosisDetail& d) {
    std::string label = text::trim(fmt::format("{} {}", d.site, d.histology));
    if (const auto staging = staging_text(d.staging); !staging.empty())
        label += fmt::format(" ({})", staging);
    return label;
}

std::string course_sentence(const domain::TreatmentDetail& t) {
    const bool delivered = t.dose_gy_delivered.has_value() || t.fractions_delivered.has_value();
    if (!delivered && !t.current)
        return fmt::format("Planned course: {} to {}, starting {}.", t.modality, t.site,
                           t.start_date.to_string());
    std::string s = fmt::format("{} course: {} to {}", t.current ? "Current" : "Completed",
                                t.modality, t.site);
    if (t.fractions_delivered && t.fractions_prescribed)
        s += fmt::format(", {} of {} fractions delivered", *t.fractions_delivered,
                         *t.fractions_prescribed);
    else if (t.fractions_delivered)
        s += fmt::format(", {} fractions delivered", *t.fractions_delivered);
    if (t.dose_gy_delivered && t.dose_gy_prescribed)
        s += fmt::format(", {:g} of {:g} Gy delivered", *t.dose_gy_delivered,
                         *t.dose_gy_prescribed);
    else if (t.dose_gy_delivered)
        s += fmt::format(", {:g} Gy delivered", *t.dose_gy_delivered);
    s += fmt::format(", started {}", t.start_date.to_string());
    if (t.most_recent_date) s += fmt::format(", most recent treatment {}", t.most_recent_date->to_string());
    if (t.next_date) s += fmt::format(", next treatment {}", t.next_date->to_string());
    return s + ".";
}

std::string compose_status(const domain::PatientChart& chart, const Date& today) {
    std::vector<std::string> sentences;

    const std::string who = !chart.name.empty()    ? chart.name
                            : !chart.patient_id.empty() ? chart.patient_id
                                                        : "The patient";
    const auto age = chart.age_years_on(today);
    const bool sexed = chart.sex != domain::Sex::unknown;
    std::string lead;
    if (age && sexed)
        lead = fmt::format("{} is a {}-year-old {}", who, *age, domain::to_string(chart.sex));
    else if (age)
        lead = fmt::format("{} is a {}-year-old patient", who, *age);
    else if (sexed)
        lead = fmt::format("{} is a {} patient", who, domain::to_string(chart.sex));

    // Most recent onset leads, mirroring the keyword ranking.
    auto diagnoses = chart.diagnoses;
    std::stable_sort(diagnoses.begin(), diagnoses.end(),
                     [](const auto& a, const auto& b) { return a.onset_date > b.onset_date; });
    if (diagnoses.empty()) {
        sentences.push_back(lead.empty() ? fmt::format("{} has no recorded diagnosis.", who)
                                         : lead + " with no recorded diagnosis.");
    } else {
        const auto& primary = diagnoses.front();
        const std::string dx = fmt::format("{}, diagnosed {}.", diagnosis_text(primary),
                                           primary.onset_date.to_string());
        sentences.push_back(lead.empty() ? fmt::format("{} has {}", who, dx)
                                         : fmt::format("{} with {}", lead, dx));
        if (diagnoses.size() > 1) {
            std::vector<std::string> others;
            for (size_t i = 1; i < diagnoses.size(); ++i)
                others.push_back(fmt::format("{} ({})", diagnosis_text(diagnoses[i]),
                                             diagnoses[i].onset_date.to_string()));
            sentences.push_back(fmt::format("Other diagnoses: {}.", fmt::join(others, ", ")));
        }
    }

    for (const auto& t : chart.treatments) sentences.push_back(course_sentence(t));

    if (!chart.eligibility_facts.prior_radiation.empty()) {
        std::vector<std::string> courses;
        for (const auto& r : chart.eligibility_facts.prior_radiation)
            courses.push_back(fmt::format("{:g} Gy in {}", r.dose_gy, r.year));
        sentences.push_back(fmt::format("Prior radiation: {}.", fmt::join(courses, ", ")));
    }
    if (!chart.eligibility_facts.prior_systemic_therapies.empty())
        sentences.push_back(fmt::format(
            "Prior systemic therapy: {}.",
            fmt::join(chart.eligibility_facts.prior_systemic_therapies, ", ")));

    std::vector<std::string> active;
    for (const auto& m : chart.medications)
        if (!m.end_date)
            active.push_back(fmt::format("{} (since {})", m.name, m.start_date.to_string()));
    if (!active.empty())
        sentences.push_back(fmt::format("Current medications: {}.", fmt::join(active, ", ")));

    if (!chart.radiology_reports.empty()) {
        const auto* newest = &chart.radiology_reports.front();
        for (const auto& r : chart.radiology_reports)
            if (!(r.date < newest->date)) newest = &r;
        sentences.push_back(fmt::format("Most recent imaging: {} ({}).", newest->title,
                                        newest->date.to_string()));
    }

    if (chart.eligibility_facts.ecog)
        sentences.push_back(
            fmt::format("ECOG performance status {}.", *chart.eligibility_facts.ecog));

    const bool has_prostate_detail =
        std::any_of(chart.diagnoses.begin(), chart.diagnoses.end(),
                    [](const auto& d) { return d.prostate_detail.has_value(); });
    if (has_prostate_detail)
        if (const auto addendum = rules::prostate_addendum(chart)) sentences.push_back(*addendum);

    std::vector<const domain::Appointment*> today_visits;
    for (const auto& a : chart.appointments)
        if (a.start_time.date == today) today_visits.push_back(&a);
    if (!today_visits.empty()) {
        sentences.push_back(fmt::format("Today's visit: {} at {}.",
                                        today_visits.front()->raw_type_label,
                                        today_visits.front()->start_time.hhmm()));
        if (today_visits.size() > 1) {
            std::vector<std::string> more;
            for (size_t i = 1; i < today_visits.size(); ++i)
                more.push_back(fmt::format("{} at {}", today_visits[i]->raw_type_label,
                                           today_visits[i]->start_time.hhmm()));
            sentences.push_back(fmt::format("Also today: {}.", fmt::join(more, ", ")));
        }
        const bool management_today =
            std::any_of(today_visits.begin(), today_visits.end(), [](const auto* a) {
                return a->visit_kind == domain::VisitKind::management;
            });
        if (management_today) {
            const domain::DatedDocument* latest = nullptr;
            for (const auto& [specialty, docs] : chart.notes)
                for (const auto& doc : docs)
                    if (doc.date < today && (!latest || latest->date < doc.date)) latest = &doc;
            if (latest)
                sentences.push_back(fmt::format(
                    "Review the most recent progress note '{}' ({}) for what was attempted "
                    "at the prior visit.",
                    latest->title, latest->date.to_string()));
        }
    }

    return fmt::format("{}", fmt::join(sentences, " "));
}

AgentMessage summary_next(const std::string& prompt, const AgentTranscript& so_far) {
    AgentMessage msg;
    if (so_far.steps.empty()) {
        msg.text = "Retrieving the patient chart sections before summarizing.";
        msg.tool_calls = summary_retrieval_calls();
        return msg;
    }

    const auto& retrieved = so_far.steps.front().tool_results;
    const bool nothing = std::all_of(retrieved.begin(), retrieved.end(), payload_empty_or_errored);
    if (nothing) {
        const json fallback = {{"patient_status_summary", std::string(parser::kFallbackSummary)}};
        msg.text = append_done(
            fmt::format("No patient data could be retrieved.\n\n```json\n{}\n```\n",
                        fallback.dump()));
        return msg;
    }

    auto chart = chart_from_tool_results(so_far);
    if (chart.patient_id.empty())
        chart.patient_id = slice_between(prompt, "Patient ", " has one or more");
    const auto timeline = matcher::build_timeline(chart);
    const Date today = reconstruct_as_of(chart, timeline);

    const json block = {{"patient_status_summary", compose_status(chart, today)}};
    msg.text = append_done(fmt::format("### Patient Timeline\n\n{}\n```json\n{}\n```\n",
                                       timeline_table(timeline), block.dump()));
    return msg;
}

// --- trial evaluation protocol -------------------------------------------------

const std::vector<ToolCall>& trial_retrieval_calls() {
    static const std::vector<ToolCall> calls = {
        make_call(ToolName::get_patient_details),
        make_call(ToolName::get_diagnosis_details),
        make_call(ToolName::get_appointments),
        make_call(ToolName::get_pathology_reports),
        make_call(ToolName::get_radiology_reports),
        notes_call("pathology"),
        notes_call("radiology"),
        notes_call("surgery"),
        notes_call("medonc"),
        notes_call("radonc"),
        notes_call("urology"),
        notes_call("ent"),
    };
    return calls;
}

struct TrialContext {
    std::string patient_id;
    std::string patient_name;
    domain::PatientChart chart;
    matcher::Timeline timeline;
    Date as_of;
    matcher::Demographics demographics;
    std::vector<matcher::CombinationQuery> expanded;  // rank order
};

TrialContext build_trial_context(const std::string& prompt, const AgentTranscript& so_far,
                                 const matcher::Lexicon& lexicon) {
    TrialContext ctx;
    ctx.patient_id = slice_between(prompt, "clinical trials patient ", " might be eligible");
    ctx.patient_name =
        text::trim(slice_between(prompt, "Clinical Trials Eligibility Summary for ", "\n"));
    if (ctx.patient_name.empty()) ctx.patient_name = ctx.patient_id;

    ctx.chart = chart_from_tool_results(so_far);
    if (ctx.chart.patient_id.empty()) ctx.chart.patient_id = ctx.patient_id;
    ctx.timeline = matcher::build_timeline(ctx.chart);
    ctx.as_of = reconstruct_as_of(ctx.chart, ctx.timeline);

    ctx.demographics.age_years = ctx.chart.age_years_on(ctx.as_of);
    if (ctx.chart.sex == domain::Sex::female) ctx.demographics.sex = registry::TrialSex::female;
    if (ctx.chart.sex == domain::Sex::male) ctx.demographics.sex = registry::TrialSex::male;

    const auto keywords = matcher::generate_keywords(ctx.timeline, ctx.chart, lexicon);
    if (auto combos = matcher::make_combinations(keywords)) {
        ctx.expanded = std::move(combos).take();
        for (auto& combo : ctx.expanded) combo = matcher::expand_synonyms(combo, lexicon);
    }
    return ctx;
}

json search_arguments(const matcher::CombinationQuery& combo, const matcher::Demographics& demo) {
    json args = {{"conditions", combo.condition_terms}};
    if (!combo.intervention_terms.empty()) args["interventions"] = combo.intervention_terms;
    if (demo.age_years) args["age"] = static_cast<double>(*demo.age_years);
    if (demo.sex) args["sex"] = std::string(registry::to_string(*demo.sex));
    return args;
}

/// Pool replay over every search payload in the transcript, mirroring
/// iterative_search: unique by NCT id in discovery order, capped pool,
/// per-search (new, cumulative-capped) counts.
struct PoolReplay {
    matcher::TrialPool pool;
    const json* failed = nullptr;  // first error payload, if any
};

PoolReplay replay_searches(const AgentTranscript& so_far) {
    PoolReplay replay;
    std::set<std::string> seen;
    for (const auto& step : so_far.steps) {
        for (size_t i = 0; i < step.tool_calls.size() && i < step.tool_results.size(); ++i) {
            if (step.tool_calls[i].name != ToolName::get_list_of_clinical_trials) continue;
            ++replay.pool.searches_performed;
            const json& payload = step.tool_results[i];
            if (payload_errored(payload)) {
                if (!replay.failed) replay.failed = &payload;
                continue;
            }
            int new_unique = 0;
            for (const auto& study : payload.value("studies", json::array())) {
                auto trial = registry::trial_from_json(study);
                if (!trial) continue;
                if (!seen.insert(trial.value().nct_id).second) continue;
                ++new_unique;
                if (replay.pool.trials.size() < matcher::kPoolCap)
                    replay.pool.trials.push_back(std::move(trial).take());
            }
            replay.pool.per_search_counts.emplace_back(
                new_unique, static_cast<int>(replay.pool.trials.size()));
        }
    }
    return replay;
}

std::string ranked_list(const std::vector<matcher::RankedTerm>& terms) {
    std::string out;
    for (const auto& t : terms) out += fmt::format("{}. {}\n", t.rank, t.term);
    return out.empty() ? "(none)\n" : out;
}

std::string combo_line(const matcher::CombinationQuery& combo) {
    std::string line = fmt::format("conditions: {}", fmt::join(combo.condition_terms, ", "));
    if (!combo.intervention_terms.empty())
        line += fmt::format("; interventions: {}", fmt::join(combo.intervention_terms, ", "));
    return line;
}

std::string keyword_phase_text(const TrialContext& ctx, const matcher::Lexicon& lexicon) {
    const auto keywords = matcher::generate_keywords(ctx.timeline, ctx.chart, lexicon);
    std::string out = fmt::format("### Patient Timeline\n\n{}\n", timeline_table(ctx.timeline));
    if (!ctx.chart.diagnoses.empty()) {
        auto diagnoses = ctx.chart.diagnoses;
        std::stable_sort(diagnoses.begin(), diagnoses.end(),
                         [](const auto& a, const auto& b) { return a.onset_date > b.onset_date; });
        out += fmt::format("### Condition Focus\n\nFocusing on the most recent diagnosis: {}.\n\n",
                           diagnosis_text(diagnoses.front()));
    }
    out += fmt::format("### Ranked Condition Keywords\n\n{}\n", ranked_list(keywords.conditions));
    out += fmt::format("### Ranked Intervention Keywords\n\n{}\n",
                       ranked_list(keywords.interventions));
    std::string combos_text;
    std::string inputs_text;
    int n = 0;
    for (const auto& combo : ctx.expanded) ++n, inputs_text += fmt::format("{}. {}\n", n, combo_line(combo));
    if (auto raw = matcher::make_combinations(keywords)) {
        n = 0;
        for (const auto& combo : raw.value()) ++n, combos_text += fmt::format("{}. {}\n", n, combo_line(combo));
    }
    out += fmt::format("### Ranked Keyword Combinations\n\n{}\n", combos_text);
    out += fmt::format("### Expanded Search Inputs\n\n{}\n", inputs_text);
    return out;
}

AgentMessage trial_next(const std::string& prompt, const AgentTranscript& so_far,
                        const matcher::Lexicon& lexicon) {
    AgentMessage msg;
    if (so_far.steps.empty()) {
        msg.text = "Retrieving the patient data needed for trial matching.";
        msg.tool_calls = trial_retrieval_calls();
        return msg;
    }

    const auto ctx = build_trial_context(prompt, so_far, lexicon);
    auto render = [&ctx](parser::Scenario scenario,
                         const std::vector<matcher::ShortlistEntry>& shortlist) {
        return matcher::format_result(scenario, shortlist, ctx.patient_name).value();
    };

    if (so_far.steps.size() == 1) {
        if (!ctx.demographics.age_years || !ctx.demographics.sex) {
            msg.text = append_done(fmt::format(
                "### Patient Timeline\n\n{}\nThe patient's age or sex could not be retrieved, "
                "so no trial search can be performed.\n\n{}",
                timeline_table(ctx.timeline),
                render(parser::Scenario::demographics_missing, {})));
            return msg;
        }
        if (ctx.expanded.empty()) {
            msg.text = append_done(fmt::format(
                "### Patient Timeline\n\n{}\nNo condition keywords could be generated, so no "
                "search was performed.\n\n{}",
                timeline_table(ctx.timeline), render(parser::Scenario::none_found, {})));
            return msg;
        }
        msg.text = keyword_phase_text(ctx, lexicon) +
                   fmt::format("Starting the iterative search with input 1 of {}.",
                               ctx.expanded.size());
        msg.tool_calls = {make_call(ToolName::get_list_of_clinical_trials,
                                    search_arguments(ctx.expanded.front(), ctx.demographics))};
        return msg;
    }

    const auto& last = so_far.steps.back();
    const bool last_was_search =
        !last.tool_calls.empty() &&
        last.tool_calls.front().name == ToolName::get_list_of_clinical_trials;
    const auto replay = replay_searches(so_far);

    if (last_was_search) {
        if (replay.failed) {
            const json& err = (*replay.failed)["error"];
            msg.text = append_done(fmt::format(
                "Search {} failed ({}: {}).\n\n{}", replay.pool.searches_performed,
                err.value("code", "error"), err.value("message", ""),
                render(parser::Scenario::search_error, {})));
            return msg;
        }
        const auto [new_unique, cumulative] = replay.pool.per_search_counts.back();
        const std::string progress =
            fmt::format("Search {} found {} new unique trials; {} unique trials so far.",
                        replay.pool.searches_performed, new_unique, cumulative);
        const bool stop =
            replay.pool.searches_performed >= matcher::kMaxSearches ||
            (replay.pool.searches_performed >= matcher::kMinSearches &&
             replay.pool.trials.size() >= static_cast<size_t>(matcher::kStopThreshold)) ||
            static_cast<size_t>(replay.pool.searches_performed) >= ctx.expanded.size();
        if (!stop) {
            msg.text = progress + fmt::format(" Proceeding with search input {} of {}.",
                                              replay.pool.searches_performed + 1,
                                              ctx.expanded.size());
            msg.tool_calls = {make_call(
                ToolName::get_list_of_clinical_trials,
                search_arguments(ctx.expanded[replay.pool.searches_performed],
                                 ctx.demographics))};
            return msg;
        }
        if (replay.pool.trials.empty()) {
            msg.text = append_done(
                fmt::format("{} The pool is empty; there is nothing to evaluate.\n\n{}",
                            progress, render(parser::Scenario::none_found, {})));
            return msg;
        }
        msg.text = progress + fmt::format(
                                  " The pool holds {} trials; retrieving each trial's "
                                  "detailed eligibility criteria.",
                                  replay.pool.trials.size());
        for (const auto& trial : replay.pool.trials)
            msg.tool_calls.push_back(
                make_call(ToolName::get_trial_details, json{{"nct_id", trial.nct_id}}));
        return msg;
    }

    // After the details step: evaluate, filter, and emit the final summary.
    matcher::TrialPool pool = replay.pool;
    for (size_t i = 0; i < last.tool_calls.size() && i < last.tool_results.size(); ++i) {
        if (last.tool_calls[i].name != ToolName::get_trial_details) continue;
        const json& payload = last.tool_results[i];
        if (payload_errored(payload)) continue;  // fall back to the search-phase record
        auto detailed = registry::trial_from_json(payload);
        if (!detailed) continue;
        for (auto& trial : pool.trials)
            if (trial.nct_id == detailed.value().nct_id) {
                trial = std::move(detailed).take();
                break;
            }
    }

    std::string evaluation = "### Eligibility Evaluation\n\n";
    std::map<std::string, std::vector<matcher::CriterionReport>> reports;
    for (const auto& trial : pool.trials) {
        auto trial_reports = matcher::evaluate_eligibility(trial, ctx.chart, ctx.as_of);
        evaluation += fmt::format("#### {} ({})\n\n", trial.nct_id, trial.title);
        for (const auto& r : trial_reports)
            evaluation +=
                fmt::format("- {} [{}] {}\n", r.criterion_id, matcher::to_string(r.status),
                            r.evidence);
        evaluation += "\n";
        reports[trial.nct_id] = std::move(trial_reports);
    }
    const auto shortlist = matcher::filter_pool(pool, reports);
    std::vector<std::string> kept;
    for (const auto& entry : shortlist) kept.push_back(entry.trial.nct_id);
    evaluation += fmt::format(
        "Trials with no failed criteria: {}.\n\n",
        kept.empty() ? std::string("none") : fmt::format("{}", fmt::join(kept, ", ")));
    const auto scenario =
        shortlist.empty() ? parser::Scenario::none_found : parser::Scenario::trials_found;
    msg.text = append_done(evaluation + render(scenario, shortlist));
    return msg;
}

}  // namespace

AgentMessage RuleBackend::next(const std::string& prompt, const AgentTranscript& so_far) {
    if (prompt.rfind("Patient ", 0) == 0) return summary_next(prompt, so_far);
    if (prompt.rfind("Your task is to determine", 0) == 0)
        return trial_next(prompt, so_far, lexicon_);
    AgentMessage msg;
    msg.text = "Unrecognized prompt protocol; stopping. <DONE>";
    return msg;
}

}  // namespace ddose::agent
