// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddose/agent.hpp"
#include "ddose/ehr_store.hpp"
#include "ddose/output_parser.hpp"
#include "ddose/trial_matcher.hpp"

using namespace ddose;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSmoke = fs::path(DDOSE_SOURCE_ROOT) / "fixtures" / "smoke-3x10";
const fs::path kPrompts = fs::path(DDOSE_SOURCE_ROOT) / "prompts";
const fs::path kLexiconFile = fs::path(DDOSE_SOURCE_ROOT) / "lexicon" / "synonyms.json";
const std::string kNorthline = "Northline Cancer Center";
const Date kRunDate{2025, 8, 4};

ehr::CohortStore load_smoke() { return ehr::load_cohort(kSmoke).value(); }

matcher::Lexicon load_lexicon() { return matcher::Lexicon::load(kLexiconFile).value(); }

registry::FileRegistry load_registry() {
    return registry::FileRegistry::load(kSmoke / "registry" / "trials.json").value();
}

std::string render(agent::TemplateId id, const std::string& pid, const std::string& name) {
    auto tmpl = agent::load_prompt(id, kPrompts).value();
    return agent::render_prompt(tmpl, {{"patient id", pid}, {"patient name", name}}).value();
}

using FaultFn = std::function<std::optional<Error>(const agent::ToolCall&)>;

agent::AgentTranscript run_protocol(agent::TemplateId id, const std::string& pid,
                                    const std::string& name, const ehr::CohortStore& store,
                                    registry::RegistryClient& reg, const Date& run_date,
                                    FaultFn fault = {}) {
    agent::ToolDispatcher tools(agent::ToolEnv{&store, &reg, pid, kNorthline, run_date});
    tools.fault = std::move(fault);
    agent::RuleBackend backend(load_lexicon());
    return agent::run_agent(render(id, pid, name), backend, tools, agent::BackendLimits{});
}

std::vector<std::string> call_names(const agent::TranscriptStep& step) {
    std::vector<std::string> names;
    for (const auto& c : step.tool_calls) names.emplace_back(agent::to_string(c.name));
    return names;
}

const std::vector<std::string> kSummaryRetrievalNames = {
    "get_patient_details",  "get_treatment_details", "get_diagnosis_details",
    "get_appointments",     "get_radiology_reports", "get_pathology_reports",
    "get_clinical_notes",   "get_clinical_notes",    "get_clinical_notes",
    "get_clinical_notes",   "get_clinical_notes",    "get_clinical_notes",
    "get_clinical_notes"};

FaultFn fault_on(agent::ToolName name) {
    return [name](const agent::ToolCall& call) -> std::optional<Error> {
        if (call.name == name) return Error{"io", "injected fault"};
        return std::nullopt;
    };
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("prompt templates load and render by exact substitution") {
    auto clinical = agent::load_prompt(agent::TemplateId::clinical_summary, kPrompts).value();
    auto trial = agent::load_prompt(agent::TemplateId::trial_evaluation, kPrompts).value();
    CHECK(clinical.template_id == agent::TemplateId::clinical_summary);

    auto rendered =
        agent::render_prompt(clinical, {{"patient id", "P001"}}).value();
    CHECK(rendered.rfind("Patient P001 has one or more appointments today", 0) == 0);
    CHECK(rendered.find("{physician_appointment[") == std::string::npos);

    // Rendering is deterministic and leaves non-placeholder braces alone.
    auto again = agent::render_prompt(clinical, {{"patient id", "P001"}}).value();
    CHECK(rendered == again);
    auto trial_rendered = agent::render_prompt(
                              trial, {{"patient id", "P008"}, {"patient name", "Evelyn Marsh"}})
                              .value();
    CHECK(trial_rendered.find("Clinical Trials Eligibility Summary for Evelyn Marsh\n") !=
          std::string::npos);
    CHECK(trial_rendered.find("{{patient first name}}") != std::string::npos);

    auto missing = agent::render_prompt(trial, {{"patient id", "P008"}});
    REQUIRE_FALSE(missing.ok());
    CHECK(missing.error().code == "unbound_placeholder");
    CHECK(missing.error().message.find("patient name") != std::string::npos);

    CHECK_FALSE(
        agent::PromptTemplate::load(agent::TemplateId::clinical_summary, kPrompts / "nope.txt")
            .ok());
}

TEST_CASE("tool names round-trip; unknown names are rejected") {
    using agent::ToolName;
    for (auto name : {ToolName::get_patient_details, ToolName::get_treatment_details,
                      ToolName::get_diagnosis_details, ToolName::get_appointments,
                      ToolName::get_radiology_reports, ToolName::get_pathology_reports,
                      ToolName::get_clinical_notes, ToolName::get_list_of_clinical_trials,
                      ToolName::get_trial_details})
        CHECK(agent::parse_tool_name(agent::to_string(name)).value() == name);
    CHECK_FALSE(agent::parse_tool_name("get_lab_results").ok());
}

TEST_CASE("dispatcher returns section payloads and bundles medications and labs") {
    auto store = load_smoke();
    auto reg = load_registry();
    agent::ToolDispatcher tools(agent::ToolEnv{&store, &reg, "P001", kNorthline, kRunDate});

    auto details = tools.dispatch({agent::ToolName::get_patient_details, json::object()});
    REQUIRE(details.is_object());
    CHECK(details.at("section") == "patient_details");
    CHECK(details.at("empty") == false);
    CHECK(details.at("content").at("name") == "Harold Jennings");
    CHECK(details.at("content").at("age_years") == 67);
    REQUIRE(details.at("content").contains("medications"));
    CHECK(details.at("content").at("medications").size() == 1);
    CHECK(details.at("content").at("labs").size() == 2);

    auto appointments = tools.dispatch({agent::ToolName::get_appointments, json::object()});
    REQUIRE(appointments.at("content").is_array());
    REQUIRE(appointments.at("content").size() == 1);
    CHECK(appointments.at("content").at(0).at("appointment_id") == "A-1001");

    auto notes = tools.dispatch(
        {agent::ToolName::get_clinical_notes, json{{"specialty", "urology"}}});
    CHECK(notes.at("section") == "notes_urology");
    CHECK(notes.at("content").size() == 1);
    auto surgery = tools.dispatch(
        {agent::ToolName::get_clinical_notes, json{{"specialty", "surgery"}}});
    CHECK(surgery.at("empty") == true);

    CHECK(tools.dispatch({agent::ToolName::get_clinical_notes, json{{"specialty", "cardiology"}}})
              .contains("error"));
    CHECK(tools.dispatch({agent::ToolName::get_clinical_notes, json::object()})
              .contains("error"));
}

TEST_CASE("dispatcher validates registry calls and passes results through") {
    auto store = load_smoke();
    auto reg = load_registry();
    agent::ToolDispatcher tools(agent::ToolEnv{&store, &reg, "P001", kNorthline, kRunDate});

    const json search_args = {{"conditions", {"prostate cancer"}},
                              {"interventions", {"radiation therapy"}},
                              {"age", 67.0},
                              {"sex", "male"}};
    auto found = tools.dispatch({agent::ToolName::get_list_of_clinical_trials, search_args});
    REQUIRE(found.contains("studies"));
    CHECK(found.at("count") == 2);
    CHECK(registry::trial_from_json(found.at("studies").at(0)).value().nct_id == "NCT00000001");

    CHECK(tools.dispatch({agent::ToolName::get_list_of_clinical_trials, json::object()})
              .contains("error"));
    CHECK(tools.dispatch({agent::ToolName::get_list_of_clinical_trials,
                          json{{"conditions", json::array()}}})
              .contains("error"));
    json bad_sex = search_args;
    bad_sex["sex"] = "all";
    CHECK(tools.dispatch({agent::ToolName::get_list_of_clinical_trials, bad_sex})
              .contains("error"));

    auto detail = tools.dispatch(
        {agent::ToolName::get_trial_details, json{{"nct_id", "NCT00000003"}}});
    CHECK(detail.at("nct_id") == "NCT00000003");
    auto missing = tools.dispatch(
        {agent::ToolName::get_trial_details, json{{"nct_id", "NCT99999999"}}});
    CHECK(missing.at("error").at("code") == "unknown_trial");

    agent::ToolDispatcher stranger(agent::ToolEnv{&store, &reg, "P999", kNorthline, kRunDate});
    CHECK(stranger.dispatch({agent::ToolName::get_patient_details, json::object()})
              .at("error")
              .at("code") == "unknown_patient");
}

TEST_CASE("dispatcher fault hook short-circuits only the targeted tool") {
    auto store = load_smoke();
    auto reg = load_registry();
    agent::ToolDispatcher tools(agent::ToolEnv{&store, &reg, "P001", kNorthline, kRunDate});
    tools.fault = fault_on(agent::ToolName::get_radiology_reports);

    auto broken = tools.dispatch({agent::ToolName::get_radiology_reports, json::object()});
    CHECK(broken.at("error").at("code") == "io");
    CHECK(broken.at("error").at("message") == "injected fault");
    CHECK_FALSE(tools.dispatch({agent::ToolName::get_pathology_reports, json::object()})
                    .contains("error"));
}

TEST_CASE("run_agent enforces step and per-step call limits") {
    auto store = load_smoke();
    auto reg = load_registry();
    agent::ToolDispatcher tools(agent::ToolEnv{&store, &reg, "P001", kNorthline, kRunDate});

    struct NeverDone : agent::AgentBackend {
        agent::AgentMessage next(const std::string&, const agent::AgentTranscript&) override {
            return {"still thinking", {}};
        }
    } never_done;
    agent::BackendLimits limits;
    limits.max_steps = 5;
    auto aborted = agent::run_agent("Patient P001 has one or more appointments today.",
                                    never_done, tools, limits);
    CHECK(aborted.steps.size() == 5);
    CHECK(aborted.terminated);
    CHECK_FALSE(aborted.done_signal_seen);

    struct Burst : agent::AgentBackend {
        agent::AgentMessage next(const std::string&, const agent::AgentTranscript&) override {
            agent::AgentMessage m;
            m.text = "three calls <DONE>";
            for (int i = 0; i < 3; ++i)
                m.tool_calls.push_back({agent::ToolName::get_patient_details, json::object()});
            return m;
        }
    } burst;
    limits = agent::BackendLimits{};
    limits.max_tool_calls_per_step = 2;
    auto capped = agent::run_agent("x", burst, tools, limits);
    REQUIRE(capped.steps.size() == 1);
    REQUIRE(capped.steps[0].tool_results.size() == 3);
    CHECK_FALSE(capped.steps[0].tool_results[0].contains("error"));
    CHECK_FALSE(capped.steps[0].tool_results[1].contains("error"));
    CHECK(capped.steps[0].tool_results[2].at("error").at("code") == "tool_limit");
    CHECK(capped.done_signal_seen);
}

TEST_CASE("summary protocol: one retrieval step, then timeline plus fenced JSON") {
    auto store = load_smoke();
    auto reg = load_registry();
    auto t = run_protocol(agent::TemplateId::clinical_summary, "P001", "Harold Jennings", store,
                          reg, kRunDate);

    REQUIRE(t.steps.size() == 2);
    CHECK(t.terminated);
    CHECK(t.done_signal_seen);
    CHECK(call_names(t.steps[0]) == kSummaryRetrievalNames);
    const std::vector<std::string> specialties = {"radiology", "pathology", "surgery",
                                                  "medonc",    "ent",       "urology",
                                                  "radonc"};
    for (size_t i = 0; i < specialties.size(); ++i)
        CHECK(t.steps[0].tool_calls[6 + i].arguments.at("specialty") == specialties[i]);
    CHECK(t.steps[1].tool_calls.empty());

    const auto& message = t.steps[1].agent_message;
    CHECK(message.find("### Patient Timeline") != std::string::npos);
    CHECK(message.find("| 2025-03-01 | diagnostic | pathology: Prostate needle biopsy |") !=
          std::string::npos);

    auto payload = parser::extract_json_summary(message).value();
    CHECK_FALSE(payload.is_fallback);
    CHECK(payload.text.find("Harold Jennings is a 67-year-old male with prostate "
                            "adenocarcinoma (T1c N0 M0), diagnosed 2025-03-05.") !=
          std::string::npos);
    CHECK(payload.text.find("unfavorable intermediate") != std::string::npos);
    CHECK(payload.text.find("Current medications: tamsulosin (since 2025-04-01).") !=
          std::string::npos);
    CHECK(payload.text.find("Most recent imaging: MRI pelvis with and without contrast "
                            "(2025-03-20).") != std::string::npos);
    CHECK(payload.text.find("ECOG performance status 1.") != std::string::npos);
    CHECK(payload.text.find("Today's visit: Consult - Prostate at 08:00.") !=
          std::string::npos);

    // Pure function of (prompt, store state): byte-equal transcripts.
    auto again = run_protocol(agent::TemplateId::clinical_summary, "P001", "Harold Jennings",
                              store, reg, kRunDate);
    CHECK(agent::to_json(t).dump() == agent::to_json(again).dump());
}

TEST_CASE("summary protocol: management visits call back to the latest progress note") {
    auto store = load_smoke();
    auto reg = load_registry();
    auto t = run_protocol(agent::TemplateId::clinical_summary, "P006", "Dorothy Vance", store,
                          reg, kRunDate);
    auto payload = parser::extract_json_summary(t.steps.back().agent_message).value();
    CHECK(payload.text.find("Current course: IMRT to esophagus, 13 of 28 fractions delivered, "
                            "23.4 of 50.4 Gy delivered, started 2025-07-14, most recent "
                            "treatment 2025-08-01, next treatment 2025-08-04.") !=
          std::string::npos);
    CHECK(payload.text.find("Prior systemic therapy: carboplatin, paclitaxel.") !=
          std::string::npos);
    CHECK(payload.text.find("Review the most recent progress note 'On-treatment visit note, "
                            "week 3' (2025-08-01) for what was attempted at the prior visit.") !=
          std::string::npos);
}

TEST_CASE("summary protocol: fallback if and only if every retrieval is empty or errored") {
    auto store = load_smoke();
    auto reg = load_registry();
    const Date off_schedule{2025, 8, 5};

    // P010 off-schedule: every section is empty.
    auto empty_run = run_protocol(agent::TemplateId::clinical_summary, "P010", "P010", store,
                                  reg, off_schedule);
    REQUIRE(empty_run.steps.size() == 2);
    auto fallback = parser::extract_json_summary(empty_run.steps[1].agent_message).value();
    CHECK(fallback.is_fallback);
    CHECK(fallback.text == parser::kFallbackSummary);

    // Same patient with a failing radiology tool: still every-empty-or-errored.
    auto faulted = run_protocol(agent::TemplateId::clinical_summary, "P010", "P010", store, reg,
                                off_schedule, fault_on(agent::ToolName::get_radiology_reports));
    REQUIRE(faulted.steps.size() == 2);
    CHECK(faulted.steps[0].tool_results[4].at("error").at("code") == "io");
    CHECK(parser::extract_json_summary(faulted.steps[1].agent_message).value().is_fallback);

    // A rich chart with one failed retrieval still composes a summary.
    auto partial = run_protocol(agent::TemplateId::clinical_summary, "P001", "Harold Jennings",
                                store, reg, kRunDate,
                                fault_on(agent::ToolName::get_radiology_reports));
    auto composed = parser::extract_json_summary(partial.steps[1].agent_message).value();
    CHECK_FALSE(composed.is_fallback);
    CHECK(composed.text.find("Harold Jennings is a 67-year-old male") != std::string::npos);
    CHECK(composed.text.find("Most recent imaging:") == std::string::npos);
}

TEST_CASE("summary protocol reconstructs the stored chart from tool payloads") {
    auto store = load_smoke();
    auto reg = load_registry();
    for (const std::string pid : {"P001", "P006"}) {
        auto t = run_protocol(agent::TemplateId::clinical_summary, pid, pid, store, reg,
                              kRunDate);
        CHECK(agent::chart_from_tool_results(t) == *store.find_patient(pid));
    }
}

TEST_CASE("trial protocol: prostate patient reproduces the pipeline byte for byte") {
    auto store = load_smoke();
    auto reg = load_registry();
    auto t = run_protocol(agent::TemplateId::trial_evaluation, "P001", "Harold Jennings", store,
                          reg, kRunDate);

    // Retrieval, five searches (pool never reaches 7), details, final verdict.
    REQUIRE(t.steps.size() == 8);
    CHECK(t.done_signal_seen);
    REQUIRE(t.steps[0].tool_calls.size() == 12);
    CHECK(t.steps[0].tool_calls[0].name == agent::ToolName::get_patient_details);
    CHECK(t.steps[0].tool_calls[1].name == agent::ToolName::get_diagnosis_details);
    const std::vector<std::string> note_order = {"pathology", "radiology", "surgery",
                                                 "medonc",    "radonc",    "urology",
                                                 "ent"};
    for (size_t i = 0; i < note_order.size(); ++i)
        CHECK(t.steps[0].tool_calls[5 + i].arguments.at("specialty") == note_order[i]);

    const auto& first_search = t.steps[1].tool_calls;
    REQUIRE(first_search.size() == 1);
    CHECK(first_search[0].name == agent::ToolName::get_list_of_clinical_trials);
    CHECK(first_search[0].arguments.at("conditions") ==
          json({"prostate cancer", "prostate adenocarcinoma", "carcinoma of the prostate"}));
    CHECK(first_search[0].arguments.at("interventions") ==
          json({"radiation therapy", "radiotherapy"}));
    CHECK(first_search[0].arguments.at("age") == 67.0);
    CHECK(first_search[0].arguments.at("sex") == "male");
    CHECK(t.steps[1].agent_message.find("### Patient Timeline") != std::string::npos);
    CHECK(t.steps[1].agent_message.find("### Expanded Search Inputs") != std::string::npos);
    CHECK(t.steps[2].agent_message.find(
              "Search 1 found 2 new unique trials; 2 unique trials so far.") !=
          std::string::npos);
    for (size_t step = 2; step <= 5; ++step) {
        REQUIRE(t.steps[step].tool_calls.size() == 1);
        CHECK(t.steps[step].tool_calls[0].name == agent::ToolName::get_list_of_clinical_trials);
    }
    REQUIRE(t.steps[6].tool_calls.size() == 3);
    CHECK(t.steps[6].tool_calls[0].arguments.at("nct_id") == "NCT00000001");
    CHECK(t.steps[6].tool_calls[2].arguments.at("nct_id") == "NCT00000003");

    const auto& final_message = t.steps[7].agent_message;
    CHECK(final_message.find("### Eligibility Evaluation") != std::string::npos);
    CHECK(final_message.find("age 67 above maximum 60") != std::string::npos);
    CHECK(final_message.find("Trials with no failed criteria: NCT00000001, NCT00000002.") !=
          std::string::npos);

    auto lexicon = load_lexicon();
    auto oracle = matcher::run_trial_matching(*store.find_patient("P001"), reg, lexicon,
                                              kNorthline, kRunDate, "Harold Jennings");
    CHECK(final_message.find(oracle.rendered) != std::string::npos);
    auto parsed = parser::extract_analysis_summary(final_message).value();
    CHECK(parsed.scenario == parser::Scenario::trials_found);
    REQUIRE(parsed.entries.size() == 2);
    CHECK(parsed.entries[0].nct_id == "NCT00000001");
    CHECK(parsed.entries[1].nct_id == "NCT00000002");

    auto again = run_protocol(agent::TemplateId::trial_evaluation, "P001", "Harold Jennings",
                              store, reg, kRunDate);
    CHECK(agent::to_json(t).dump() == agent::to_json(again).dump());
}

TEST_CASE("trial protocol: remaining smoke scenarios match the pipeline output") {
    auto store = load_smoke();
    auto reg = load_registry();
    auto lexicon = load_lexicon();

    // Breast consult: one eligible trial found on the third search.
    auto breast = run_protocol(agent::TemplateId::trial_evaluation, "P008", "Evelyn Marsh",
                               store, reg, kRunDate);
    auto breast_oracle = matcher::run_trial_matching(*store.find_patient("P008"), reg, lexicon,
                                                     kNorthline, kRunDate, "Evelyn Marsh");
    CHECK(breast.steps.back().agent_message.find(breast_oracle.rendered) != std::string::npos);
    auto breast_parsed =
        parser::extract_analysis_summary(breast.steps.back().agent_message).value();
    REQUIRE(breast_parsed.scenario == parser::Scenario::trials_found);
    REQUIRE(breast_parsed.entries.size() == 1);
    CHECK(breast_parsed.entries[0].nct_id == "NCT00000006");

    // Lung patient: every search is empty, so no trials are found.
    auto lung = run_protocol(agent::TemplateId::trial_evaluation, "P005", "Raymond Okada",
                             store, reg, kRunDate);
    auto lung_oracle = matcher::run_trial_matching(*store.find_patient("P005"), reg, lexicon,
                                                   kNorthline, kRunDate, "Raymond Okada");
    CHECK(lung_oracle.scenario == parser::Scenario::none_found);
    CHECK(lung.steps.back().agent_message.find(lung_oracle.rendered) != std::string::npos);
    // Five empty searches and an empty pool mean no details step.
    REQUIRE(lung.steps.size() == 7);
    CHECK(lung.steps.back().tool_calls.empty());

    // Unknown sex stops the protocol before any search.
    auto anonymous = run_protocol(agent::TemplateId::trial_evaluation, "P010", "P010", store,
                                  reg, kRunDate);
    REQUIRE(anonymous.steps.size() == 2);
    CHECK(anonymous.steps[1].tool_calls.empty());
    auto anonymous_oracle = matcher::run_trial_matching(*store.find_patient("P010"), reg,
                                                        lexicon, kNorthline, kRunDate, "P010");
    CHECK(anonymous_oracle.scenario == parser::Scenario::demographics_missing);
    CHECK(anonymous.steps.back().agent_message.find(anonymous_oracle.rendered) !=
          std::string::npos);

    // A registry outage surfaces as the search-error scenario.
    auto outage = run_protocol(agent::TemplateId::trial_evaluation, "P001", "Harold Jennings",
                               store, reg, kRunDate,
                               fault_on(agent::ToolName::get_list_of_clinical_trials));
    REQUIRE(outage.steps.size() == 3);
    auto outage_parsed =
        parser::extract_analysis_summary(outage.steps.back().agent_message).value();
    CHECK(outage_parsed.scenario == parser::Scenario::search_error);
    CHECK(outage.done_signal_seen);
}

TEST_CASE("chart reconstruction skips errors and lets later payloads win") {
    agent::AgentTranscript t;
    agent::TranscriptStep step;
    step.tool_calls = {{agent::ToolName::get_patient_details, json::object()},
                       {agent::ToolName::get_radiology_reports, json::object()},
                       {agent::ToolName::get_patient_details, json::object()}};
    step.tool_results = {
        json{{"section", "patient_details"},
             {"empty", false},
             {"content",
              {{"patient_id", "PX"}, {"name", "First Name"}, {"sex", "male"}}}},
        json{{"error", {{"code", "io"}, {"message", "down"}}}},
        json{{"section", "patient_details"},
             {"empty", false},
             {"content",
              {{"patient_id", "PX"},
               {"name", "Second Name"},
               {"sex", "male"},
               {"medications",
                {{{"name", "tamsulosin"}, {"start_date", "2025-04-01"}}}}}}},
    };
    t.steps.push_back(step);

    auto chart = agent::chart_from_tool_results(t);
    CHECK(chart.name == "Second Name");
    CHECK(chart.sex == domain::Sex::male);
    CHECK(chart.radiology_reports.empty());
    REQUIRE(chart.medications.size() == 1);
    CHECK(chart.medications[0].name == "tamsulosin");
}

TEST_CASE("tool calls parse from fenced blocks in free-form text") {
    const std::string text =
        "Let me look at the chart.\n"
        "```json\n"
        "{\"tool\": \"get_patient_details\", \"arguments\": {}}\n"
        "```\n"
        "And the notes plus trials:\n"
        "```\n"
        "[{\"tool\": \"get_clinical_notes\", \"arguments\": {\"specialty\": \"urology\"}},\n"
        " {\"tool\": \"count_to_ten\", \"arguments\": {}},\n"
        " {\"tool\": \"get_trial_details\", \"arguments\": {\"nct_id\": \"NCT00000001\"}}]\n"
        "```\n"
        "{\"tool\": \"get_appointments\"} outside any fence is ignored.\n";
    auto calls = agent::parse_tool_calls_from_text(text);
    REQUIRE(calls.size() == 3);
    CHECK(calls[0].name == agent::ToolName::get_patient_details);
    CHECK(calls[1].name == agent::ToolName::get_clinical_notes);
    CHECK(calls[1].arguments.at("specialty") == "urology");
    CHECK(calls[2].name == agent::ToolName::get_trial_details);

    CHECK(agent::parse_tool_calls_from_text("no fences here").empty());
    CHECK(agent::parse_tool_calls_from_text("```\nnot json\n```\n").empty());
}

TEST_CASE("transcripts serialize with steps, calls, and flags") {
    agent::AgentTranscript t;
    agent::TranscriptStep step;
    step.agent_message = "msg";
    step.tool_calls = {{agent::ToolName::get_appointments, json::object()}};
    step.tool_results = {json{{"section", "appointments_today"}}};
    t.steps.push_back(step);
    t.terminated = true;
    t.done_signal_seen = true;

    auto j = agent::to_json(t);
    CHECK(j.at("terminated") == true);
    CHECK(j.at("done_signal_seen") == true);
    REQUIRE(j.at("steps").size() == 1);
    CHECK(j.at("steps").at(0).at("agent_message") == "msg");
    CHECK(j.at("steps").at(0).at("tool_calls").at(0).at("tool") == "get_appointments");
}

}  // TEST_SUITE
