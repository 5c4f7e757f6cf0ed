// SPDX-License-Identifier: Apache-2.0
#include "ddose/agent.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "ddose/json_io.hpp"
#include "ddose/output_parser.hpp"
#include "ddose/text.hpp"

namespace ddose::agent {

using nlohmann::json;

// --- prompt templates --------------------------------------------------------

std::string_view to_string(TemplateId id) {
    return id == TemplateId::clinical_summary ? "clinical_summary" : "trial_evaluation";
}

Result<PromptTemplate> PromptTemplate::load(TemplateId id, const std::filesystem::path& file) {
    using R = Result<PromptTemplate>;
    std::ifstream in(file);
    if (!in) return R::failure("io", fmt::format("cannot open {}", file.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    PromptTemplate t;
    t.template_id = id;
    t.body = buf.str();
    if (t.body.empty()) return R::failure("malformed", fmt::format("{} is empty", file.string()));
    return t;
}

Result<PromptTemplate> load_prompt(TemplateId id, const std::filesystem::path& prompt_dir) {
    return PromptTemplate::load(id,
                                prompt_dir / fmt::format("{}.txt", to_string(id)));
}

namespace {

std::string placeholder_for(const std::string& key) {
    return fmt::format("{{physician_appointment[\"{}\"]}}", key);
}

}  // namespace

Result<std::string> render_prompt(const PromptTemplate& tmpl,
                                  const std::map<std::string, std::string>& bindings) {
    using R = Result<std::string>;
    std::string out = tmpl.body;
    for (const auto& [key, value] : bindings) {
        const std::string needle = placeholder_for(key);
        for (size_t at = out.find(needle); at != std::string::npos;
             at = out.find(needle, at + value.size()))
            out.replace(at, needle.size(), value);
    }
    static const std::string kOpen = "{physician_appointment[\"";
    if (const size_t at = out.find(kOpen); at != std::string::npos) {
        const size_t key_start = at + kOpen.size();
        const size_t key_end = out.find('"', key_start);
        const std::string key =
            key_end == std::string::npos ? "?" : out.substr(key_start, key_end - key_start);
        return R::failure("unbound_placeholder",
                          fmt::format("no binding for placeholder '{}'", key));
    }
    return out;
}

// --- tool names ------------------------------------------------------------------

std::string_view to_string(ToolName name) {
    switch (name) {
        case ToolName::get_patient_details: return "get_patient_details";
        case ToolName::get_treatment_details: return "get_treatment_details";
        case ToolName::get_diagnosis_details: return "get_diagnosis_details";
        case ToolName::get_appointments: return "get_appointments";
        case ToolName::get_radiology_reports: return "get_radiology_reports";
        case ToolName::get_pathology_reports: return "get_pathology_reports";
        case ToolName::get_clinical_notes: return "get_clinical_notes";
        case ToolName::get_list_of_clinical_trials: return "get_list_of_clinical_trials";
        case ToolName::get_trial_details: return "get_trial_details";
    }
    return "get_patient_details";
}

Result<ToolName> parse_tool_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(ToolName::get_trial_details); ++i) {
        const auto candidate = static_cast<ToolName>(i);
        if (to_string(candidate) == name) return candidate;
    }
    return Result<ToolName>::failure("bad_enum", fmt::format("unknown tool '{}'", name));
}

// --- transcripts --------------------------------------------------------------------

json to_json(const AgentTranscript& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json calls = json::array();
        for (const auto& c : s.tool_calls)
            calls.push_back({{"tool", std::string(to_string(c.name))},
                             {"arguments", c.arguments}});
        steps.push_back({{"agent_message", s.agent_message},
                         {"tool_calls", calls},
                         {"tool_results", s.tool_results}});
    }
    return json{{"steps", steps},
                {"terminated", t.terminated},
                {"done_signal_seen", t.done_signal_seen}};
}

// --- dispatch -------------------------------------------------------------------------

namespace {

json error_payload(std::string_view code, std::string_view message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

json section_payload(ehr::EhrSection section, const ehr::SectionPayload& p) {
    return json{{"section", std::string(ehr::to_string(section))},
                {"empty", p.empty},
                {"content", p.content}};
}

}  // namespace

json ToolDispatcher::dispatch(const ToolCall& call) const {
    if (fault)
        if (const auto injected = fault(call))
            return error_payload(injected->code, injected->message);
    if (!env_.store || !env_.registry) return error_payload("bad_env", "tool env not wired");
    if (!call.arguments.is_object()) return error_payload("bad_arguments", "arguments must be an object");

    auto section = [&](ehr::EhrSection s) -> json {
        auto payload = env_.store->get_section(env_.patient_id, s, env_.run_date);
        if (!payload) return error_payload(payload.error().code, payload.error().message);
        return section_payload(s, payload.value());
    };

    switch (call.name) {
        case ToolName::get_patient_details: {
            auto details = env_.store->get_section(env_.patient_id,
                                                   ehr::EhrSection::patient_details,
                                                   env_.run_date);
            if (!details) return error_payload(details.error().code, details.error().message);
            auto meds = env_.store->get_section(env_.patient_id, ehr::EhrSection::medications,
                                                env_.run_date);
            auto labs =
                env_.store->get_section(env_.patient_id, ehr::EhrSection::labs, env_.run_date);
            if (!meds || !labs) return error_payload("io", "sectioned retrieval failed");
            // The closed tool registry has no medications/labs tools; they
            // ride along with the patient details.
            ehr::SectionPayload bundle = details.value();
            bundle.content["medications"] = meds.value().content;
            bundle.content["labs"] = labs.value().content;
            bundle.empty =
                details.value().empty && meds.value().empty && labs.value().empty;
            return section_payload(ehr::EhrSection::patient_details, bundle);
        }
        case ToolName::get_treatment_details: return section(ehr::EhrSection::treatment_details);
        case ToolName::get_diagnosis_details: return section(ehr::EhrSection::diagnosis_details);
        case ToolName::get_appointments: return section(ehr::EhrSection::appointments_today);
        case ToolName::get_radiology_reports: return section(ehr::EhrSection::radiology_reports);
        case ToolName::get_pathology_reports: return section(ehr::EhrSection::pathology_reports);
        case ToolName::get_clinical_notes: {
            if (!call.arguments.contains("specialty") ||
                !call.arguments.at("specialty").is_string())
                return error_payload("bad_arguments",
                                     "get_clinical_notes needs a specialty string");
            const auto parsed =
                domain::parse_specialty(call.arguments.at("specialty").get<std::string>());
            if (!parsed) return error_payload("bad_arguments", parsed.error().message);
            switch (parsed.value()) {
                case domain::Specialty::radiology:
                    return section(ehr::EhrSection::notes_radiology);
                case domain::Specialty::pathology:
                    return section(ehr::EhrSection::notes_pathology);
                case domain::Specialty::surgery: return section(ehr::EhrSection::notes_surgery);
                case domain::Specialty::medonc: return section(ehr::EhrSection::notes_medonc);
                case domain::Specialty::ent: return section(ehr::EhrSection::notes_ent);
                case domain::Specialty::urology: return section(ehr::EhrSection::notes_urology);
                case domain::Specialty::radonc: return section(ehr::EhrSection::notes_radonc);
            }
            return error_payload("bad_arguments", "unhandled specialty");
        }
        case ToolName::get_list_of_clinical_trials: {
            registry::TrialQuery q;
            const auto& args = call.arguments;
            if (!args.contains("conditions") || !args.at("conditions").is_array() ||
                args.at("conditions").empty())
                return error_payload("bad_arguments",
                                     "get_list_of_clinical_trials needs condition terms");
            for (const auto& c : args.at("conditions")) {
                if (!c.is_string()) return error_payload("bad_arguments", "conditions must be strings");
                q.condition_terms.push_back(c.get<std::string>());
            }
            if (args.contains("interventions")) {
                if (!args.at("interventions").is_array())
                    return error_payload("bad_arguments", "interventions must be an array");
                for (const auto& i : args.at("interventions")) {
                    if (!i.is_string())
                        return error_payload("bad_arguments", "interventions must be strings");
                    q.intervention_terms.push_back(i.get<std::string>());
                }
            }
            if (args.contains("age")) {
                if (!args.at("age").is_number())
                    return error_payload("bad_arguments", "age must be a number");
                q.age_years = args.at("age").get<double>();
            }
            if (args.contains("sex")) {
                if (!args.at("sex").is_string())
                    return error_payload("bad_arguments", "sex must be a string");
                const auto parsed = registry::parse_trial_sex(args.at("sex").get<std::string>());
                if (!parsed || parsed.value() == registry::TrialSex::all)
                    return error_payload("bad_arguments", "sex must be female or male");
                q.sex = parsed.value();
            }
            q.institution = env_.institution;
            auto found = env_.registry->search_trials(q);
            if (!found) return error_payload(found.error().code, found.error().message);
            json studies = json::array();
            for (const auto& t : found.value()) studies.push_back(registry::to_json(t));
            return json{{"count", studies.size()}, {"studies", studies}};
        }
        case ToolName::get_trial_details: {
            if (!call.arguments.contains("nct_id") || !call.arguments.at("nct_id").is_string())
                return error_payload("bad_arguments", "get_trial_details needs an nct_id");
            auto trial =
                env_.registry->get_trial(call.arguments.at("nct_id").get<std::string>());
            if (!trial) return error_payload(trial.error().code, trial.error().message);
            return registry::to_json(trial.value());
        }
    }
    return error_payload("bad_enum", "unhandled tool");
}

// --- the loop -----------------------------------------------------------------------------

AgentTranscript run_agent(const std::string& prompt, AgentBackend& backend,
                          const ToolDispatcher& tools, const BackendLimits& limits) {
    AgentTranscript transcript;
    for (int step = 0; step < limits.max_steps; ++step) {
        AgentMessage msg = backend.next(prompt, transcript);
        TranscriptStep s;
        s.agent_message = std::move(msg.text);
        s.tool_calls = std::move(msg.tool_calls);
        s.tool_results.reserve(s.tool_calls.size());
        for (size_t i = 0; i < s.tool_calls.size(); ++i) {
            if (i >= static_cast<size_t>(limits.max_tool_calls_per_step))
                s.tool_results.push_back(error_payload(
                    "tool_limit",
                    fmt::format("call {} exceeds the per-step limit of {}", i + 1,
                                limits.max_tool_calls_per_step)));
            else
                s.tool_results.push_back(tools.dispatch(s.tool_calls[i]));
        }
        const bool done = parser::detect_done(s.agent_message);
        transcript.steps.push_back(std::move(s));
        if (done) {
            transcript.terminated = true;
            transcript.done_signal_seen = true;
            return transcript;
        }
    }
    transcript.terminated = true;
    transcript.done_signal_seen = false;
    return transcript;
}

// --- chart reconstruction -------------------------------------------------------------------

namespace {

template <typename T>
void fill_list(const json& arr, std::vector<T>& out,
                Result<T> (*parse)(const json&)) {
    if (!arr.is_array()) return;
    out.clear();
    for (const auto& item : arr)
        if (auto parsed = parse(item)) out.push_back(std::move(parsed).take());
}

void apply_patient_details(const json& content, domain::PatientChart& chart) {
    if (content.contains("patient_id") && content.at("patient_id").is_string())
        chart.patient_id = content.at("patient_id").get<std::string>();
    if (content.contains("name") && content.at("name").is_string())
        chart.name = content.at("name").get<std::string>();
    if (content.contains("date_of_birth") && content.at("date_of_birth").is_string())
        if (auto d = Date::parse(content.at("date_of_birth").get<std::string>()))
            chart.date_of_birth = d.value();
    if (content.contains("sex") && content.at("sex").is_string())
        if (auto s = domain::parse_sex(content.at("sex").get<std::string>()))
            chart.sex = s.value();
    if (content.contains("medications"))
        fill_list(content.at("medications"), chart.medications, jsonio::medication_from_json);
    if (content.contains("labs")) fill_list(content.at("labs"), chart.labs, jsonio::lab_from_json);
}

}  // namespace

domain::PatientChart chart_from_tool_results(const AgentTranscript& transcript) {
    domain::PatientChart chart;
    for (const auto& step : transcript.steps) {
        for (size_t i = 0; i < step.tool_calls.size() && i < step.tool_results.size(); ++i) {
            const auto& call = step.tool_calls[i];
            const auto& payload = step.tool_results[i];
            if (!payload.is_object() || payload.contains("error") ||
                !payload.contains("content"))
                continue;
            const json& content = payload.at("content");
            switch (call.name) {
                case ToolName::get_patient_details:
                    apply_patient_details(content, chart);
                    break;
                case ToolName::get_treatment_details:
                    fill_list(content, chart.treatments, jsonio::treatment_from_json);
                    break;
                case ToolName::get_diagnosis_details:
                    if (content.is_object()) {
                        if (content.contains("diagnoses"))
                            fill_list(content.at("diagnoses"), chart.diagnoses,
                                      jsonio::diagnosis_from_json);
                        if (content.contains("eligibility_facts"))
                            if (auto facts =
                                    jsonio::eligibility_from_json(content.at("eligibility_facts")))
                                chart.eligibility_facts = std::move(facts).take();
                    }
                    break;
                case ToolName::get_appointments:
                    fill_list(content, chart.appointments, jsonio::appointment_from_json);
                    break;
                case ToolName::get_radiology_reports:
                    fill_list(content, chart.radiology_reports, jsonio::dated_document_from_json);
                    break;
                case ToolName::get_pathology_reports:
                    fill_list(content, chart.pathology_reports, jsonio::dated_document_from_json);
                    break;
                case ToolName::get_clinical_notes: {
                    if (!call.arguments.contains("specialty") ||
                        !call.arguments.at("specialty").is_string())
                        break;
                    const auto sp = domain::parse_specialty(
                        call.arguments.at("specialty").get<std::string>());
                    if (!sp) break;
                    std::vector<domain::DatedDocument> docs;
                    fill_list(content, docs, jsonio::dated_document_from_json);
                    if (docs.empty())
                        chart.notes.erase(sp.value());
                    else
                        chart.notes[sp.value()] = std::move(docs);
                    break;
                }
                case ToolName::get_list_of_clinical_trials:
                case ToolName::get_trial_details:
                    break;
            }
        }
    }
    return chart;
}

// --- model-text tool-call extraction ------------------------------------------------------------

std::vector<ToolCall> parse_tool_calls_from_text(const std::string& text) {
    std::vector<ToolCall> calls;
    bool in_fence = false;
    std::string block;
    for (const auto& line : text::split_lines(text)) {
        if (text::trim(line).rfind("```", 0) == 0) {
            if (in_fence) {
                json parsed = json::parse(block, nullptr, false);
                auto consider = [&calls](const json& j) {
                    if (!j.is_object() || !j.contains("tool") || !j.at("tool").is_string())
                        return;
                    const auto name = parse_tool_name(j.at("tool").get<std::string>());
                    if (!name) return;
                    ToolCall c;
                    c.name = name.value();
                    if (j.contains("arguments") && j.at("arguments").is_object())
                        c.arguments = j.at("arguments");
                    calls.push_back(std::move(c));
                };
                if (parsed.is_array())
                    for (const auto& item : parsed) consider(item);
                else
                    consider(parsed);
                block.clear();
            }
            in_fence = !in_fence;
            continue;
        }
        if (in_fence) {
            block += line;
            block += '\n';
        }
    }
    return calls;
}

}  // namespace ddose::agent
