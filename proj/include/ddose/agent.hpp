// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddose/ehr_store.hpp"
#include "ddose/registry.hpp"
#include "ddose/trial_matcher.hpp"

namespace ddose::agent {

// --- prompt templates --------------------------------------------------------

enum class TemplateId { clinical_summary, trial_evaluation };
std::string_view to_string(TemplateId);

/// A prompt asset. `body` is the raw template text with literal
/// placeholders of the form {physician_appointment["<key>"]}.
struct PromptTemplate {
    TemplateId template_id = TemplateId::clinical_summary;
    std::string body;

    static Result<PromptTemplate> load(TemplateId id, const std::filesystem::path& file);
};

/// Loads the template from its canonical asset file under `prompt_dir`
/// (clinical_summary.txt / trial_evaluation.txt).
Result<PromptTemplate> load_prompt(TemplateId id, const std::filesystem::path& prompt_dir);

/// Exact textual substitution of every placeholder; no other bytes change.
/// Bindings are keyed by the inner placeholder key ("patient id",
/// "patient name"). Fails naming the first template placeholder without a
/// binding.
Result<std::string> render_prompt(const PromptTemplate& tmpl,
                                  const std::map<std::string, std::string>& bindings);

// --- tool registry -----------------------------------------------------------

enum class ToolName {
    get_patient_details,
    get_treatment_details,
    get_diagnosis_details,
    get_appointments,
    get_radiology_reports,
    get_pathology_reports,
    get_clinical_notes,
    get_list_of_clinical_trials,
    get_trial_details,
};
std::string_view to_string(ToolName);
Result<ToolName> parse_tool_name(std::string_view name);

struct ToolCall {
    ToolName name = ToolName::get_patient_details;
    nlohmann::json arguments = nlohmann::json::object();
    bool operator==(const ToolCall&) const = default;
};

// --- transcripts ---------------------------------------------------------------

struct TranscriptStep {
    std::string agent_message;
    std::vector<ToolCall> tool_calls;
    std::vector<nlohmann::json> tool_results;  // one per call, same order
    bool operator==(const TranscriptStep&) const = default;
};

struct AgentTranscript {
    std::vector<TranscriptStep> steps;
    bool terminated = false;
    bool done_signal_seen = false;  // false on a step-limit abort
    bool operator==(const AgentTranscript&) const = default;
};

/// Serialized form carried in run-log detail fields.
nlohmann::json to_json(const AgentTranscript&);

struct BackendLimits {
    int max_steps = 40;
    int max_tool_calls_per_step = 16;
    bool deterministic = true;
};

struct AgentMessage {
    std::string text;
    std::vector<ToolCall> tool_calls;
};

class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    /// Next message given everything so far. With deterministic backends
    /// this is a pure function of (prompt, transcript).
    virtual AgentMessage next(const std::string& prompt, const AgentTranscript& so_far) = 0;
};

// --- tool dispatch -------------------------------------------------------------

struct ToolEnv {
    const ehr::CohortStore* store = nullptr;
    registry::RegistryClient* registry = nullptr;
    std::string patient_id;
    std::string institution;
    Date run_date;
};

/// Validates and executes tool calls against the environment. EHR payloads
/// are {"section": ..., "empty": bool, "content": ...}; get_patient_details
/// bundles the medications and labs sections into its content (the closed
/// tool registry has no dedicated tools for them, yet the summary and
/// eligibility protocols need both). Registry payloads mirror the record
/// JSON. Every failure comes back as an {"error": {"code", "message"}}
/// payload, never an exception.
class ToolDispatcher {
public:
    explicit ToolDispatcher(ToolEnv env) : env_(std::move(env)) {}

    nlohmann::json dispatch(const ToolCall& call) const;

    const ToolEnv& env() const { return env_; }

    /// Fault-injection seam: a returned Error short-circuits the call.
    std::function<std::optional<Error>(const ToolCall&)> fault;

private:
    ToolEnv env_;
};

// --- the loop -------------------------------------------------------------------

/// Alternates backend messages with tool execution until the message text
/// carries a live `<DONE>` (fence-aware) or max_steps is hit. Calls past
/// max_tool_calls_per_step are not dispatched; they receive "tool_limit"
/// error payloads so result counts still match call counts.
AgentTranscript run_agent(const std::string& prompt, AgentBackend& backend,
                          const ToolDispatcher& tools, const BackendLimits& limits);

/// Rebuilds a PatientChart from every EHR tool payload in the transcript
/// (later payloads win per section). Error and registry payloads are
/// skipped; malformed section items are dropped, not fatal.
domain::PatientChart chart_from_tool_results(const AgentTranscript& transcript);

// --- backends --------------------------------------------------------------------

/// Deterministic reference backend: honors both prompt protocols with
/// output that is a pure function of (prompt, tool results, lexicon asset).
class RuleBackend : public AgentBackend {
public:
    explicit RuleBackend(matcher::Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

    AgentMessage next(const std::string& prompt, const AgentTranscript& so_far) override;

private:
    matcher::Lexicon lexicon_;
};

/// Extracts {"tool": ..., "arguments": {...}} objects from fenced blocks in
/// free-form model text. Unknown tool names are skipped.
std::vector<ToolCall> parse_tool_calls_from_text(const std::string& text);

/// Chat-completions-shaped adapter with temperature pinned to 0. Network
/// dependent; kept out of the test suite.
class HttpChatBackend : public AgentBackend {
public:
    struct Options {
        std::string host;
        int port = 0;
        std::string path = "/v1/chat/completions";
        std::string model = "gpt-4o";
        int timeout_seconds = 60;
    };
    explicit HttpChatBackend(Options options) : options_(std::move(options)) {}

    AgentMessage next(const std::string& prompt, const AgentTranscript& so_far) override;

private:
    Options options_;
};

}  // namespace ddose::agent
