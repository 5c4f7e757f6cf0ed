// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "ddose/agent.hpp"
#include "ddose/dates.hpp"
#include "ddose/digest.hpp"
#include "ddose/result.hpp"

namespace ddose::orchestrator {

// --- configuration ---------------------------------------------------------------

/// Everything the daily run needs, loadable from a JSON config file with
/// CLI flag overrides. Paths are resolved relative to the config file's
/// directory when loaded from disk.
struct RunConfig {
    std::filesystem::path cohort_path;
    std::string registry_mode = "file";  // "file" | "http"
    std::string registry_host = "127.0.0.1";
    int registry_port = 0;
    std::string institution = "Northline Cancer Center";
    int trigger_minutes = 5 * 60;  // local wall-clock trigger, default 05:00
    int max_retries = 3;           // re-attempts after the first try
    int parallelism = 3;           // max concurrent physician jobs
    int task_parallelism = 4;      // max concurrent appointment tasks per job
    std::string transport = "outbox";  // "outbox" | "smtp"
    std::string smtp_host = "127.0.0.1";
    int smtp_port = 25;
    std::string smtp_from = "daily-dose@northline.example";
    std::filesystem::path output_root = "outbox";
    std::filesystem::path archive_root = "archive";
    std::filesystem::path log_root = "logs";
    std::filesystem::path prompt_dir = "prompts";
    std::filesystem::path lexicon_file = "lexicon/synonyms.json";
    std::optional<Date> run_date;  // override; service mode uses the clock date
    std::optional<std::string> physician_filter;
    bool dry_run = false;

    Result<void> check() const;
};

/// Parses a JSON config file. Unknown keys fail loudly; relative paths are
/// re-anchored to the file's directory. trigger_time is "HH:MM".
Result<RunConfig> load_config(const std::filesystem::path& file);

// --- structured run log ----------------------------------------------------------

/// One JSON-lines event. Every key is always present so log consumers can
/// project columns without schema sniffing; detail is null unless the stage
/// carries a payload (agent transcripts ride on stage="transcript").
struct LogEvent {
    std::string run_id;
    std::string physician_id;
    std::string patient_id;
    std::string task;   // "summary" | "trial" | "delivery" | "archive" | ""
    std::string stage;  // run_start/attempt/transcript/digest/.../run_complete
    int attempt = 0;
    std::int64_t duration_ms = 0;
    std::string outcome;  // "ok" | "error" | ""
    std::string error;
    nlohmann::json detail;
};

nlohmann::json to_json(const LogEvent& event);

/// Serialized JSONL sink; safe for concurrent emit().
class RunLog {
public:
    explicit RunLog(std::filesystem::path file);

    Result<void> open();
    void emit(const LogEvent& event);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mu_;
};

// --- retry discipline ------------------------------------------------------------

struct RetryObservation {
    int attempt = 0;  // 1-based
    bool ok = false;
    const Error* error = nullptr;  // set when !ok
    std::int64_t duration_ms = 0;
};

template <typename T>
struct RetryOutcome {
    Result<T> result;
    int attempts = 0;
};

/// Initial attempt plus up to max_retries re-attempts; first success wins.
/// The task sees the 1-based attempt number; the observer sees every attempt.
template <typename F>
auto with_retry(F&& task, int max_retries,
                const std::function<void(const RetryObservation&)>& observe = {})
    -> RetryOutcome<typename std::invoke_result_t<F&, int>::value_type> {
    using T = typename std::invoke_result_t<F&, int>::value_type;
    RetryOutcome<T> outcome{Result<T>::failure("retry", "no attempt ran"), 0};
    for (int attempt = 1; attempt <= 1 + max_retries; ++attempt) {
        const auto t0 = std::chrono::steady_clock::now();
        outcome.result = task(attempt);
        outcome.attempts = attempt;
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        if (observe)
            observe({attempt, outcome.result.ok(),
                     outcome.result.ok() ? nullptr : &outcome.result.error(), elapsed});
        if (outcome.result.ok()) break;
    }
    return outcome;
}

// --- run report ------------------------------------------------------------------

struct TaskRecord {
    std::string task;  // "summary" | "trial" | "delivery" | "archive"
    std::string physician_id;
    std::string patient_id;      // empty for delivery/archive
    std::string appointment_id;  // empty for delivery/archive
    int attempts = 0;
    std::int64_t duration_ms = 0;
    std::string outcome;  // "ok" | "error"
    std::string error;
};

struct PhysicianOutcome {
    std::string physician_id;
    std::string outcome;  // "ok" | "error"
    std::string error;
    std::size_t appointments = 0;
    bool delivered = false;
    bool archived = false;
};

struct RunTotals {
    std::size_t physicians = 0;
    std::size_t appointments = 0;
    std::size_t summary_tasks = 0;
    std::size_t trial_tasks = 0;
    std::size_t failed_tasks = 0;
};

struct RunReport {
    std::string run_id;
    Date run_date;
    std::vector<PhysicianOutcome> physicians;
    std::vector<TaskRecord> tasks;  // deterministic order: physician, then clinic time
    RunTotals totals;
    std::filesystem::path log_path;
};

nlohmann::json to_json(const RunReport& report);

// --- fault injection and instrumentation -----------------------------------------

struct TaskAttempt {
    std::string physician_id;
    std::string patient_id;
    std::string task;
    int attempt = 0;  // 1-based
};

struct Hooks {
    /// Scripted whole-task faults, consulted at the start of each attempt.
    std::function<std::optional<Error>(const TaskAttempt&)> task_fault;
    /// Forwarded into every ToolDispatcher (patient id, then the call).
    std::function<std::optional<Error>(const std::string&, const agent::ToolCall&)> tool_fault;
    /// Called with +1 when a physician job starts executing, -1 when it ends.
    std::function<void(int)> physician_gauge;
};

// --- the daily run ---------------------------------------------------------------

/// Fans out over every physician with a schedule on `date` (bounded by
/// parallelism), runs the per-appointment task graph, and assembles,
/// delivers, and archives one digest per physician. Task failures after
/// retries become placeholder blocks and error records; they never abort
/// other physicians or appointments. Only cohort/asset load failures (and
/// an unwritable log) fail the whole run.
Result<RunReport> run_daily(const RunConfig& config, const Date& date, const Hooks& hooks = {});

// --- service mode ----------------------------------------------------------------

/// Wall-clock source. local_now() carries the current UTC offset, so a
/// fake clock can exercise DST transitions; sleep_for is the only way the
/// loop passes time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual LocalTimestamp local_now() = 0;
    virtual void sleep_for(std::chrono::milliseconds duration) = 0;
};

/// localtime_r-backed clock honouring the process time zone.
class SystemClock final : public Clock {
public:
    LocalTimestamp local_now() override;
    void sleep_for(std::chrono::milliseconds duration) override;
};

/// Sleeps until the next local trigger_minutes, invokes `run` with that
/// date, and repeats. Missed triggers (process down, or a trigger already
/// past on startup) are logged once at startup and never back-filled; the
/// last fired date persists at log_root/last-run. max_runs < 0 means run
/// forever (service mode); tests pass a small count.
void schedule_loop(const RunConfig& config, Clock& clock,
                   const std::function<void(const Date&)>& run, int max_runs,
                   const std::function<void(const LogEvent&)>& log = {});

/// "<date>-<epoch_ms>", strictly increasing within a process so two runs
/// in the same millisecond cannot collide in the archive.
std::string make_run_id(const Date& date);

}  // namespace ddose::orchestrator
