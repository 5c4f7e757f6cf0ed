// SPDX-License-Identifier: Apache-2.0
#include "ddose/orchestrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <memory>
#include <semaphore>
#include <set>
#include <thread>

#include "ddose/ehr_store.hpp"
#include "ddose/output_parser.hpp"
#include "ddose/registry.hpp"
#include "ddose/text.hpp"
#include "ddose/trial_matcher.hpp"

namespace ddose::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration ---------------------------------------------------------------

Result<void> RunConfig::check() const {
    if (cohort_path.empty())
        return Result<void>::failure("config", "cohort_path must be set");
    if (registry_mode != "file" && registry_mode != "http")
        return Result<void>::failure("config", "registry_mode must be file or http");
    if (transport != "outbox" && transport != "smtp")
        return Result<void>::failure("config", "transport must be outbox or smtp");
    if (trigger_minutes < 0 || trigger_minutes >= 24 * 60)
        return Result<void>::failure("config", "trigger_time must fall within one day");
    if (max_retries < 0) return Result<void>::failure("config", "max_retries must be >= 0");
    if (parallelism < 1) return Result<void>::failure("config", "parallelism must be >= 1");
    if (task_parallelism < 1)
        return Result<void>::failure("config", "task_parallelism must be >= 1");
    return Result<void>::success();
}

namespace {

Result<int> parse_trigger(const std::string& hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':' || !std::isdigit(hhmm[0]) ||
        !std::isdigit(hhmm[1]) || !std::isdigit(hhmm[3]) || !std::isdigit(hhmm[4]))
        return Result<int>::failure("config", "trigger_time must be HH:MM");
    const int hours = (hhmm[0] - '0') * 10 + (hhmm[1] - '0');
    const int minutes = (hhmm[3] - '0') * 10 + (hhmm[4] - '0');
    if (hours > 23 || minutes > 59)
        return Result<int>::failure("config", "trigger_time out of range: " + hhmm);
    return hours * 60 + minutes;
}

fs::path anchored(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : base / p;
}

}  // namespace

Result<RunConfig> load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) return Result<RunConfig>::failure("io", "cannot read config: " + file.string());
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        return Result<RunConfig>::failure("malformed", "config is not a JSON object");

    static const std::set<std::string> known = {
        "cohort",        "registry_mode", "registry_host",    "registry_port",
        "institution",   "trigger_time",  "max_retries",      "parallelism",
        "task_parallelism", "transport",  "smtp_host",        "smtp_port",
        "smtp_from",     "output_root",   "archive_root",     "log_root",
        "prompt_dir",    "lexicon_file",  "run_date",         "physician",
        "dry_run",
    };
    for (const auto& [key, _] : doc.items())
        if (!known.count(key))
            return Result<RunConfig>::failure("unknown_key", "unknown config key: " + key);

    RunConfig cfg;
    try {
        if (doc.contains("cohort")) cfg.cohort_path = doc.at("cohort").get<std::string>();
        if (doc.contains("registry_mode")) cfg.registry_mode = doc.at("registry_mode");
        if (doc.contains("registry_host")) cfg.registry_host = doc.at("registry_host");
        if (doc.contains("registry_port")) cfg.registry_port = doc.at("registry_port");
        if (doc.contains("institution")) cfg.institution = doc.at("institution");
        if (doc.contains("trigger_time")) {
            auto minutes = parse_trigger(doc.at("trigger_time").get<std::string>());
            if (!minutes.ok()) return minutes.error();
            cfg.trigger_minutes = minutes.value();
        }
        if (doc.contains("max_retries")) cfg.max_retries = doc.at("max_retries");
        if (doc.contains("parallelism")) cfg.parallelism = doc.at("parallelism");
        if (doc.contains("task_parallelism")) cfg.task_parallelism = doc.at("task_parallelism");
        if (doc.contains("transport")) cfg.transport = doc.at("transport");
        if (doc.contains("smtp_host")) cfg.smtp_host = doc.at("smtp_host");
        if (doc.contains("smtp_port")) cfg.smtp_port = doc.at("smtp_port");
        if (doc.contains("smtp_from")) cfg.smtp_from = doc.at("smtp_from");
        if (doc.contains("output_root"))
            cfg.output_root = doc.at("output_root").get<std::string>();
        if (doc.contains("archive_root"))
            cfg.archive_root = doc.at("archive_root").get<std::string>();
        if (doc.contains("log_root")) cfg.log_root = doc.at("log_root").get<std::string>();
        if (doc.contains("prompt_dir")) cfg.prompt_dir = doc.at("prompt_dir").get<std::string>();
        if (doc.contains("lexicon_file"))
            cfg.lexicon_file = doc.at("lexicon_file").get<std::string>();
        if (doc.contains("run_date")) {
            auto date = Date::parse(doc.at("run_date").get<std::string>());
            if (!date.ok()) return date.error();
            cfg.run_date = date.value();
        }
        if (doc.contains("physician"))
            cfg.physician_filter = doc.at("physician").get<std::string>();
        if (doc.contains("dry_run")) cfg.dry_run = doc.at("dry_run").get<bool>();
    } catch (const json::exception& e) {
        return Result<RunConfig>::failure("malformed", std::string("config: ") + e.what());
    }

    const fs::path base = file.parent_path();
    cfg.cohort_path = anchored(base, cfg.cohort_path);
    cfg.output_root = anchored(base, cfg.output_root);
    cfg.archive_root = anchored(base, cfg.archive_root);
    cfg.log_root = anchored(base, cfg.log_root);
    cfg.prompt_dir = anchored(base, cfg.prompt_dir);
    cfg.lexicon_file = anchored(base, cfg.lexicon_file);

    if (auto checked = cfg.check(); !checked.ok()) return checked.error();
    return cfg;
}

// --- structured run log ----------------------------------------------------------

json to_json(const LogEvent& event) {
    return json{{"run_id", event.run_id},     {"physician_id", event.physician_id},
                {"patient_id", event.patient_id}, {"task", event.task},
                {"stage", event.stage},       {"attempt", event.attempt},
                {"duration_ms", event.duration_ms}, {"outcome", event.outcome},
                {"error", event.error},       {"detail", event.detail}};
}

RunLog::RunLog(fs::path file) : path_(std::move(file)) {}

Result<void> RunLog::open() {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
    out_.open(path_, std::ios::trunc);
    if (!out_) return Result<void>::failure("io", "cannot open run log: " + path_.string());
    return Result<void>::success();
}

void RunLog::emit(const LogEvent& event) {
    const std::string line = to_json(event).dump();
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line << '\n';
    out_.flush();
}

// --- run report ------------------------------------------------------------------

json to_json(const RunReport& report) {
    json physicians = json::array();
    for (const auto& p : report.physicians)
        physicians.push_back({{"physician_id", p.physician_id},
                              {"outcome", p.outcome},
                              {"error", p.error},
                              {"appointments", p.appointments},
                              {"delivered", p.delivered},
                              {"archived", p.archived}});
    json tasks = json::array();
    for (const auto& t : report.tasks)
        tasks.push_back({{"task", t.task},
                         {"physician_id", t.physician_id},
                         {"patient_id", t.patient_id},
                         {"appointment_id", t.appointment_id},
                         {"attempts", t.attempts},
                         {"duration_ms", t.duration_ms},
                         {"outcome", t.outcome},
                         {"error", t.error}});
    return json{{"run_id", report.run_id},
                {"run_date", report.run_date.to_string()},
                {"physicians", physicians},
                {"tasks", tasks},
                {"totals",
                 {{"physicians", report.totals.physicians},
                  {"appointments", report.totals.appointments},
                  {"summary_tasks", report.totals.summary_tasks},
                  {"trial_tasks", report.totals.trial_tasks},
                  {"failed_tasks", report.totals.failed_tasks}}},
                {"log_path", report.log_path.string()}};
}

std::string make_run_id(const Date& date) {
    static std::atomic<std::int64_t> last{0};
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
    std::int64_t prev = last.load();
    for (;;) {
        const std::int64_t next = std::max(ms, prev + 1);
        if (last.compare_exchange_weak(prev, next)) {
            ms = next;
            break;
        }
    }
    return fmt::format("{}-{}", date.to_string(), ms);
}

// --- the daily run ---------------------------------------------------------------

namespace {

struct RunEnv {
    const RunConfig* config = nullptr;
    const Hooks* hooks = nullptr;
    const ehr::CohortStore* cohort = nullptr;
    registry::RegistryClient* registry = nullptr;
    const agent::PromptTemplate* clinical = nullptr;
    const agent::PromptTemplate* trial = nullptr;
    const matcher::Lexicon* lexicon = nullptr;
    digest::Transport* transport = nullptr;
    digest::ArchiveStore* archive = nullptr;
    RunLog* log = nullptr;
    std::string run_id;
    Date date;
};

struct PhysicianSlot {
    PhysicianOutcome outcome;
    std::vector<TaskRecord> tasks;
};

std::string describe(const Error& error) { return error.code + ": " + error.message; }

/// One agent episode: render, run, log the transcript, extract the result.
template <typename Extract>
auto run_episode(const RunEnv& env, const std::string& physician_id,
                 const std::string& patient_id, const std::string& task, int attempt,
                 agent::TemplateId id, const agent::PromptTemplate& tmpl, Extract&& extract)
    -> std::invoke_result_t<Extract&, const std::string&> {
    using R = std::invoke_result_t<Extract&, const std::string&>;
    const auto* chart = env.cohort->find_patient(patient_id);
    const std::string name = chart ? chart->name : "";
    auto rendered = agent::render_prompt(
        tmpl, {{"patient id", patient_id}, {"patient name", name}});
    if (!rendered.ok()) return R(rendered.error());
    (void)id;

    agent::ToolEnv tool_env{env.cohort, env.registry, patient_id,
                            env.config->institution, env.date};
    agent::ToolDispatcher dispatcher(std::move(tool_env));
    if (env.hooks->tool_fault)
        dispatcher.fault = [&env, patient_id](const agent::ToolCall& call) {
            return env.hooks->tool_fault(patient_id, call);
        };
    agent::RuleBackend backend(*env.lexicon);
    const auto transcript =
        agent::run_agent(rendered.value(), backend, dispatcher, agent::BackendLimits{});
    env.log->emit({env.run_id, physician_id, patient_id, task, "transcript", attempt, 0, "",
                   "", agent::to_json(transcript)});
    if (!transcript.done_signal_seen)
        return R::failure("incomplete", "agent stopped without a done signal");
    return extract(transcript.steps.back().agent_message);
}

/// Runs one appointment's tasks and fills its digest entry. Records go
/// into `records` (summary first, trial second when gated in).
void run_appointment(const RunEnv& env, const std::string& physician_id,
                     const domain::Appointment& appointment, digest::DigestEntry& entry,
                     std::vector<TaskRecord>& records) {
    const std::string& pid = appointment.patient_id;
    entry.appointment = appointment;

    auto observe = [&env, &physician_id, &pid](const std::string& task) {
        return [&env, &physician_id, &pid, task](const RetryObservation& obs) {
            env.log->emit({env.run_id, physician_id, pid, task, "attempt", obs.attempt,
                           obs.duration_ms, obs.ok ? "ok" : "error",
                           obs.ok ? "" : describe(*obs.error), nullptr});
        };
    };
    auto record = [&](const std::string& task, int attempts, bool ok,
                      const std::string& error) {
        records.push_back({task, physician_id, pid, appointment.appointment_id, attempts, 0,
                           ok ? "ok" : "error", error});
    };

    auto summary = with_retry(
        [&](int attempt) -> Result<parser::SummaryPayload> {
            if (env.hooks->task_fault)
                if (auto fault = env.hooks->task_fault({physician_id, pid, "summary", attempt}))
                    return Result<parser::SummaryPayload>::failure(fault->code, fault->message);
            return run_episode(env, physician_id, pid, "summary", attempt,
                               agent::TemplateId::clinical_summary, *env.clinical,
                               parser::extract_json_summary);
        },
        env.config->max_retries, observe("summary"));
    record("summary", summary.attempts, summary.result.ok(),
           summary.result.ok() ? "" : describe(summary.result.error()));
    entry.summary = summary.result.ok()
                        ? summary.result.value()
                        : parser::SummaryPayload{std::string(digest::kSummaryPlaceholder), true};

    if (!domain::is_trial_eligible_visit(appointment.visit_kind)) return;

    auto trial = with_retry(
        [&](int attempt) -> Result<parser::AnalysisSummary> {
            if (env.hooks->task_fault)
                if (auto fault = env.hooks->task_fault({physician_id, pid, "trial", attempt}))
                    return Result<parser::AnalysisSummary>::failure(fault->code, fault->message);
            return run_episode(env, physician_id, pid, "trial", attempt,
                               agent::TemplateId::trial_evaluation, *env.trial,
                               parser::extract_analysis_summary);
        },
        env.config->max_retries, observe("trial"));
    record("trial", trial.attempts, trial.result.ok(),
           trial.result.ok() ? "" : describe(trial.result.error()));
    if (trial.result.ok()) {
        entry.trials = trial.result.value();
    } else {
        // The reader sees the same message a failed registry search produces.
        parser::AnalysisSummary degraded;
        degraded.scenario = parser::Scenario::search_error;
        const auto* chart = env.cohort->find_patient(pid);
        degraded.patient_display_name = chart ? chart->name : pid;
        entry.trials = degraded;
    }
}

PhysicianSlot run_physician(const RunEnv& env, const std::string& physician_id) {
    PhysicianSlot slot;
    slot.outcome.physician_id = physician_id;
    slot.outcome.outcome = "ok";

    const auto* profile = env.cohort->find_physician(physician_id);
    auto schedule = env.cohort->get_schedule(physician_id, env.date);
    if (profile == nullptr || !schedule.ok()) {
        slot.outcome.outcome = "error";
        slot.outcome.error = profile == nullptr ? "unknown physician"
                                                : describe(schedule.error());
        env.log->emit({env.run_id, physician_id, "", "", "physician_complete", 0, 0, "error",
                       slot.outcome.error, nullptr});
        return slot;
    }
    const auto& appointments = schedule.value();
    slot.outcome.appointments = appointments.size();
    env.log->emit({env.run_id, physician_id, "", "", "physician_start", 0, 0, "", "",
                   json{{"appointments", appointments.size()}}});

    // Appointment tasks run concurrently, bounded; the digest waits for all.
    std::vector<digest::DigestEntry> entries(appointments.size());
    std::vector<std::vector<TaskRecord>> records(appointments.size());
    std::counting_semaphore<> task_slots(env.config->task_parallelism);
    std::vector<std::thread> workers;
    workers.reserve(appointments.size());
    for (std::size_t i = 0; i < appointments.size(); ++i)
        workers.emplace_back([&, i] {
            task_slots.acquire();
            run_appointment(env, physician_id, appointments[i], entries[i], records[i]);
            task_slots.release();
        });
    for (auto& worker : workers) worker.join();
    for (auto& batch : records)
        slot.tasks.insert(slot.tasks.end(), batch.begin(), batch.end());

    auto built = digest::build_digest(*profile, env.date, entries);
    if (!built.ok()) {
        slot.outcome.outcome = "error";
        slot.outcome.error = "digest: " + describe(built.error());
        env.log->emit({env.run_id, physician_id, "", "", "physician_complete", 0, 0, "error",
                       slot.outcome.error, nullptr});
        return slot;
    }
    const auto& doc = built.value();
    env.log->emit({env.run_id, physician_id, "", "", "digest", 0, 0, "ok", "",
                   json{{"content_hash", text::fnv1a_hex(doc.markdown_source)},
                        {"dry_run", env.config->dry_run}}});

    if (!env.config->dry_run) {
        auto delivery = with_retry(
            [&](int) -> Result<digest::DeliveryReceipt> { return env.transport->deliver(doc); },
            env.config->max_retries, [&](const RetryObservation& obs) {
                env.log->emit({env.run_id, physician_id, "", "delivery", "attempt",
                               obs.attempt, obs.duration_ms, obs.ok ? "ok" : "error",
                               obs.ok ? "" : describe(*obs.error), nullptr});
            });
        slot.tasks.push_back({"delivery", physician_id, "", "", delivery.attempts, 0,
                              delivery.result.ok() ? "ok" : "error",
                              delivery.result.ok() ? "" : describe(delivery.result.error())});
        slot.outcome.delivered = delivery.result.ok();
        if (!delivery.result.ok()) {
            slot.outcome.outcome = "error";
            slot.outcome.error = "delivery: " + describe(delivery.result.error());
        }
    }

    const std::string archive_id =
        env.config->dry_run ? env.run_id + "-dry" : env.run_id;
    auto archived = with_retry(
        [&](int) -> Result<fs::path> { return env.archive->archive(doc, archive_id); },
        env.config->max_retries, [&](const RetryObservation& obs) {
            env.log->emit({env.run_id, physician_id, "", "archive", "attempt", obs.attempt,
                           obs.duration_ms, obs.ok ? "ok" : "error",
                           obs.ok ? "" : describe(*obs.error), nullptr});
        });
    slot.tasks.push_back({"archive", physician_id, "", "", archived.attempts, 0,
                          archived.result.ok() ? "ok" : "error",
                          archived.result.ok() ? "" : describe(archived.result.error())});
    slot.outcome.archived = archived.result.ok();
    if (!archived.result.ok()) {
        slot.outcome.outcome = "error";
        slot.outcome.error = "archive: " + describe(archived.result.error());
    }

    env.log->emit({env.run_id, physician_id, "", "", "physician_complete", 0, 0,
                   slot.outcome.outcome, slot.outcome.error, nullptr});
    return slot;
}

}  // namespace

Result<RunReport> run_daily(const RunConfig& config, const Date& date, const Hooks& hooks) {
    if (auto checked = config.check(); !checked.ok())
        return Result<RunReport>::failure(checked.error().code, checked.error().message);

    auto cohort = ehr::load_cohort(config.cohort_path);
    if (!cohort.ok())
        return Result<RunReport>::failure("cohort", describe(cohort.error()));

    std::unique_ptr<registry::RegistryClient> registry;
    if (config.registry_mode == "file") {
        auto loaded = registry::FileRegistry::load(config.cohort_path / "registry" /
                                                   "trials.json");
        if (!loaded.ok())
            return Result<RunReport>::failure("registry", describe(loaded.error()));
        registry = std::make_unique<registry::FileRegistry>(std::move(loaded).take());
    } else {
        registry::HttpRegistry::Options options;
        options.host = config.registry_host;
        options.port = config.registry_port;
        registry = std::make_unique<registry::HttpRegistry>(options);
    }

    auto clinical = agent::load_prompt(agent::TemplateId::clinical_summary, config.prompt_dir);
    if (!clinical.ok())
        return Result<RunReport>::failure("assets", describe(clinical.error()));
    auto trial = agent::load_prompt(agent::TemplateId::trial_evaluation, config.prompt_dir);
    if (!trial.ok()) return Result<RunReport>::failure("assets", describe(trial.error()));
    auto lexicon = matcher::Lexicon::load(config.lexicon_file);
    if (!lexicon.ok()) return Result<RunReport>::failure("assets", describe(lexicon.error()));

    RunReport report;
    report.run_id = make_run_id(date);
    report.run_date = date;

    RunLog log(config.log_root / ("run-" + report.run_id + ".jsonl"));
    if (auto opened = log.open(); !opened.ok())
        return Result<RunReport>::failure("log", opened.error().message);
    report.log_path = log.path();

    digest::OutboxTransport outbox(config.output_root);
    digest::SmtpTransport::Options smtp_options;
    smtp_options.host = config.smtp_host;
    smtp_options.port = config.smtp_port;
    smtp_options.from_address = config.smtp_from;
    digest::SmtpTransport smtp(smtp_options);
    digest::Transport* transport =
        config.transport == "smtp" ? static_cast<digest::Transport*>(&smtp) : &outbox;
    digest::ArchiveStore archive(config.archive_root);

    std::vector<std::string> physicians = cohort.value().list_physicians(date);
    if (config.physician_filter) {
        std::erase_if(physicians, [&](const std::string& id) {
            return id != *config.physician_filter;
        });
    }

    RunEnv env;
    env.config = &config;
    env.hooks = &hooks;
    env.cohort = &cohort.value();
    env.registry = registry.get();
    env.clinical = &clinical.value();
    env.trial = &trial.value();
    env.lexicon = &lexicon.value();
    env.transport = transport;
    env.archive = &archive;
    env.log = &log;
    env.run_id = report.run_id;
    env.date = date;

    log.emit({report.run_id, "", "", "", "run_start", 0, 0, "", "",
              json{{"date", date.to_string()}, {"physicians", physicians.size()},
                   {"dry_run", config.dry_run}}});

    // Physician jobs fan out, bounded by parallelism; one slot per job keeps
    // the report order deterministic regardless of completion order.
    std::vector<PhysicianSlot> slots(physicians.size());
    std::counting_semaphore<> physician_slots(config.parallelism);
    std::vector<std::thread> jobs;
    jobs.reserve(physicians.size());
    for (std::size_t i = 0; i < physicians.size(); ++i)
        jobs.emplace_back([&, i] {
            physician_slots.acquire();
            if (hooks.physician_gauge) hooks.physician_gauge(+1);
            slots[i] = run_physician(env, physicians[i]);
            if (hooks.physician_gauge) hooks.physician_gauge(-1);
            physician_slots.release();
        });
    for (auto& job : jobs) job.join();

    for (auto& slot : slots) {
        report.totals.physicians += 1;
        report.totals.appointments += slot.outcome.appointments;
        for (auto& task : slot.tasks) {
            if (task.task == "summary") report.totals.summary_tasks += 1;
            if (task.task == "trial") report.totals.trial_tasks += 1;
            if (task.outcome == "error") report.totals.failed_tasks += 1;
        }
        report.physicians.push_back(std::move(slot.outcome));
        report.tasks.insert(report.tasks.end(), std::make_move_iterator(slot.tasks.begin()),
                            std::make_move_iterator(slot.tasks.end()));
    }

    log.emit({report.run_id, "", "", "", "run_complete", 0, 0, "ok", "",
              json{{"physicians", report.totals.physicians},
                   {"appointments", report.totals.appointments},
                   {"summary_tasks", report.totals.summary_tasks},
                   {"trial_tasks", report.totals.trial_tasks},
                   {"failed_tasks", report.totals.failed_tasks}}});
    return report;
}

// --- service mode ----------------------------------------------------------------

LocalTimestamp SystemClock::local_now() {
    const std::time_t now = std::time(nullptr);
    std::tm local{};
    localtime_r(&now, &local);
    const long offset_seconds = local.tm_gmtoff;
    LocalTimestamp ts;
    ts.date = Date{local.tm_year + 1900, static_cast<unsigned>(local.tm_mon + 1),
                   static_cast<unsigned>(local.tm_mday)};
    ts.seconds_of_day = local.tm_hour * 3600 + local.tm_min * 60 + local.tm_sec;
    ts.offset_minutes = static_cast<int>(offset_seconds / 60);
    return ts;
}

void SystemClock::sleep_for(std::chrono::milliseconds duration) {
    std::this_thread::sleep_for(duration);
}

namespace {

std::optional<Date> read_last_run(const fs::path& file) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    std::string text;
    std::getline(in, text);
    auto date = Date::parse(text);
    if (!date.ok()) return std::nullopt;
    return date.value();
}

void write_last_run(const fs::path& file, const Date& date) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    std::ofstream out(file, std::ios::trunc);
    out << date.to_string() << '\n';
}

}  // namespace

void schedule_loop(const RunConfig& config, Clock& clock,
                   const std::function<void(const Date&)>& run, int max_runs,
                   const std::function<void(const LogEvent&)>& log) {
    const int trigger_seconds = config.trigger_minutes * 60;
    const fs::path state_file = config.log_root / "last-run";
    auto emit = [&log](LogEvent event) {
        if (log) log(std::move(event));
    };

    // Triggers that elapsed while the process was down are logged, not run.
    if (const auto last_run = read_last_run(state_file)) {
        const auto now = clock.local_now();
        for (Date cursor = add_days(*last_run, 1);
             cursor < now.date ||
             (cursor == now.date && now.seconds_of_day >= trigger_seconds);
             cursor = add_days(cursor, 1))
            emit({"scheduler", "", "", "", "missed_trigger", 0, 0, "", "",
                  json{{"date", cursor.to_string()}}});
    }

    for (int runs = 0; max_runs < 0 || runs < max_runs; ++runs) {
        auto now = clock.local_now();
        const Date target = now.seconds_of_day < trigger_seconds
                                ? now.date
                                : add_days(now.date, 1);
        for (;;) {
            now = clock.local_now();
            if (now.date > target ||
                (now.date == target && now.seconds_of_day >= trigger_seconds))
                break;
            // Chunked sleep with re-check: an offset change mid-wait (DST)
            // moves the wall clock, and the trigger tracks wall time.
            const std::int64_t remaining_ms =
                (days_between(now.date, target) * 86400LL + trigger_seconds -
                 now.seconds_of_day) *
                1000;
            clock.sleep_for(std::chrono::milliseconds(
                std::min<std::int64_t>(remaining_ms, 30'000)));
        }
        emit({"scheduler", "", "", "", "trigger_fired", 0, 0, "", "",
              json{{"date", target.to_string()}}});
        run(target);
        write_last_run(state_file, target);
    }
}

}  // namespace ddose::orchestrator
