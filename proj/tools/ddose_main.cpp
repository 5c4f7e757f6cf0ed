// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ddose/ehr_store.hpp"
#include "ddose/orchestrator.hpp"
#include "ddose/registry.hpp"
#include "ddose/survey.hpp"

namespace fs = std::filesystem;

namespace {

struct RunArgs {
    std::string config_file;
    std::string date;
    std::string physician;
    bool dry_run = false;
};

int report_error(const ddose::Error& error) {
    fmt::print(stderr, "error ({}): {}\n", error.code, error.message);
    return 1;
}

int cmd_run(const RunArgs& args) {
    auto config = ddose::orchestrator::load_config(args.config_file);
    if (!config.ok()) return report_error(config.error());

    if (!args.date.empty()) {
        auto date = ddose::Date::parse(args.date);
        if (!date.ok()) return report_error(date.error());
        config.value().run_date = date.value();
    }
    if (!args.physician.empty()) config.value().physician_filter = args.physician;
    if (args.dry_run) config.value().dry_run = true;

    if (!config.value().run_date)
        return report_error({"config", "no run date: pass --date or set run_date"});
    const ddose::Date date = *config.value().run_date;

    auto report = ddose::orchestrator::run_daily(config.value(), date);
    if (!report.ok()) return report_error(report.error());
    const auto& result = report.value();

    std::size_t failed_physicians = 0;
    for (const auto& physician : result.physicians)
        if (physician.outcome == "error") ++failed_physicians;

    fmt::print("run {} for {}{}\n", result.run_id, date.to_string(),
               config.value().dry_run ? " (dry run)" : "");
    fmt::print("physicians: {} ok, {} failed\n",
               result.physicians.size() - failed_physicians, failed_physicians);
    fmt::print("tasks: {} summaries, {} trial searches, {} exhausted\n",
               result.totals.summary_tasks, result.totals.trial_tasks,
               result.totals.failed_tasks);
    fmt::print("log: {}\n", result.log_path.string());

    for (const auto& physician : result.physicians)
        if (physician.outcome == "error")
            fmt::print(stderr, "failed physician {}: {}\n", physician.physician_id,
                       physician.error);
    for (const auto& task : result.tasks)
        if (task.outcome == "error")
            fmt::print(stderr, "degraded {} {} {}: {}\n", task.task, task.physician_id,
                       task.patient_id, task.error);

    if (config.value().physician_filter && result.physicians.empty()) {
        fmt::print(stderr, "no physician matches '{}' on {}\n",
                   *config.value().physician_filter, date.to_string());
        return 1;
    }
    // Exhausted tasks degrade single blocks but the digests still ship, so
    // only an undelivered physician makes the run itself a failure.
    return failed_physicians == 0 ? 0 : 1;
}

int cmd_serve(const std::string& config_file, int max_runs) {
    auto config = ddose::orchestrator::load_config(config_file);
    if (!config.ok()) return report_error(config.error());

    ddose::orchestrator::SystemClock clock;
    ddose::orchestrator::schedule_loop(
        config.value(), clock,
        [&](const ddose::Date& date) {
            auto report = ddose::orchestrator::run_daily(config.value(), date);
            if (!report.ok()) {
                fmt::print(stderr, "run for {} failed ({}): {}\n", date.to_string(),
                           report.error().code, report.error().message);
                return;
            }
            fmt::print("run {} for {} complete: {} physicians, {} exhausted tasks\n",
                       report.value().run_id, date.to_string(),
                       report.value().totals.physicians,
                       report.value().totals.failed_tasks);
        },
        max_runs,
        [](const ddose::orchestrator::LogEvent& event) {
            fmt::print(stderr, "{}\n", to_json(event).dump());
        });
    return 0;
}

int cmd_fixtures_validate(const std::string& root) {
    int findings = 0;
    auto cohort = ddose::ehr::load_cohort(root);
    if (!cohort.ok()) {
        fmt::print(stderr, "cohort ({}): {}\n", cohort.error().code,
                   cohort.error().message);
        ++findings;
    } else {
        fmt::print("cohort: {} patients, {} physicians\n",
                   cohort.value().patients().size(), cohort.value().physicians().size());
    }
    const fs::path trials_file = fs::path(root) / "registry" / "trials.json";
    auto registry = ddose::registry::FileRegistry::load(trials_file);
    if (!registry.ok()) {
        fmt::print(stderr, "registry ({}): {}\n", registry.error().code,
                   registry.error().message);
        ++findings;
    } else {
        fmt::print("registry: {} trials\n", registry.value().trials().size());
    }
    if (findings > 0) {
        fmt::print(stderr, "{} finding(s)\n", findings);
        return 1;
    }
    fmt::print("fixtures valid\n");
    return 0;
}

int cmd_survey_analyze(const std::string& data_file, const std::string& manifest_file) {
    auto report = ddose::survey::analyze_files(data_file, manifest_file);
    if (!report.ok()) return report_error(report.error());
    std::cout << report.value();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"daily digest pipeline: scheduled patient summaries, trial "
                 "shortlists, and survey analytics"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "execute one daily run");
    run->add_option("--config", run_args.config_file, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--date", run_args.date, "run date (YYYY-MM-DD)");
    run->add_option("--physician", run_args.physician, "only this physician id");
    run->add_flag("--dry-run", run_args.dry_run, "build and archive digests, skip delivery");

    std::string serve_config;
    int max_runs = -1;
    auto* serve = app.add_subcommand("serve", "run the daily trigger loop");
    serve->add_option("--config", serve_config, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    serve->add_option("--max-runs", max_runs, "stop after N runs (default: forever)");

    auto* fixtures = app.add_subcommand("fixtures", "fixture tooling");
    fixtures->require_subcommand(1);
    std::string fixtures_root;
    auto* validate = fixtures->add_subcommand("validate", "check a cohort fixture tree");
    validate->add_option("root", fixtures_root, "fixture root directory")
        ->required()
        ->check(CLI::ExistingDirectory);

    auto* survey = app.add_subcommand("survey", "survey analytics");
    survey->require_subcommand(1);
    std::string survey_data, survey_manifest;
    auto* analyze = survey->add_subcommand("analyze", "render the analysis report");
    analyze->add_option("data", survey_data, "response grid (CSV)")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--manifest", survey_manifest, "item manifest (JSON)")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? 0 : 2;
    }

    if (run->parsed()) return cmd_run(run_args);
    if (serve->parsed()) return cmd_serve(serve_config, max_runs);
    if (validate->parsed()) return cmd_fixtures_validate(fixtures_root);
    if (analyze->parsed()) return cmd_survey_analyze(survey_data, survey_manifest);
    return 2;
}
