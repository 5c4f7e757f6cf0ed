// SPDX-License-Identifier: Apache-2.0
#include "ddose/digest.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <ctime>
#include <fstream>

#include "ddose/text.hpp"

namespace ddose::digest {

using nlohmann::json;

const IndicatorMap& default_indicator_map() {
    static const IndicatorMap map = {
        {domain::VisitKind::consult, "🆕"},   {domain::VisitKind::new_visit, "🆕"},
        {domain::VisitKind::follow_up, "🔁"}, {domain::VisitKind::simulation, "📐"},
        {domain::VisitKind::management, "🩺"}, {domain::VisitKind::treatment, "⚡"},
        {domain::VisitKind::other, "📋"},
    };
    return map;
}

namespace {

std::string trials_block(const parser::AnalysisSummary& trials) {
    std::string out = "**Clinical trial eligibility**\n\n";
    switch (trials.scenario) {
        case parser::Scenario::trials_found: {
            int n = 0;
            for (const auto& entry : trials.entries)
                out += fmt::format(
                    "**{}. [{}]({})** {}\n\n"
                    "- Met: {}\n"
                    "- Unknown: {}\n"
                    "- Not applicable: {}\n\n",
                    ++n, entry.nct_id, entry.url, entry.title, entry.met_summary,
                    entry.unknown_summary, entry.not_applicable_summary);
            return out;
        }
        case parser::Scenario::none_found:
            return out + "No relevant clinical trials were found for this visit.\n\n";
        case parser::Scenario::demographics_missing:
            return out +
                   "Eligibility could not be evaluated because the patient's age and sex "
                   "could not be retrieved.\n\n";
        case parser::Scenario::search_error:
            return out +
                   "An error occurred while searching for clinical trials; eligibility "
                   "results are unavailable.\n\n";
    }
    return out;
}

}  // namespace

std::string render_markdown(const DigestDocument& digest) {
    std::string out = fmt::format("# The Daily Dose\n\n{}\n\n---\n\n", digest.greeting);
    for (const auto& entry : digest.entries) {
        out += fmt::format("## {} {} {} ({})\n\n", entry.indicator,
                           entry.appointment.start_time.hhmm(),
                           entry.appointment.raw_type_label, entry.appointment.patient_id);
        out += fmt::format("**Patient status:** {}\n\n", entry.summary.text);
        if (entry.trials) out += trials_block(*entry.trials);
    }
    out += fmt::format("---\n\n{}\n", digest.closing);
    return out;
}

Result<DigestDocument> build_digest(const ehr::PhysicianProfile& physician, const Date& run_date,
                                    std::vector<DigestEntry> entries,
                                    const IndicatorMap& indicators) {
    using R = Result<DigestDocument>;
    if (entries.empty())
        return R::failure("empty", fmt::format("no entries for {}", physician.physician_id));
    for (const auto& entry : entries) {
        if (entry.appointment.physician_id != physician.physician_id)
            return R::failure("mismatch",
                              fmt::format("appointment {} belongs to {}, not {}",
                                          entry.appointment.appointment_id,
                                          entry.appointment.physician_id,
                                          physician.physician_id));
        if (entry.appointment.start_time.date != run_date)
            return R::failure("mismatch",
                              fmt::format("appointment {} is on {}, not {}",
                                          entry.appointment.appointment_id,
                                          entry.appointment.start_time.date.to_string(),
                                          run_date.to_string()));
        if (entry.trials && !domain::is_trial_eligible_visit(entry.appointment.visit_kind))
            return R::failure(
                "trials_gating",
                fmt::format("appointment {} ({}) may not carry a trials section",
                            entry.appointment.appointment_id,
                            domain::to_string(entry.appointment.visit_kind)));
    }

    DigestDocument doc;
    doc.physician = physician;
    doc.run_date = run_date;
    doc.entries = std::move(entries);
    std::stable_sort(doc.entries.begin(), doc.entries.end(), [](const auto& a, const auto& b) {
        return a.appointment.start_time < b.appointment.start_time;
    });
    for (auto& entry : doc.entries) {
        const auto found = indicators.find(entry.appointment.visit_kind);
        entry.indicator = found != indicators.end() ? found->second : "📋";
    }
    doc.greeting = fmt::format(
        "Good morning, {}! Here is your Daily Dose for {}: {} scheduled {}.",
        physician.display_name, run_date.to_string(), doc.entries.size(),
        doc.entries.size() == 1 ? "appointment" : "appointments");
    doc.closing =
        "Questions or feedback? Contact the Daily Dose team at "
        "dailydose-support@northline.example or use the "
        "[feedback form](https://northline.example/daily-dose/feedback).";
    doc.markdown_source = render_markdown(doc);
    doc.html_rendered = render_html(doc.markdown_source);
    return doc;
}

// --- markdown -> HTML --------------------------------------------------------

namespace {

std::string escape_html(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (const char c : raw) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Inline pass over escaped text: links first, then bold spans.
std::string render_inline(std::string_view raw) {
    const std::string escaped = escape_html(raw);
    std::string linked;
    size_t at = 0;
    while (at < escaped.size()) {
        const size_t open = escaped.find('[', at);
        if (open == std::string::npos) {
            linked += escaped.substr(at);
            break;
        }
        const size_t mid = escaped.find("](", open);
        const size_t close = mid == std::string::npos ? mid : escaped.find(')', mid + 2);
        if (mid == std::string::npos || close == std::string::npos) {
            linked += escaped.substr(at, open - at + 1);
            at = open + 1;
            continue;
        }
        linked += escaped.substr(at, open - at);
        linked += fmt::format("<a href=\"{}\">{}</a>",
                              escaped.substr(mid + 2, close - mid - 2),
                              escaped.substr(open + 1, mid - open - 1));
        at = close + 1;
    }
    std::string out;
    at = 0;
    bool open_strong = false;
    while (at < linked.size()) {
        const size_t mark = linked.find("**", at);
        if (mark == std::string::npos) {
            out += linked.substr(at);
            break;
        }
        out += linked.substr(at, mark - at);
        out += open_strong ? "</strong>" : "<strong>";
        open_strong = !open_strong;
        at = mark + 2;
    }
    if (open_strong) out += "</strong>";  // unbalanced marker closes at end of line
    return out;
}

}  // namespace

std::string render_html(const std::string& markdown) {
    std::string out;
    std::vector<std::string> paragraph;
    bool in_list = false;

    auto flush_paragraph = [&] {
        if (paragraph.empty()) return;
        std::string joined;
        for (size_t i = 0; i < paragraph.size(); ++i) {
            if (i > 0) joined += '\n';
            joined += paragraph[i];
        }
        out += fmt::format("<p>{}</p>\n", render_inline(joined));
        paragraph.clear();
    };
    auto close_list = [&] {
        if (!in_list) return;
        out += "</ul>\n";
        in_list = false;
    };

    for (const auto& raw : text::split_lines(markdown)) {
        const std::string line = text::trim(raw);
        if (line.empty()) {
            flush_paragraph();
            close_list();
            continue;
        }
        size_t level = 0;
        while (level < line.size() && level < 6 && line[level] == '#') ++level;
        if (level > 0 && level < line.size() && line[level] == ' ') {
            flush_paragraph();
            close_list();
            out += fmt::format("<h{0}>{1}</h{0}>\n", level, render_inline(line.substr(level + 1)));
            continue;
        }
        if (line == "---") {
            flush_paragraph();
            close_list();
            out += "<hr />\n";
            continue;
        }
        if (line.rfind("- ", 0) == 0) {
            flush_paragraph();
            if (!in_list) {
                out += "<ul>\n";
                in_list = true;
            }
            out += fmt::format("<li>{}</li>\n", render_inline(line.substr(2)));
            continue;
        }
        close_list();
        paragraph.push_back(line);
    }
    flush_paragraph();
    close_list();
    return out;
}

// --- delivery -----------------------------------------------------------------

json to_json(const DeliveryReceipt& r) {
    return json{{"physician_id", r.physician_id}, {"run_date", r.run_date},
                {"transport", r.transport},       {"timestamp", r.timestamp},
                {"content_hash", r.content_hash}, {"duplicate", r.duplicate},
                {"location", r.location}};
}

std::string system_clock_now() {
    const std::time_t now = std::time(nullptr);
    return fmt::format("{:%FT%T}Z", fmt::gmtime(now));
}

OutboxTransport::OutboxTransport(std::filesystem::path root, std::function<std::string()> now)
    : root_(std::move(root)), now_(std::move(now)) {
    std::ifstream log(root_ / "receipts.jsonl");
    for (std::string line; std::getline(log, line);) {
        const json receipt = json::parse(line, nullptr, false);
        if (receipt.is_discarded() || !receipt.is_object()) continue;
        delivered_[receipt.value("run_date", "") + "/" + receipt.value("physician_id", "")] =
            receipt.value("content_hash", "");
    }
}

Result<DeliveryReceipt> OutboxTransport::deliver(const DigestDocument& digest) {
    using R = Result<DeliveryReceipt>;
    const std::string date = digest.run_date.to_string();
    const auto dir = root_ / date;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return R::failure("transport", fmt::format("cannot create {}", dir.string()));

    const auto md_path = dir / (digest.physician.physician_id + ".md");
    const auto html_path = dir / (digest.physician.physician_id + ".html");
    {
        std::ofstream md(md_path, std::ios::trunc);
        md << digest.markdown_source;
        std::ofstream html(html_path, std::ios::trunc);
        html << digest.html_rendered;
        if (!md || !html)
            return R::failure("transport", fmt::format("cannot write {}", md_path.string()));
    }

    DeliveryReceipt receipt;
    receipt.physician_id = digest.physician.physician_id;
    receipt.run_date = date;
    receipt.transport = "outbox";
    receipt.timestamp = now_();
    receipt.content_hash = text::fnv1a_hex(digest.markdown_source);
    receipt.location = md_path.string();

    const std::lock_guard<std::mutex> lock(mutex_);
    const std::string key = date + "/" + receipt.physician_id;
    const auto seen = delivered_.find(key);
    receipt.duplicate = seen != delivered_.end() && seen->second == receipt.content_hash;
    delivered_[key] = receipt.content_hash;
    std::ofstream log(root_ / "receipts.jsonl", std::ios::app);
    log << to_json(receipt).dump() << '\n';
    if (!log) return R::failure("transport", "cannot append receipt log");
    return receipt;
}

// --- archive ------------------------------------------------------------------

Result<std::filesystem::path> ArchiveStore::archive(const DigestDocument& digest,
                                                    const std::string& run_id) {
    using R = Result<std::filesystem::path>;
    const auto dir = root_ / run_id;
    const auto md_path = dir / (digest.physician.physician_id + ".md");
    const std::lock_guard<std::mutex> lock(mutex_);
    if (std::filesystem::exists(md_path))
        return R::failure("conflict",
                          fmt::format("{} is already archived for run {}",
                                      digest.physician.physician_id, run_id));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return R::failure("io", fmt::format("cannot create {}", dir.string()));
    {
        std::ofstream md(md_path, std::ios::trunc);
        md << digest.markdown_source;
        std::ofstream html(dir / (digest.physician.physician_id + ".html"), std::ios::trunc);
        html << digest.html_rendered;
        if (!md || !html)
            return R::failure("io", fmt::format("cannot write {}", md_path.string()));
    }
    std::ofstream index(root_ / "index.jsonl", std::ios::app);
    index << json{{"run_id", run_id},
                  {"physician_id", digest.physician.physician_id},
                  {"run_date", digest.run_date.to_string()},
                  {"content_hash", text::fnv1a_hex(digest.markdown_source)},
                  {"path", md_path.string()}}
                 .dump()
          << '\n';
    if (!index) return R::failure("io", "cannot append archive index");
    return md_path;
}

}  // namespace ddose::digest
