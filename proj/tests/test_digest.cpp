// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <arpa/inet.h>
#include <fmt/format.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "ddose/digest.hpp"
#include "ddose/ehr_store.hpp"
#include "ddose/text.hpp"

using namespace ddose;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSmoke = fs::path(DDOSE_SOURCE_ROOT) / "fixtures" / "smoke-3x10";
const Date kRunDate{2025, 8, 4};

ehr::CohortStore load_smoke() { return ehr::load_cohort(kSmoke).value(); }

std::string fixed_now() { return "2025-08-04T06:00:00Z"; }

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ddose-digest-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

digest::DigestEntry make_entry(const domain::Appointment& appointment, std::string summary) {
    digest::DigestEntry e;
    e.appointment = appointment;
    e.summary = {std::move(summary), false};
    return e;
}

parser::AnalysisSummary sample_trials() {
    parser::AnalysisSummary trials;
    trials.scenario = parser::Scenario::trials_found;
    trials.patient_display_name = "Harold Jennings";
    parser::TrialEntry first;
    first.nct_id = "NCT00000001";
    first.title = "Hypofractionated Radiation Therapy for Localized Prostate Cancer";
    first.met_summary = "age 67 within [18,75]; sex male matches requirement male";
    first.unknown_summary = "none";
    first.not_applicable_summary = "none";
    first.url = "https://clinicaltrials.gov/study/NCT00000001";
    parser::TrialEntry second = first;
    second.nct_id = "NCT00000002";
    second.title = "Proton Beam Therapy Versus IMRT & Surgery";
    second.url = "https://clinicaltrials.gov/study/NCT00000002";
    trials.entries = {first, second};
    return trials;
}

/// dr-A's 2025-08-04 clinic: 1 consult, 2 follow-ups, 1 simulation.
digest::DigestDocument build_dr_a_digest(const ehr::CohortStore& store) {
    const auto schedule = store.get_schedule("dr-A", kRunDate).value();
    REQUIRE(schedule.size() == 4);
    std::vector<digest::DigestEntry> entries;
    for (const auto& appointment : schedule)
        entries.push_back(make_entry(appointment, "Status summary for " +
                                                      appointment.patient_id + "."));
    entries[0].trials = sample_trials();
    // Shuffled input exercises the ordering invariant.
    std::swap(entries.front(), entries.back());
    return digest::build_digest(*store.find_physician("dr-A"), kRunDate, entries).value();
}

/// Minimal single-session SMTP endpoint capturing the DATA payload.
struct FakeSmtpServer {
    int listen_fd = -1;
    int port = 0;
    std::thread worker;
    std::string captured;
    std::atomic<bool> completed{false};

    FakeSmtpServer() {
        listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(listen_fd >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        socklen_t len = sizeof(addr);
        REQUIRE(::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
        port = ntohs(addr.sin_port);
        REQUIRE(::listen(listen_fd, 1) == 0);
        worker = std::thread([this] { serve(); });
    }

    ~FakeSmtpServer() {
        worker.join();
        ::close(listen_fd);
    }

    void serve() {
        const int client = ::accept(listen_fd, nullptr, nullptr);
        if (client < 0) return;
        auto say = [client](std::string_view reply) {
            (void)!::send(client, reply.data(), reply.size(), 0);
        };
        auto read_line = [client]() {
            std::string line;
            char c = 0;
            while (::recv(client, &c, 1, 0) == 1) {
                if (c == '\n') break;
                if (c != '\r') line += c;
            }
            return line;
        };
        say("220 fake ESMTP\r\n");
        for (;;) {
            const std::string line = read_line();
            if (line.empty() && captured.empty()) break;
            if (line.rfind("EHLO", 0) == 0) {
                say("250-fake greets you\r\n250 OK\r\n");
            } else if (line.rfind("MAIL", 0) == 0 || line.rfind("RCPT", 0) == 0) {
                say("250 OK\r\n");
            } else if (line == "DATA") {
                say("354 go ahead\r\n");
                for (std::string body = read_line(); body != "."; body = read_line()) {
                    captured += body;
                    captured += '\n';
                }
                say("250 queued\r\n");
                completed = true;
            } else if (line == "QUIT") {
                say("221 bye\r\n");
                break;
            } else {
                say("250 OK\r\n");
            }
        }
        ::close(client);
    }
};

}  // namespace

TEST_SUITE("digest") {

TEST_CASE("indicator map covers every visit kind with a distinct-purpose glyph") {
    const auto& map = digest::default_indicator_map();
    CHECK(map.at(domain::VisitKind::consult) == "🆕");
    CHECK(map.at(domain::VisitKind::new_visit) == "🆕");
    CHECK(map.at(domain::VisitKind::follow_up) == "🔁");
    CHECK(map.at(domain::VisitKind::simulation) == "📐");
    CHECK(map.at(domain::VisitKind::management) == "🩺");
    CHECK(map.at(domain::VisitKind::treatment) == "⚡");
    CHECK(map.at(domain::VisitKind::other) == "📋");
}

TEST_CASE("build_digest orders entries, gates trials, and renders five parts in order") {
    auto store = load_smoke();
    auto doc = build_dr_a_digest(store);

    REQUIRE(doc.entries.size() == 4);
    CHECK(doc.entries[0].appointment.appointment_id == "A-1001");
    CHECK(doc.entries[3].appointment.appointment_id == "A-1004");
    CHECK(doc.entries[0].indicator == "🆕");
    CHECK(doc.entries[1].indicator == "🔁");
    CHECK(doc.entries[2].indicator == "🔁");
    CHECK(doc.entries[3].indicator == "📐");

    const auto& md = doc.markdown_source;
    const size_t greeting_at = md.find("Good morning, Alice Okafor, MD!");
    const size_t first_entry_at = md.find("## 🆕 08:00 Consult - Prostate (P001)");
    const size_t closing_at = md.find("Questions or feedback?");
    REQUIRE(greeting_at != std::string::npos);
    REQUIRE(first_entry_at != std::string::npos);
    REQUIRE(closing_at != std::string::npos);
    CHECK(greeting_at < first_entry_at);
    CHECK(first_entry_at < closing_at);

    // Trials appear in the consult block and nowhere else.
    size_t trials_count = 0;
    for (size_t at = md.find("**Clinical trial eligibility**"); at != std::string::npos;
         at = md.find("**Clinical trial eligibility**", at + 1))
        ++trials_count;
    CHECK(trials_count == 1);
    const size_t follow_up_at = md.find("## 🔁 09:00 Follow Up - Breast (P002)");
    REQUIRE(follow_up_at != std::string::npos);
    CHECK(md.find("**Clinical trial eligibility**") < follow_up_at);
    CHECK(md.find("NCT00000001") < follow_up_at);

    // Deterministic bytes for equal inputs.
    CHECK(build_dr_a_digest(store).markdown_source == md);
}

TEST_CASE("build_digest rejects empty, foreign, misdated, and wrongly gated entries") {
    auto store = load_smoke();
    const auto& dr_a = *store.find_physician("dr-A");
    const auto schedule = store.get_schedule("dr-A", kRunDate).value();

    CHECK(digest::build_digest(dr_a, kRunDate, {}).error().code == "empty");

    auto foreign = make_entry(store.get_schedule("dr-B", kRunDate).value()[0], "s");
    CHECK(digest::build_digest(dr_a, kRunDate, {foreign}).error().code == "mismatch");

    auto misdated = make_entry(schedule[0], "s");
    CHECK(digest::build_digest(dr_a, Date{2025, 8, 5}, {misdated}).error().code == "mismatch");

    // A follow-up visit may not carry a trials section.
    auto gated = make_entry(schedule[1], "s");
    gated.trials = sample_trials();
    CHECK(digest::build_digest(dr_a, kRunDate, {gated}).error().code == "trials_gating");

    // The placeholder text flows through for failed summaries.
    auto placeholder = make_entry(schedule[0], std::string(digest::kSummaryPlaceholder));
    auto doc = digest::build_digest(dr_a, kRunDate, {placeholder}).value();
    CHECK(doc.markdown_source.find(digest::kSummaryPlaceholder) != std::string::npos);
}

TEST_CASE("render_html emits anchors, headings, lists, and escaped text") {
    auto store = load_smoke();
    auto doc = build_dr_a_digest(store);
    const auto& html = doc.html_rendered;

    CHECK(html.find("<h1>The Daily Dose</h1>") != std::string::npos);
    CHECK(html.find("<h2>🆕 08:00 Consult - Prostate (P001)</h2>") != std::string::npos);
    CHECK(html.find("<a href=\"https://clinicaltrials.gov/study/NCT00000001\">NCT00000001"
                    "</a>") != std::string::npos);
    CHECK(html.find("<a href=\"https://clinicaltrials.gov/study/NCT00000002\">") !=
          std::string::npos);
    CHECK(html.find("<a href=\"https://northline.example/daily-dose/feedback\">feedback "
                    "form</a>") != std::string::npos);
    CHECK(html.find("<li>Met: age 67 within [18,75]; sex male matches requirement male</li>") !=
          std::string::npos);
    CHECK(html.find("<strong>Patient status:</strong>") != std::string::npos);
    CHECK(html.find("<hr />") != std::string::npos);

    // Raw markup in content is escaped, and ampersands never leak through.
    CHECK(digest::render_html("plain <script>alert(1)</script> & co\n") ==
          "<p>plain &lt;script&gt;alert(1)&lt;/script&gt; &amp; co</p>\n");
    CHECK(html.find("IMRT &amp; Surgery") != std::string::npos);
    CHECK(digest::render_html("para one\ntwo\n\npara two\n") ==
          "<p>para one\ntwo</p>\n<p>para two</p>\n");
}

TEST_CASE("outbox transport writes file pairs and flags duplicates by content hash") {
    auto store = load_smoke();
    const auto root = fresh_dir("outbox");
    digest::OutboxTransport outbox(root, fixed_now);

    // One digest per physician with a non-empty clinic.
    std::vector<digest::DigestDocument> docs;
    for (const std::string id : {"dr-A", "dr-B", "dr-C"}) {
        const auto schedule = store.get_schedule(id, kRunDate).value();
        std::vector<digest::DigestEntry> entries;
        for (const auto& appointment : schedule)
            entries.push_back(make_entry(appointment, "Summary."));
        docs.push_back(
            digest::build_digest(*store.find_physician(id), kRunDate, entries).value());
    }
    for (const auto& doc : docs) {
        auto receipt = outbox.deliver(doc).value();
        CHECK_FALSE(receipt.duplicate);
        CHECK(receipt.timestamp == "2025-08-04T06:00:00Z");
        CHECK(receipt.transport == "outbox");
    }

    // Three file pairs, delivered bytes intact.
    for (const std::string id : {"dr-A", "dr-B", "dr-C"}) {
        CHECK(fs::exists(root / "2025-08-04" / (id + ".md")));
        CHECK(fs::exists(root / "2025-08-04" / (id + ".html")));
    }
    std::ifstream md(root / "2025-08-04" / "dr-A.md");
    const std::string body((std::istreambuf_iterator<char>(md)),
                           std::istreambuf_iterator<char>());
    CHECK(body == docs[0].markdown_source);

    // Same digest again: duplicate, flagged via the content hash.
    auto second = outbox.deliver(docs[0]).value();
    CHECK(second.duplicate);
    CHECK(second.content_hash == text::fnv1a_hex(docs[0].markdown_source));

    // The receipt log records every delivery and survives restarts.
    std::ifstream log(root / "receipts.jsonl");
    size_t lines = 0;
    for (std::string line; std::getline(log, line);) {
        CHECK_FALSE(json::parse(line).is_discarded());
        ++lines;
    }
    CHECK(lines == 4);
    digest::OutboxTransport reopened(root, fixed_now);
    CHECK(reopened.deliver(docs[0]).value().duplicate);
}

TEST_CASE("archive stores immutable copies and rejects re-archiving") {
    auto store = load_smoke();
    const auto root = fresh_dir("archive");
    digest::ArchiveStore archive(root);
    auto doc = build_dr_a_digest(store);
    const std::string run_id = "2025-08-04-1754294400000";

    const auto path = archive.archive(doc, run_id).value();
    CHECK(path == root / run_id / "dr-A.md");
    std::ifstream in(path);
    const std::string body((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    CHECK(body == doc.markdown_source);

    CHECK(archive.archive(doc, run_id).error().code == "conflict");
    CHECK(archive.archive(doc, "2025-08-05-1754380800000").ok());

    std::ifstream index(root / "index.jsonl");
    size_t rows = 0;
    for (std::string line; std::getline(index, line);) {
        const auto row = json::parse(line);
        CHECK(row.at("physician_id") == "dr-A");
        ++rows;
    }
    CHECK(rows == 2);
}

TEST_CASE("smtp transport submits a multipart message and surfaces refused connections") {
    auto store = load_smoke();
    auto doc = build_dr_a_digest(store);

    FakeSmtpServer server;
    digest::SmtpTransport::Options options;
    options.host = "127.0.0.1";
    options.port = server.port;
    options.now = fixed_now;
    digest::SmtpTransport smtp(options);
    auto receipt = smtp.deliver(doc).value();
    CHECK(receipt.transport == "smtp");
    CHECK(receipt.location ==
          fmt::format("smtp://127.0.0.1:{}/a.okafor@northline.example", server.port));
    while (!server.completed) std::this_thread::yield();
    CHECK(server.captured.find("To: Alice Okafor, MD <a.okafor@northline.example>") !=
          std::string::npos);
    CHECK(server.captured.find("Subject: The Daily Dose for 2025-08-04") != std::string::npos);
    CHECK(server.captured.find("Content-Type: multipart/alternative") != std::string::npos);
    CHECK(server.captured.find("Content-Type: text/plain") != std::string::npos);
    CHECK(server.captured.find("Content-Type: text/html") != std::string::npos);
    CHECK(server.captured.find("# The Daily Dose") != std::string::npos);
    CHECK(server.captured.find("<h1>The Daily Dose</h1>") != std::string::npos);

    // A port with no listener is a retryable transport error.
    int parked = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(parked, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    socklen_t len = sizeof(addr);
    REQUIRE(::getsockname(parked, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    const int dead_port = ntohs(addr.sin_port);
    ::close(parked);
    options.port = dead_port;
    digest::SmtpTransport refused(options);
    auto failure = refused.deliver(doc);
    REQUIRE_FALSE(failure.ok());
    CHECK(failure.error().code == "transport");
}

}  // TEST_SUITE
