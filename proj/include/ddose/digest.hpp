// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddose/domain.hpp"
#include "ddose/ehr_store.hpp"
#include "ddose/output_parser.hpp"

namespace ddose::digest {

/// Block text used when summary generation failed after all retries.
inline constexpr std::string_view kSummaryPlaceholder =
    "A summary could not be generated for this patient.";

/// Visit-kind indicator glyphs, shipped as swappable configuration.
using IndicatorMap = std::map<domain::VisitKind, std::string>;
const IndicatorMap& default_indicator_map();

struct DigestEntry {
    domain::Appointment appointment;
    std::string indicator;  // single pictographic symbol, filled by build_digest
    parser::SummaryPayload summary;  // or the standard placeholder text
    std::optional<parser::AnalysisSummary> trials;  // new/consult visits only
    bool operator==(const DigestEntry&) const = default;
};

struct DigestDocument {
    ehr::PhysicianProfile physician;
    Date run_date;
    std::string greeting;
    std::vector<DigestEntry> entries;  // ordered by appointment start_time
    std::string closing;
    std::string markdown_source;
    std::string html_rendered;
    bool operator==(const DigestDocument&) const = default;
};

/// Assembles the five-part digest: greeting, per-appointment blocks with
/// indicator and visit type, the status summary, trial eligibility for
/// new/consult visits only, and a closing with contact info and feedback
/// link. Entries are sorted by start time; markdown and HTML renderings
/// are filled in. Deterministic bytes for equal inputs.
/// Errors: "empty" (no entries), "mismatch" (entry not owned by this
/// physician and date), "trials_gating" (trials attached to a visit kind
/// that is not trial-eligible).
Result<DigestDocument> build_digest(const ehr::PhysicianProfile& physician, const Date& run_date,
                                    std::vector<DigestEntry> entries,
                                    const IndicatorMap& indicators = default_indicator_map());

/// Markdown is the source of truth for everything delivered.
std::string render_markdown(const DigestDocument& digest);

/// CommonMark-conformant rendering of the markdown subset the digests use:
/// ATX headings, paragraphs, unordered lists, thematic breaks, bold spans,
/// and inline links. Text is HTML-escaped; rendering is pure.
std::string render_html(const std::string& markdown);

// --- delivery -----------------------------------------------------------------

struct DeliveryReceipt {
    std::string physician_id;
    std::string run_date;   // ISO date of the digest
    std::string transport;  // "outbox" or "smtp"
    std::string timestamp;  // ISO-8601, from the transport's clock
    std::string content_hash;  // FNV-1a of the markdown source
    bool duplicate = false;    // same (date, physician) content seen before
    std::string location;      // file path or smtp target
    bool operator==(const DeliveryReceipt&) const = default;
};

nlohmann::json to_json(const DeliveryReceipt&);

class Transport {
public:
    virtual ~Transport() = default;
    virtual Result<DeliveryReceipt> deliver(const DigestDocument& digest) = 0;
};

/// Wall-clock ISO-8601 UTC timestamp; transports take an injectable clock
/// so tests stay deterministic.
std::string system_clock_now();

/// Filesystem transport: writes `<root>/<date>/<physician_id>.md` and
/// `.html`, appends a receipt line to `<root>/receipts.jsonl`, and flags
/// duplicate deliveries by content hash (the receipt log is replayed on
/// construction, so the flag survives process restarts).
class OutboxTransport : public Transport {
public:
    explicit OutboxTransport(std::filesystem::path root,
                             std::function<std::string()> now = system_clock_now);

    Result<DeliveryReceipt> deliver(const DigestDocument& digest) override;

private:
    std::filesystem::path root_;
    std::function<std::string()> now_;
    std::mutex mutex_;
    std::map<std::string, std::string> delivered_;  // "<date>/<physician>" -> hash
};

/// Minimal SMTP submission over a POSIX socket: one message per digest
/// with a text/plain (markdown) and text/html alternative. Connection or
/// dialogue failures come back as code "transport" (retryable).
class SmtpTransport : public Transport {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 25;
        std::string from_address = "daily-dose@northline.example";
        std::function<std::string()> now = system_clock_now;
    };
    explicit SmtpTransport(Options options) : options_(std::move(options)) {}

    Result<DeliveryReceipt> deliver(const DigestDocument& digest) override;

private:
    Options options_;
    std::mutex mutex_;
    std::map<std::string, std::string> delivered_;
};

// --- archive ---------------------------------------------------------------------

/// Immutable run archive: `<root>/<run_id>/<physician_id>.md` (+ `.html`)
/// plus an append-only `<root>/index.jsonl`. Re-archiving the same
/// (run_id, physician) is a "conflict" error; archived bytes equal the
/// delivered markdown.
class ArchiveStore {
public:
    explicit ArchiveStore(std::filesystem::path root) : root_(std::move(root)) {}

    Result<std::filesystem::path> archive(const DigestDocument& digest,
                                          const std::string& run_id);

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    std::mutex mutex_;  // index append is serialized
};

}  // namespace ddose::digest
