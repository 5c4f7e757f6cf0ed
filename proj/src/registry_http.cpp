// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <semaphore>

#include "httplib.h"

#include "ddose/registry.hpp"

namespace ddose::registry {

using nlohmann::json;

namespace {

std::string join_terms(const std::vector<std::string>& terms) {
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out.push_back('|');
        out += t;
    }
    return out;
}

}  // namespace

struct HttpRegistry::Impl {
    Options options;
    std::counting_semaphore<256> in_flight;

    explicit Impl(Options o)
        : options(std::move(o)),
          in_flight(std::clamp(options.max_in_flight, 1, 256)) {}

    /// One client per request: httplib clients are not safe for concurrent
    /// calls, and the semaphore already bounds parallelism.
    httplib::Result get(const std::string& path, const httplib::Params& params) {
        in_flight.acquire();
        httplib::Client client(options.host, options.port);
        client.set_connection_timeout(options.timeout_seconds, 0);
        client.set_read_timeout(options.timeout_seconds, 0);
        auto res = client.Get(path, params, httplib::Headers{});
        in_flight.release();
        return res;
    }
};

HttpRegistry::HttpRegistry(Options options) : impl_(std::make_unique<Impl>(std::move(options))) {}
HttpRegistry::~HttpRegistry() = default;

Result<std::vector<TrialRecord>> HttpRegistry::search_trials(const TrialQuery& query) {
    using R = Result<std::vector<TrialRecord>>;
    if (query.condition_terms.empty())
        return R::failure("search_error", "query needs at least one condition term");

    std::vector<TrialRecord> collected;
    std::string page_token;
    do {
        httplib::Params params{
            {"query.cond", join_terms(query.condition_terms)},
            {"filter.overallStatus", "RECRUITING"},
            {"query.locn", query.institution},
            {"pageSize", std::to_string(impl_->options.page_size)},
        };
        if (!query.intervention_terms.empty())
            params.emplace("query.intr", join_terms(query.intervention_terms));
        if (query.age_years) params.emplace("query.age", fmt::format("{}", *query.age_years));
        if (query.sex) params.emplace("query.sex", std::string(to_string(*query.sex)));
        if (!page_token.empty()) params.emplace("pageToken", page_token);

        auto res = impl_->get("/studies", params);
        if (!res)
            return R::failure("search_error",
                              fmt::format("transport: {}", httplib::to_string(res.error())));
        if (res->status != 200)
            return R::failure("search_error", fmt::format("HTTP {}", res->status));

        json doc;
        try {
            doc = json::parse(res->body);
        } catch (const json::parse_error& e) {
            return R::failure("search_error", fmt::format("malformed response: {}", e.what()));
        }
        if (!doc.contains("studies") || !doc.at("studies").is_array())
            return R::failure("search_error", "malformed response: missing studies array");
        for (const auto& item : doc.at("studies")) {
            auto t = trial_from_json(item);
            if (!t)
                return R::failure("search_error",
                                  fmt::format("malformed study: {}", t.error().message));
            collected.push_back(std::move(t).take());
            if (collected.size() >= static_cast<size_t>(kMaxTrialsPerQuery)) break;
        }
        if (collected.size() >= static_cast<size_t>(kMaxTrialsPerQuery)) break;
        page_token = doc.value("nextPageToken", std::string{});
    } while (!page_token.empty());

    // The server is advisory; the frozen matching semantics apply locally.
    std::vector<TrialRecord> out;
    std::vector<std::string> seen;
    for (auto& t : collected) {
        if (std::find(seen.begin(), seen.end(), t.nct_id) != seen.end()) continue;
        seen.push_back(t.nct_id);
        if (matches_query(t, query)) out.push_back(std::move(t));
    }
    std::sort(out.begin(), out.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.nct_id < b.nct_id; });
    return out;
}

Result<TrialRecord> HttpRegistry::get_trial(const std::string& nct_id) {
    using R = Result<TrialRecord>;
    if (!valid_nct_id(nct_id))
        return R::failure("bad_nct_id",
                          fmt::format("nct_id '{}' is not NCT followed by 8 digits", nct_id));
    auto res = impl_->get("/studies/" + nct_id, httplib::Params{});
    if (!res)
        return R::failure("transport",
                          fmt::format("transport: {}", httplib::to_string(res.error())));
    if (res->status == 404)
        return R::failure("unknown_trial", fmt::format("unknown trial {}", nct_id));
    if (res->status != 200) return R::failure("transport", fmt::format("HTTP {}", res->status));
    json doc;
    try {
        doc = json::parse(res->body);
    } catch (const json::parse_error& e) {
        return R::failure("transport", fmt::format("malformed response: {}", e.what()));
    }
    return trial_from_json(doc);
}

}  // namespace ddose::registry
