// SPDX-License-Identifier: Apache-2.0
#include "ddose/registry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "ddose/text.hpp"

namespace ddose::registry {

using nlohmann::json;

std::string_view to_string(TrialStatus s) {
    switch (s) {
        case TrialStatus::recruiting: return "recruiting";
        case TrialStatus::active_not_recruiting: return "active_not_recruiting";
        case TrialStatus::completed: return "completed";
        case TrialStatus::other: return "other";
    }
    return "other";
}

std::string_view to_string(TrialSex s) {
    switch (s) {
        case TrialSex::all: return "all";
        case TrialSex::female: return "female";
        case TrialSex::male: return "male";
    }
    return "all";
}

std::string_view to_string(Polarity p) {
    return p == Polarity::inclusion ? "inclusion" : "exclusion";
}

Result<TrialStatus> parse_trial_status(std::string_view s) {
    for (auto v : {TrialStatus::recruiting, TrialStatus::active_not_recruiting,
                   TrialStatus::completed, TrialStatus::other})
        if (s == to_string(v)) return v;
    return Result<TrialStatus>::failure("bad_enum", fmt::format("unknown trial status: '{}'", s));
}

Result<TrialSex> parse_trial_sex(std::string_view s) {
    for (auto v : {TrialSex::all, TrialSex::female, TrialSex::male})
        if (s == to_string(v)) return v;
    return Result<TrialSex>::failure("bad_enum", fmt::format("unknown trial sex: '{}'", s));
}

Result<Polarity> parse_polarity(std::string_view s) {
    for (auto v : {Polarity::inclusion, Polarity::exclusion})
        if (s == to_string(v)) return v;
    return Result<Polarity>::failure("bad_enum", fmt::format("unknown polarity: '{}'", s));
}

bool valid_nct_id(std::string_view id) {
    if (id.size() != 11 || id.substr(0, 3) != "NCT") return false;
    for (char c : id.substr(3))
        if (c < '0' || c > '9') return false;
    return true;
}

bool matches_query(const TrialRecord& trial, const TrialQuery& query) {
    if (trial.overall_status != TrialStatus::recruiting) return false;
    if (std::find(trial.locations.begin(), trial.locations.end(), query.institution) ==
        trial.locations.end())
        return false;
    if (query.age_years) {
        if (trial.min_age_years && *query.age_years < *trial.min_age_years) return false;
        if (trial.max_age_years && *query.age_years > *trial.max_age_years) return false;
    }
    if (query.sex && trial.sex != TrialSex::all) {
        if (*query.sex == TrialSex::female && trial.sex != TrialSex::female) return false;
        if (*query.sex == TrialSex::male && trial.sex != TrialSex::male) return false;
    }
    auto any_term_matches = [](const std::vector<std::string>& terms,
                               const std::vector<std::string>& tags) {
        for (const auto& term : terms)
            for (const auto& tag : tags)
                if (text::token_phrase_match(term, tag)) return true;
        return false;
    };
    if (!any_term_matches(query.condition_terms, trial.conditions)) return false;
    if (!query.intervention_terms.empty() &&
        !any_term_matches(query.intervention_terms, trial.interventions))
        return false;
    return true;
}

// --- JSON -------------------------------------------------------------

json to_json(const Criterion& c) {
    json predicate;
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, AgeRangePredicate>) {
                predicate["kind"] = "age_range";
                if (p.min_years) predicate["min_years"] = *p.min_years;
                if (p.max_years) predicate["max_years"] = *p.max_years;
            } else if constexpr (std::is_same_v<P, SexPredicate>) {
                predicate = json{{"kind", "sex"}, {"sex", std::string(to_string(p.sex))}};
            } else if constexpr (std::is_same_v<P, DiagnosisMatchPredicate>) {
                predicate = json{{"kind", "diagnosis_match"}, {"term", p.term}};
            } else if constexpr (std::is_same_v<P, RequiresPriorTreatmentPredicate>) {
                predicate = json{{"kind", "requires_prior_treatment"}, {"term", p.term}};
            } else if constexpr (std::is_same_v<P, ExcludesPriorTreatmentPredicate>) {
                predicate = json{{"kind", "excludes_prior_treatment"}, {"term", p.term}};
            } else if constexpr (std::is_same_v<P, LabThresholdPredicate>) {
                predicate = json{{"kind", "lab_threshold"},
                                 {"analyte", p.analyte},
                                 {"op", p.op},
                                 {"value", p.value},
                                 {"unit", p.unit}};
            } else if constexpr (std::is_same_v<P, EcogMaxPredicate>) {
                predicate = json{{"kind", "ecog_max"}, {"max", p.max}};
            } else {
                predicate = json{{"kind", "free_text"}, {"text", p.text}};
            }
        },
        c.predicate);
    json out{{"criterion_id", c.criterion_id},
             {"description", c.description},
             {"polarity", std::string(to_string(c.polarity))},
             {"predicate", predicate}};
    if (c.applies_to_site) out["applies_to_site"] = *c.applies_to_site;
    return out;
}

json to_json(const TrialRecord& t) {
    json criteria = json::array();
    for (const auto& c : t.criteria) criteria.push_back(to_json(c));
    json out{{"nct_id", t.nct_id},
             {"title", t.title},
             {"overall_status", std::string(to_string(t.overall_status))},
             {"locations", t.locations},
             {"conditions", t.conditions},
             {"interventions", t.interventions},
             {"sex", std::string(to_string(t.sex))},
             {"criteria", criteria},
             {"url", t.url}};
    if (t.min_age_years) out["min_age_years"] = *t.min_age_years;
    if (t.max_age_years) out["max_age_years"] = *t.max_age_years;
    return out;
}

Result<Criterion> criterion_from_json(const json& j) {
    using R = Result<Criterion>;
    Criterion c;
    try {
        c.criterion_id = j.at("criterion_id").get<std::string>();
        c.description = j.at("description").get<std::string>();
        auto pol = parse_polarity(j.at("polarity").get<std::string>());
        if (!pol) return {pol.error()};
        c.polarity = pol.value();
        if (j.contains("applies_to_site"))
            c.applies_to_site = j.at("applies_to_site").get<std::string>();

        const json& p = j.at("predicate");
        const std::string kind = p.at("kind").get<std::string>();
        if (kind == "age_range") {
            AgeRangePredicate a;
            if (p.contains("min_years")) a.min_years = p.at("min_years").get<double>();
            if (p.contains("max_years")) a.max_years = p.at("max_years").get<double>();
            if (!a.min_years && !a.max_years)
                return R::failure("malformed", "age_range needs min_years or max_years");
            c.predicate = a;
        } else if (kind == "sex") {
            auto s = parse_trial_sex(p.at("sex").get<std::string>());
            if (!s) return {s.error()};
            if (s.value() == TrialSex::all)
                return R::failure("malformed", "sex criterion must name female or male");
            c.predicate = SexPredicate{s.value()};
        } else if (kind == "diagnosis_match") {
            c.predicate = DiagnosisMatchPredicate{p.at("term").get<std::string>()};
        } else if (kind == "requires_prior_treatment") {
            c.predicate = RequiresPriorTreatmentPredicate{p.at("term").get<std::string>()};
        } else if (kind == "excludes_prior_treatment") {
            c.predicate = ExcludesPriorTreatmentPredicate{p.at("term").get<std::string>()};
        } else if (kind == "lab_threshold") {
            LabThresholdPredicate l;
            l.analyte = p.at("analyte").get<std::string>();
            l.op = p.at("op").get<std::string>();
            l.value = p.at("value").get<double>();
            l.unit = p.value("unit", std::string{});
            if (l.op != "<" && l.op != "<=" && l.op != ">" && l.op != ">=")
                return R::failure("malformed", fmt::format("bad lab_threshold op '{}'", l.op));
            c.predicate = l;
        } else if (kind == "ecog_max") {
            c.predicate = EcogMaxPredicate{p.at("max").get<int>()};
        } else if (kind == "free_text") {
            c.predicate = FreeTextPredicate{p.value("text", c.description)};
        } else {
            return R::failure("malformed", fmt::format("unknown predicate kind '{}'", kind));
        }
    } catch (const json::exception& e) {
        return R::failure("malformed", e.what());
    }
    return c;
}

Result<TrialRecord> trial_from_json(const json& j) {
    using R = Result<TrialRecord>;
    TrialRecord t;
    try {
        t.nct_id = j.at("nct_id").get<std::string>();
        if (!valid_nct_id(t.nct_id))
            return R::failure("bad_nct_id",
                              fmt::format("nct_id '{}' is not NCT followed by 8 digits", t.nct_id));
        t.title = j.at("title").get<std::string>();
        auto status = parse_trial_status(j.at("overall_status").get<std::string>());
        if (!status) return {status.error()};
        t.overall_status = status.value();
        t.locations = j.at("locations").get<std::vector<std::string>>();
        t.conditions = j.at("conditions").get<std::vector<std::string>>();
        t.interventions = j.value("interventions", std::vector<std::string>{});
        if (j.contains("min_age_years")) t.min_age_years = j.at("min_age_years").get<double>();
        if (j.contains("max_age_years")) t.max_age_years = j.at("max_age_years").get<double>();
        auto sex = parse_trial_sex(j.value("sex", "all"));
        if (!sex) return {sex.error()};
        t.sex = sex.value();
        for (const auto& cj : j.value("criteria", json::array())) {
            auto c = criterion_from_json(cj);
            if (!c)
                return R::failure(c.error().code,
                                  fmt::format("{}: {}", t.nct_id, c.error().message));
            t.criteria.push_back(std::move(c).take());
        }
        t.url = j.at("url").get<std::string>();
        if (t.url.empty()) return R::failure("malformed", fmt::format("{}: empty url", t.nct_id));
    } catch (const json::exception& e) {
        return R::failure("malformed", e.what());
    }
    return t;
}

// --- file backend -----------------------------------------------------

Result<FileRegistry> FileRegistry::load(const std::filesystem::path& trials_file) {
    using R = Result<FileRegistry>;
    std::ifstream in(trials_file);
    if (!in) return R::failure("io", fmt::format("cannot open {}", trials_file.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        return R::failure("malformed", fmt::format("{}: {}", trials_file.string(), e.what()));
    }
    if (!doc.is_array())
        return R::failure("malformed",
                          fmt::format("{}: expected an array of trials", trials_file.string()));
    FileRegistry reg;
    for (const auto& item : doc) {
        auto t = trial_from_json(item);
        if (!t)
            return R::failure(t.error().code,
                              fmt::format("{}: {}", trials_file.string(), t.error().message));
        const std::string id = t.value().nct_id;
        if (reg.by_id_.count(id))
            return R::failure("malformed",
                              fmt::format("{}: duplicate nct_id {}", trials_file.string(), id));
        reg.by_id_[id] = reg.trials_.size();
        reg.trials_.push_back(std::move(t).take());
    }
    return reg;
}

Result<std::vector<TrialRecord>> FileRegistry::search_trials(const TrialQuery& query) {
    if (query.condition_terms.empty())
        return Result<std::vector<TrialRecord>>::failure("search_error",
                                                         "query needs at least one condition term");
    std::vector<TrialRecord> out;
    for (const auto& t : trials_)
        if (matches_query(t, query)) out.push_back(t);
    std::sort(out.begin(), out.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.nct_id < b.nct_id; });
    return out;
}

Result<TrialRecord> FileRegistry::get_trial(const std::string& nct_id) {
    if (!valid_nct_id(nct_id))
        return Result<TrialRecord>::failure(
            "bad_nct_id", fmt::format("nct_id '{}' is not NCT followed by 8 digits", nct_id));
    const auto it = by_id_.find(nct_id);
    if (it == by_id_.end())
        return Result<TrialRecord>::failure("unknown_trial",
                                            fmt::format("unknown trial {}", nct_id));
    return trials_[it->second];
}

}  // namespace ddose::registry
