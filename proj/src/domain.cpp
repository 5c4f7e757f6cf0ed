// SPDX-License-Identifier: Apache-2.0
#include "ddose/domain.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "ddose/text.hpp"

namespace ddose::domain {

void ProstateDetail::check() const {
    if (gleason_primary < 1 || gleason_primary > 5 || gleason_secondary < 1 ||
        gleason_secondary > 5)
        throw std::invalid_argument("gleason patterns must be 1..5");
    if (cores_total <= 0 || cores_positive < 0 || cores_positive > cores_total)
        throw std::invalid_argument("cores_positive must be within 0..cores_total");
}

std::optional<int> PatientChart::age_years_on(const Date& on) const {
    if (!date_of_birth.valid() || on < date_of_birth) return std::nullopt;
    int age = on.year - date_of_birth.year;
    if (on.month < date_of_birth.month ||
        (on.month == date_of_birth.month && on.day < date_of_birth.day))
        --age;
    return age;
}

// --- enum <-> string ---------------------------------------------------

namespace {

template <typename E>
Result<E> parse_enum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> map,
                     std::string_view what) {
    const std::string lowered = text::to_lower(s);
    for (const auto& [name, v] : map)
        if (lowered == name) return v;
    return Result<E>::failure("bad_enum", fmt::format("unknown {}: '{}'", what, s));
}

}  // namespace

std::string_view to_string(Sex s) {
    switch (s) {
        case Sex::female: return "female";
        case Sex::male: return "male";
        case Sex::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(VisitKind k) {
    switch (k) {
        case VisitKind::consult: return "consult";
        case VisitKind::new_visit: return "new";
        case VisitKind::follow_up: return "follow_up";
        case VisitKind::management: return "management";
        case VisitKind::simulation: return "simulation";
        case VisitKind::treatment: return "treatment";
        case VisitKind::other: return "other";
    }
    return "other";
}

std::string_view to_string(Specialty sp) {
    switch (sp) {
        case Specialty::radiology: return "radiology";
        case Specialty::pathology: return "pathology";
        case Specialty::surgery: return "surgery";
        case Specialty::medonc: return "medonc";
        case Specialty::ent: return "ENT";
        case Specialty::urology: return "urology";
        case Specialty::radonc: return "radonc";
    }
    return "radonc";
}

std::string_view to_string(TStage t) {
    switch (t) {
        case TStage::t1: return "T1";
        case TStage::t1a: return "T1a";
        case TStage::t1b: return "T1b";
        case TStage::t1c: return "T1c";
        case TStage::t2: return "T2";
        case TStage::t2a: return "T2a";
        case TStage::t2b: return "T2b";
        case TStage::t2c: return "T2c";
        case TStage::t3: return "T3";
        case TStage::t3a: return "T3a";
        case TStage::t3b: return "T3b";
        case TStage::t3c: return "T3c";
        case TStage::t4: return "T4";
    }
    return "T1";
}

std::string_view to_string(NStage n) { return n == NStage::n0 ? "N0" : "N1"; }
std::string_view to_string(MStage m) { return m == MStage::m0 ? "M0" : "M1"; }

Result<Sex> parse_sex(std::string_view s) {
    return parse_enum<Sex>(
        s, {{"female", Sex::female}, {"male", Sex::male}, {"unknown", Sex::unknown}}, "sex");
}

Result<VisitKind> parse_visit_kind(std::string_view s) {
    return parse_enum<VisitKind>(s,
                                 {{"consult", VisitKind::consult},
                                  {"new", VisitKind::new_visit},
                                  {"follow_up", VisitKind::follow_up},
                                  {"management", VisitKind::management},
                                  {"simulation", VisitKind::simulation},
                                  {"treatment", VisitKind::treatment},
                                  {"other", VisitKind::other}},
                                 "visit kind");
}

Result<Specialty> parse_specialty(std::string_view s) {
    return parse_enum<Specialty>(s,
                                 {{"radiology", Specialty::radiology},
                                  {"pathology", Specialty::pathology},
                                  {"surgery", Specialty::surgery},
                                  {"medonc", Specialty::medonc},
                                  {"ent", Specialty::ent},
                                  {"urology", Specialty::urology},
                                  {"radonc", Specialty::radonc}},
                                 "specialty");
}

Result<TStage> parse_t_stage(std::string_view s) {
    return parse_enum<TStage>(s,
                              {{"t1", TStage::t1},
                               {"t1a", TStage::t1a},
                               {"t1b", TStage::t1b},
                               {"t1c", TStage::t1c},
                               {"t2", TStage::t2},
                               {"t2a", TStage::t2a},
                               {"t2b", TStage::t2b},
                               {"t2c", TStage::t2c},
                               {"t3", TStage::t3},
                               {"t3a", TStage::t3a},
                               {"t3b", TStage::t3b},
                               {"t3c", TStage::t3c},
                               {"t4", TStage::t4}},
                              "T stage");
}

Result<NStage> parse_n_stage(std::string_view s) {
    return parse_enum<NStage>(s, {{"n0", NStage::n0}, {"n1", NStage::n1}}, "N stage");
}

Result<MStage> parse_m_stage(std::string_view s) {
    return parse_enum<MStage>(s, {{"m0", MStage::m0}, {"m1", MStage::m1}}, "M stage");
}

// --- visit-kind mapping -------------------------------------------------

const VisitKindTable& default_visit_kind_table() {
    // Priority order matters: "New Patient Consult" must gate as consult.
    static const VisitKindTable table = {
        {"consult", VisitKind::consult}, {"new", VisitKind::new_visit},
        {"sim", VisitKind::simulation},  {"management", VisitKind::management},
        {"otv", VisitKind::management},  {"follow", VisitKind::follow_up},
        {"treat", VisitKind::treatment},
    };
    return table;
}

VisitKind classify_visit_kind(std::string_view raw_type_label) {
    return classify_visit_kind(raw_type_label, default_visit_kind_table());
}

VisitKind classify_visit_kind(std::string_view raw_type_label, const VisitKindTable& table) {
    if (raw_type_label.empty())
        throw std::invalid_argument("classify_visit_kind: label must be non-empty");
    for (const auto& rule : table) {
        if (text::contains_ci(raw_type_label, rule.keyword)) return rule.kind;
    }
    return VisitKind::other;
}

bool is_trial_eligible_visit(VisitKind kind) {
    return kind == VisitKind::new_visit || kind == VisitKind::consult;
}

}  // namespace ddose::domain
