// SPDX-License-Identifier: Apache-2.0
#include "ddose/json_io.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace ddose::jsonio {

namespace {

using domain::Specialty;

// Field accessors that fail with the offending key in the message.
Result<const json*> need(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        return Result<const json*>::failure("missing_field", fmt::format("missing field '{}'", key));
    return &j.at(key);
}

Result<std::string> need_string(const json& j, const char* key) {
    auto f = need(j, key);
    if (!f) return Result<std::string>::failure(f.error().code, f.error().message);
    if (!f.value()->is_string())
        return Result<std::string>::failure("bad_field",
                                            fmt::format("field '{}' must be a string", key));
    return f.value()->get<std::string>();
}

Result<Date> need_date(const json& j, const char* key) {
    auto s = need_string(j, key);
    if (!s) return Result<Date>::failure(s.error().code, s.error().message);
    auto d = Date::parse(s.value());
    if (!d)
        return Result<Date>::failure("bad_field",
                                     fmt::format("field '{}': {}", key, d.error().message));
    return d;
}

std::optional<Date> optional_date(const json& j, const char* key, std::string* err) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    auto d = Date::parse(j.at(key).get<std::string>());
    if (!d) {
        *err = fmt::format("field '{}': {}", key, d.error().message);
        return std::nullopt;
    }
    return d.value();
}

json date_or_null(const std::optional<Date>& d) {
    return d ? json(d->to_string()) : json(nullptr);
}

}  // namespace

// --- serialize ------------------------------------------------------------

json to_json(const domain::Appointment& a) {
    return json{{"appointment_id", a.appointment_id},
                {"physician_id", a.physician_id},
                {"patient_id", a.patient_id},
                {"start_time", a.start_time.to_string()},
                {"visit_kind", std::string(domain::to_string(a.visit_kind))},
                {"raw_type_label", a.raw_type_label}};
}

json to_json(const domain::DiagnosisDetail& d) {
    json staging = json::object();
    if (d.staging.t) staging["t"] = std::string(domain::to_string(*d.staging.t));
    if (d.staging.n) staging["n"] = std::string(domain::to_string(*d.staging.n));
    if (d.staging.m) staging["m"] = std::string(domain::to_string(*d.staging.m));
    json out{{"site", d.site},
             {"onset_date", d.onset_date.to_string()},
             {"staging", staging},
             {"histology", d.histology}};
    if (d.prostate_detail) {
        out["prostate_detail"] = json{{"gleason_primary", d.prostate_detail->gleason_primary},
                                      {"gleason_secondary", d.prostate_detail->gleason_secondary},
                                      {"cores_positive", d.prostate_detail->cores_positive},
                                      {"cores_total", d.prostate_detail->cores_total}};
    }
    return out;
}

json to_json(const domain::TreatmentDetail& t) {
    json out{{"site", t.site},
             {"modality", t.modality},
             {"start_date", t.start_date.to_string()},
             {"current", t.current}};
    if (t.dose_gy_prescribed) out["dose_gy_prescribed"] = *t.dose_gy_prescribed;
    if (t.dose_gy_delivered) out["dose_gy_delivered"] = *t.dose_gy_delivered;
    if (t.fractions_prescribed) out["fractions_prescribed"] = *t.fractions_prescribed;
    if (t.fractions_delivered) out["fractions_delivered"] = *t.fractions_delivered;
    if (t.most_recent_date) out["most_recent_date"] = t.most_recent_date->to_string();
    if (t.next_date) out["next_date"] = t.next_date->to_string();
    return out;
}

json to_json(const domain::DatedDocument& d) {
    return json{{"date", d.date.to_string()}, {"title", d.title}, {"text", d.text}};
}

json to_json(const domain::MedicationEntry& m) {
    return json{{"name", m.name},
                {"start_date", m.start_date.to_string()},
                {"end_date", date_or_null(m.end_date)}};
}

json to_json(const domain::LabResult& l) {
    return json{{"analyte", l.analyte},
                {"value", l.value},
                {"unit", l.unit},
                {"date", l.date.to_string()}};
}

json to_json(const domain::EligibilityFacts& e) {
    json prior = json::array();
    for (const auto& r : e.prior_radiation)
        prior.push_back(json{{"dose_gy", r.dose_gy}, {"year", r.year}});
    json out{{"comorbidities", e.comorbidities},
             {"biomarkers", e.biomarkers},
             {"prior_radiation", prior},
             {"prior_systemic_therapies", e.prior_systemic_therapies}};
    if (e.ecog) out["ecog"] = *e.ecog;
    return out;
}

json to_json(const domain::PatientChart& c) {
    json diagnoses = json::array();
    for (const auto& d : c.diagnoses) diagnoses.push_back(to_json(d));
    json treatments = json::array();
    for (const auto& t : c.treatments) treatments.push_back(to_json(t));
    json appointments = json::array();
    for (const auto& a : c.appointments) appointments.push_back(to_json(a));
    auto docs = [](const std::vector<domain::DatedDocument>& v) {
        json arr = json::array();
        for (const auto& d : v) arr.push_back(to_json(d));
        return arr;
    };
    json notes = json::object();
    for (const auto& [sp, list] : c.notes) notes[std::string(domain::to_string(sp))] = docs(list);
    json meds = json::array();
    for (const auto& m : c.medications) meds.push_back(to_json(m));
    json labs = json::array();
    for (const auto& l : c.labs) labs.push_back(to_json(l));
    return json{{"patient_id", c.patient_id},
                {"name", c.name},
                {"date_of_birth", c.date_of_birth.to_string()},
                {"sex", std::string(domain::to_string(c.sex))},
                {"diagnoses", diagnoses},
                {"treatments", treatments},
                {"appointments", appointments},
                {"radiology_reports", docs(c.radiology_reports)},
                {"pathology_reports", docs(c.pathology_reports)},
                {"notes", notes},
                {"medications", meds},
                {"labs", labs},
                {"eligibility_facts", to_json(c.eligibility_facts)}};
}

// --- parse ------------------------------------------------------------

#define DDOSE_TRY(var, expr)                                                       \
    auto var##_r = (expr);                                                         \
    if (!var##_r) return {Error{var##_r.error().code, var##_r.error().message}};   \
    auto var = std::move(var##_r).take();

Result<domain::Appointment> appointment_from_json(const json& j) {
    DDOSE_TRY(appointment_id, need_string(j, "appointment_id"));
    DDOSE_TRY(physician_id, need_string(j, "physician_id"));
    DDOSE_TRY(patient_id, need_string(j, "patient_id"));
    DDOSE_TRY(start_raw, need_string(j, "start_time"));
    auto start = LocalTimestamp::parse(start_raw);
    if (!start) return {start.error()};
    DDOSE_TRY(label, need_string(j, "raw_type_label"));
    if (label.empty())
        return Result<domain::Appointment>::failure("bad_field", "raw_type_label must be non-empty");
    domain::Appointment a;
    a.appointment_id = appointment_id;
    a.physician_id = physician_id;
    a.patient_id = patient_id;
    a.start_time = start.value();
    a.raw_type_label = label;
    // visit_kind may be stored explicitly; otherwise derived from the label.
    if (j.contains("visit_kind")) {
        auto vk = domain::parse_visit_kind(j.at("visit_kind").get<std::string>());
        if (!vk) return {vk.error()};
        a.visit_kind = vk.value();
    } else {
        a.visit_kind = domain::classify_visit_kind(label);
    }
    return a;
}

Result<domain::DiagnosisDetail> diagnosis_from_json(const json& j) {
    DDOSE_TRY(site, need_string(j, "site"));
    DDOSE_TRY(onset, need_date(j, "onset_date"));
    DDOSE_TRY(histology, need_string(j, "histology"));
    domain::DiagnosisDetail d;
    d.site = site;
    d.onset_date = onset;
    d.histology = histology;
    if (j.contains("staging")) {
        const auto& s = j.at("staging");
        if (s.contains("t")) {
            auto t = domain::parse_t_stage(s.at("t").get<std::string>());
            if (!t) return {t.error()};
            d.staging.t = t.value();
        }
        if (s.contains("n")) {
            auto n = domain::parse_n_stage(s.at("n").get<std::string>());
            if (!n) return {n.error()};
            d.staging.n = n.value();
        }
        if (s.contains("m")) {
            auto m = domain::parse_m_stage(s.at("m").get<std::string>());
            if (!m) return {m.error()};
            d.staging.m = m.value();
        }
    }
    if (j.contains("prostate_detail")) {
        const auto& p = j.at("prostate_detail");
        domain::ProstateDetail pd;
        pd.gleason_primary = p.value("gleason_primary", 0);
        pd.gleason_secondary = p.value("gleason_secondary", 0);
        pd.cores_positive = p.value("cores_positive", -1);
        pd.cores_total = p.value("cores_total", 0);
        try {
            pd.check();
        } catch (const std::invalid_argument& e) {
            return Result<domain::DiagnosisDetail>::failure("bad_field", e.what());
        }
        d.prostate_detail = pd;
    }
    return d;
}

Result<domain::TreatmentDetail> treatment_from_json(const json& j) {
    DDOSE_TRY(site, need_string(j, "site"));
    DDOSE_TRY(modality, need_string(j, "modality"));
    DDOSE_TRY(start, need_date(j, "start_date"));
    domain::TreatmentDetail t;
    t.site = site;
    t.modality = modality;
    t.start_date = start;
    t.current = j.value("current", false);
    if (j.contains("dose_gy_prescribed")) t.dose_gy_prescribed = j.at("dose_gy_prescribed").get<double>();
    if (j.contains("dose_gy_delivered")) t.dose_gy_delivered = j.at("dose_gy_delivered").get<double>();
    if (j.contains("fractions_prescribed")) t.fractions_prescribed = j.at("fractions_prescribed").get<int>();
    if (j.contains("fractions_delivered")) t.fractions_delivered = j.at("fractions_delivered").get<int>();
    std::string err;
    t.most_recent_date = optional_date(j, "most_recent_date", &err);
    if (!err.empty()) return Result<domain::TreatmentDetail>::failure("bad_field", err);
    t.next_date = optional_date(j, "next_date", &err);
    if (!err.empty()) return Result<domain::TreatmentDetail>::failure("bad_field", err);
    return t;
}

Result<domain::DatedDocument> dated_document_from_json(const json& j) {
    DDOSE_TRY(date, need_date(j, "date"));
    DDOSE_TRY(title, need_string(j, "title"));
    domain::DatedDocument d;
    d.date = date;
    d.title = title;
    d.text = j.value("text", std::string{});
    return d;
}

Result<domain::MedicationEntry> medication_from_json(const json& j) {
    DDOSE_TRY(name, need_string(j, "name"));
    DDOSE_TRY(start, need_date(j, "start_date"));
    domain::MedicationEntry m;
    m.name = name;
    m.start_date = start;
    std::string err;
    m.end_date = optional_date(j, "end_date", &err);
    if (!err.empty()) return Result<domain::MedicationEntry>::failure("bad_field", err);
    return m;
}

Result<domain::LabResult> lab_from_json(const json& j) {
    DDOSE_TRY(analyte, need_string(j, "analyte"));
    DDOSE_TRY(unit, need_string(j, "unit"));
    DDOSE_TRY(date, need_date(j, "date"));
    auto v = need(j, "value");
    if (!v) return {v.error()};
    if (!v.value()->is_number())
        return Result<domain::LabResult>::failure("bad_field", "field 'value' must be a number");
    domain::LabResult l;
    l.analyte = analyte;
    l.unit = unit;
    l.date = date;
    l.value = v.value()->get<double>();
    if (l.analyte == "PSA" && l.unit != "ng/mL")
        return Result<domain::LabResult>::failure("bad_field", "PSA labs must carry unit ng/mL");
    return l;
}

Result<domain::EligibilityFacts> eligibility_from_json(const json& j) {
    domain::EligibilityFacts e;
    if (j.contains("ecog")) {
        const int ecog = j.at("ecog").get<int>();
        if (ecog < 0 || ecog > 5)
            return Result<domain::EligibilityFacts>::failure("bad_field", "ecog must be 0..5");
        e.ecog = ecog;
    }
    if (j.contains("comorbidities")) e.comorbidities = j.at("comorbidities").get<std::vector<std::string>>();
    if (j.contains("biomarkers"))
        e.biomarkers = j.at("biomarkers").get<std::map<std::string, std::string>>();
    if (j.contains("prior_radiation")) {
        for (const auto& r : j.at("prior_radiation")) {
            domain::PriorRadiationCourse c;
            c.dose_gy = r.value("dose_gy", 0.0);
            c.year = r.value("year", 0);
            if (c.dose_gy <= 0)
                return Result<domain::EligibilityFacts>::failure("bad_field",
                                                                 "prior_radiation dose_gy must be > 0");
            e.prior_radiation.push_back(c);
        }
    }
    if (j.contains("prior_systemic_therapies"))
        e.prior_systemic_therapies = j.at("prior_systemic_therapies").get<std::vector<std::string>>();
    return e;
}

Result<domain::PatientChart> chart_from_json(const json& j) {
    DDOSE_TRY(patient_id, need_string(j, "patient_id"));
    if (patient_id.empty())
        return Result<domain::PatientChart>::failure("bad_field", "patient_id must be non-empty");
    DDOSE_TRY(dob, need_date(j, "date_of_birth"));
    domain::PatientChart c;
    c.patient_id = patient_id;
    c.name = j.value("name", std::string{});
    c.date_of_birth = dob;
    if (j.contains("sex")) {
        auto s = domain::parse_sex(j.at("sex").get<std::string>());
        if (!s) return {s.error()};
        c.sex = s.value();
    }
    auto parse_array = [&](const char* key, auto parser, auto& out) -> Result<void> {
        if (!j.contains(key)) return Result<void>::success();
        for (const auto& item : j.at(key)) {
            auto r = parser(item);
            if (!r)
                return Result<void>::failure(r.error().code,
                                             fmt::format("{}: {}", key, r.error().message));
            out.push_back(std::move(r).take());
        }
        return Result<void>::success();
    };
    if (auto r = parse_array("diagnoses", diagnosis_from_json, c.diagnoses); !r) return {r.error()};
    if (auto r = parse_array("treatments", treatment_from_json, c.treatments); !r) return {r.error()};
    if (auto r = parse_array("appointments", appointment_from_json, c.appointments); !r)
        return {r.error()};
    if (auto r = parse_array("radiology_reports", dated_document_from_json, c.radiology_reports); !r)
        return {r.error()};
    if (auto r = parse_array("pathology_reports", dated_document_from_json, c.pathology_reports); !r)
        return {r.error()};
    if (auto r = parse_array("medications", medication_from_json, c.medications); !r)
        return {r.error()};
    if (auto r = parse_array("labs", lab_from_json, c.labs); !r) return {r.error()};
    if (j.contains("notes")) {
        for (const auto& [key, arr] : j.at("notes").items()) {
            auto sp = domain::parse_specialty(key);
            if (!sp) return {sp.error()};
            std::vector<domain::DatedDocument> docs;
            for (const auto& item : arr) {
                auto d = dated_document_from_json(item);
                if (!d)
                    return Result<domain::PatientChart>::failure(
                        d.error().code, fmt::format("notes.{}: {}", key, d.error().message));
                docs.push_back(std::move(d).take());
            }
            c.notes[sp.value()] = std::move(docs);
        }
    }
    if (j.contains("eligibility_facts")) {
        auto e = eligibility_from_json(j.at("eligibility_facts"));
        if (!e) return {e.error()};
        c.eligibility_facts = std::move(e).take();
    }
    // Dated lists are stored date-ascending; establish the invariant here.
    auto by_date = [](const auto& a, const auto& b) { return a.date < b.date; };
    std::stable_sort(c.radiology_reports.begin(), c.radiology_reports.end(), by_date);
    std::stable_sort(c.pathology_reports.begin(), c.pathology_reports.end(), by_date);
    for (auto& [sp, docs] : c.notes) std::stable_sort(docs.begin(), docs.end(), by_date);
    std::stable_sort(c.labs.begin(), c.labs.end(), by_date);
    return c;
}

#undef DDOSE_TRY

}  // namespace ddose::jsonio
