// SPDX-License-Identifier: Apache-2.0
#include "ddose/ehr_store.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "ddose/json_io.hpp"

namespace ddose::ehr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Result<json> load_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in)
        return Result<json>::failure("io", fmt::format("cannot open {}", file.string()));
    // parse() exceptions already carry line and column.
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        return Result<json>::failure("malformed",
                                     fmt::format("{}: {}", file.string(), e.what()));
    }
}

Result<void> write_json_file(const fs::path& file, const json& j) {
    std::ofstream out(file);
    if (!out)
        return Result<void>::failure("io", fmt::format("cannot write {}", file.string()));
    out << j.dump(2) << '\n';
    if (!out)
        return Result<void>::failure("io", fmt::format("write failed for {}", file.string()));
    return Result<void>::success();
}

/// Directory iteration order is unspecified; sort for a deterministic load.
Result<std::vector<fs::path>> sorted_json_files(const fs::path& dir) {
    if (!fs::is_directory(dir))
        return Result<std::vector<fs::path>>::failure(
            "missing_dir", fmt::format("missing directory {}", dir.string()));
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

json docs_to_json(const std::vector<domain::DatedDocument>& docs) {
    json arr = json::array();
    for (const auto& d : docs) arr.push_back(jsonio::to_json(d));
    return arr;
}

}  // namespace

std::string_view to_string(EhrSection s) {
    switch (s) {
        case EhrSection::patient_details: return "patient_details";
        case EhrSection::treatment_details: return "treatment_details";
        case EhrSection::diagnosis_details: return "diagnosis_details";
        case EhrSection::appointments_today: return "appointments_today";
        case EhrSection::radiology_reports: return "radiology_reports";
        case EhrSection::pathology_reports: return "pathology_reports";
        case EhrSection::notes_radiology: return "notes_radiology";
        case EhrSection::notes_pathology: return "notes_pathology";
        case EhrSection::notes_surgery: return "notes_surgery";
        case EhrSection::notes_medonc: return "notes_medonc";
        case EhrSection::notes_ent: return "notes_ent";
        case EhrSection::notes_urology: return "notes_urology";
        case EhrSection::notes_radonc: return "notes_radonc";
        case EhrSection::medications: return "medications";
        case EhrSection::labs: return "labs";
    }
    return "patient_details";
}

Result<EhrSection> parse_section(std::string_view s) {
    for (int i = 0; i < kSectionCount; ++i) {
        const auto section = static_cast<EhrSection>(i);
        if (s == to_string(section)) return section;
    }
    return Result<EhrSection>::failure("bad_enum", fmt::format("unknown EHR section: '{}'", s));
}

Result<CohortStore> CohortStore::load(const fs::path& root) {
    using R = Result<CohortStore>;
    if (!fs::is_directory(root))
        return R::failure("missing_dir", fmt::format("missing cohort directory {}", root.string()));

    CohortStore store;

    auto physician_files = sorted_json_files(root / "physicians");
    if (!physician_files) return {physician_files.error()};
    for (const auto& file : physician_files.value()) {
        auto doc = load_json_file(file);
        if (!doc) return {doc.error()};
        PhysicianProfile p;
        try {
            p.physician_id = doc.value().at("physician_id").get<std::string>();
            p.display_name = doc.value().at("display_name").get<std::string>();
            p.email = doc.value().at("email").get<std::string>();
            p.campus = doc.value().value("campus", std::string{});
        } catch (const json::exception& e) {
            return R::failure("malformed", fmt::format("{}: {}", file.string(), e.what()));
        }
        if (p.physician_id != file.stem().string())
            return R::failure("malformed",
                              fmt::format("{}: physician_id '{}' does not match filename",
                                          file.string(), p.physician_id));
        if (!store.physicians_.emplace(p.physician_id, p).second)
            return R::failure("malformed",
                              fmt::format("duplicate physician id '{}'", p.physician_id));
    }
    if (store.physicians_.empty())
        return R::failure("empty_cohort",
                          fmt::format("no physicians defined under {}", root.string()));

    auto patient_files = sorted_json_files(root / "patients");
    if (!patient_files) return {patient_files.error()};
    for (const auto& file : patient_files.value()) {
        auto doc = load_json_file(file);
        if (!doc) return {doc.error()};
        if (doc.value().contains("appointments") && !doc.value().at("appointments").empty())
            return R::failure(
                "malformed",
                fmt::format("{}: appointments belong in schedules/, not patient documents",
                            file.string()));
        auto chart = jsonio::chart_from_json(doc.value());
        if (!chart)
            return R::failure("malformed",
                              fmt::format("{}: {}", file.string(), chart.error().message));
        if (chart.value().patient_id != file.stem().string())
            return R::failure("malformed",
                              fmt::format("{}: patient_id '{}' does not match filename",
                                          file.string(), chart.value().patient_id));
        const std::string id = chart.value().patient_id;
        if (!store.patients_.emplace(id, std::move(chart).take()).second)
            return R::failure("malformed", fmt::format("duplicate patient id '{}'", id));
    }

    auto schedule_files = sorted_json_files(root / "schedules");
    if (!schedule_files) return {schedule_files.error()};
    for (const auto& file : schedule_files.value()) {
        auto doc = load_json_file(file);
        if (!doc) return {doc.error()};
        auto file_date = Date::parse(file.stem().string());
        if (!file_date)
            return R::failure("malformed",
                              fmt::format("{}: schedule filename must be an ISO date",
                                          file.string()));
        if (!doc.value().contains("appointments") || !doc.value().at("appointments").is_array())
            return R::failure("malformed",
                              fmt::format("{}: missing appointments array", file.string()));
        for (const auto& item : doc.value().at("appointments")) {
            auto appt = jsonio::appointment_from_json(item);
            if (!appt)
                return R::failure("malformed",
                                  fmt::format("{}: {}", file.string(), appt.error().message));
            const auto& a = appt.value();
            if (a.start_time.date != file_date.value())
                return R::failure("malformed",
                                  fmt::format("{}: appointment {} dated {} is in the wrong file",
                                              file.string(), a.appointment_id,
                                              a.start_time.date.to_string()));
            if (!store.physicians_.count(a.physician_id))
                return R::failure("dangling_reference",
                                  fmt::format("{}: appointment {} references unknown physician {}",
                                              file.string(), a.appointment_id, a.physician_id));
            auto patient = store.patients_.find(a.patient_id);
            if (patient == store.patients_.end())
                return R::failure("dangling_reference",
                                  fmt::format("{}: appointment {} references unknown patient {}",
                                              file.string(), a.appointment_id, a.patient_id));
            store.schedules_[{a.physician_id, a.start_time.date}].push_back(a);
            patient->second.appointments.push_back(a);
        }
    }

    auto by_start = [](const domain::Appointment& a, const domain::Appointment& b) {
        if (a.start_time != b.start_time) return a.start_time < b.start_time;
        return a.appointment_id < b.appointment_id;
    };
    for (auto& [key, appts] : store.schedules_) std::sort(appts.begin(), appts.end(), by_start);
    for (auto& [id, chart] : store.patients_)
        std::sort(chart.appointments.begin(), chart.appointments.end(), by_start);

    return store;
}

Result<void> CohortStore::save(const fs::path& root) const {
    std::error_code ec;
    for (const char* sub : {"physicians", "patients", "schedules"}) {
        fs::create_directories(root / sub, ec);
        if (ec)
            return Result<void>::failure("io", fmt::format("cannot create {}: {}",
                                                           (root / sub).string(), ec.message()));
    }
    for (const auto& [id, p] : physicians_) {
        json j{{"physician_id", p.physician_id},
               {"display_name", p.display_name},
               {"email", p.email},
               {"campus", p.campus}};
        if (auto r = write_json_file(root / "physicians" / (id + ".json"), j); !r) return r;
    }
    for (const auto& [id, chart] : patients_) {
        json j = jsonio::to_json(chart);
        // Appointments live in schedules/.
        j.erase("appointments");
        if (auto r = write_json_file(root / "patients" / (id + ".json"), j); !r) return r;
    }
    // Regroup by date: one schedule document per clinic day.
    std::map<Date, std::vector<domain::Appointment>> by_date;
    for (const auto& [key, appts] : schedules_)
        by_date[key.second].insert(by_date[key.second].end(), appts.begin(), appts.end());
    for (auto& [date, appts] : by_date) {
        std::sort(appts.begin(), appts.end(),
                  [](const domain::Appointment& a, const domain::Appointment& b) {
                      if (a.start_time != b.start_time) return a.start_time < b.start_time;
                      return a.appointment_id < b.appointment_id;
                  });
        json arr = json::array();
        for (const auto& a : appts) arr.push_back(jsonio::to_json(a));
        json j{{"date", date.to_string()}, {"appointments", arr}};
        if (auto r = write_json_file(root / "schedules" / (date.to_string() + ".json"), j); !r)
            return r;
    }
    return Result<void>::success();
}

Result<SectionPayload> CohortStore::get_section(const std::string& patient_id, EhrSection section,
                                                const Date& run_date) const {
    using R = Result<SectionPayload>;
    const auto it = patients_.find(patient_id);
    if (it == patients_.end())
        return R::failure("unknown_patient", fmt::format("unknown patient '{}'", patient_id));
    const domain::PatientChart& c = it->second;

    auto notes_payload = [&](domain::Specialty sp) {
        SectionPayload p;
        const auto n = c.notes.find(sp);
        p.content = n == c.notes.end() ? json::array() : docs_to_json(n->second);
        p.empty = p.content.empty();
        return p;
    };

    SectionPayload p;
    switch (section) {
        case EhrSection::patient_details: {
            p.content = json{{"patient_id", c.patient_id},
                             {"name", c.name},
                             {"date_of_birth", c.date_of_birth.to_string()},
                             {"sex", std::string(domain::to_string(c.sex))}};
            if (auto age = c.age_years_on(run_date)) p.content["age_years"] = *age;
            p.empty = c.name.empty() && c.sex == domain::Sex::unknown;
            return p;
        }
        case EhrSection::treatment_details: {
            p.content = json::array();
            for (const auto& t : c.treatments) p.content.push_back(jsonio::to_json(t));
            p.empty = p.content.empty();
            return p;
        }
        case EhrSection::diagnosis_details: {
            json diagnoses = json::array();
            for (const auto& d : c.diagnoses) diagnoses.push_back(jsonio::to_json(d));
            p.content = json{{"diagnoses", diagnoses},
                             {"eligibility_facts", jsonio::to_json(c.eligibility_facts)}};
            p.empty = diagnoses.empty();
            return p;
        }
        case EhrSection::appointments_today: {
            p.content = json::array();
            for (const auto& a : c.appointments)
                if (a.start_time.date == run_date) p.content.push_back(jsonio::to_json(a));
            p.empty = p.content.empty();
            return p;
        }
        case EhrSection::radiology_reports:
            p.content = docs_to_json(c.radiology_reports);
            p.empty = p.content.empty();
            return p;
        case EhrSection::pathology_reports:
            p.content = docs_to_json(c.pathology_reports);
            p.empty = p.content.empty();
            return p;
        case EhrSection::notes_radiology: return notes_payload(domain::Specialty::radiology);
        case EhrSection::notes_pathology: return notes_payload(domain::Specialty::pathology);
        case EhrSection::notes_surgery: return notes_payload(domain::Specialty::surgery);
        case EhrSection::notes_medonc: return notes_payload(domain::Specialty::medonc);
        case EhrSection::notes_ent: return notes_payload(domain::Specialty::ent);
        case EhrSection::notes_urology: return notes_payload(domain::Specialty::urology);
        case EhrSection::notes_radonc: return notes_payload(domain::Specialty::radonc);
        case EhrSection::medications: {
            p.content = json::array();
            for (const auto& m : c.medications) p.content.push_back(jsonio::to_json(m));
            p.empty = p.content.empty();
            return p;
        }
        case EhrSection::labs: {
            p.content = json::array();
            for (const auto& l : c.labs) p.content.push_back(jsonio::to_json(l));
            p.empty = p.content.empty();
            return p;
        }
    }
    return R::failure("bad_enum", "unhandled section");
}

Result<std::vector<domain::Appointment>> CohortStore::get_schedule(
    const std::string& physician_id, const Date& date) const {
    if (!physicians_.count(physician_id))
        return Result<std::vector<domain::Appointment>>::failure(
            "unknown_physician", fmt::format("unknown physician '{}'", physician_id));
    const auto it = schedules_.find({physician_id, date});
    if (it == schedules_.end()) return std::vector<domain::Appointment>{};
    return it->second;
}

std::vector<std::string> CohortStore::list_physicians(const Date&) const {
    // Every physician participates every run day; empty clinics are the
    // orchestrator's skip-and-log case.
    std::vector<std::string> ids;
    ids.reserve(physicians_.size());
    for (const auto& [id, p] : physicians_) ids.push_back(id);
    return ids;
}

const PhysicianProfile* CohortStore::find_physician(const std::string& physician_id) const {
    const auto it = physicians_.find(physician_id);
    return it == physicians_.end() ? nullptr : &it->second;
}

const domain::PatientChart* CohortStore::find_patient(const std::string& patient_id) const {
    const auto it = patients_.find(patient_id);
    return it == patients_.end() ? nullptr : &it->second;
}

Result<CohortStore> load_cohort(const fs::path& root) { return CohortStore::load(root); }

Result<domain::VisitKindTable> load_visit_kind_table(const fs::path& file) {
    using R = Result<domain::VisitKindTable>;
    auto doc = load_json_file(file);
    if (!doc) return {doc.error()};
    if (!doc.value().is_array())
        return R::failure("malformed", fmt::format("{}: expected an array", file.string()));
    domain::VisitKindTable table;
    for (const auto& row : doc.value()) {
        if (!row.contains("keyword") || !row.contains("kind"))
            return R::failure("malformed",
                              fmt::format("{}: rows need keyword and kind", file.string()));
        auto kind = domain::parse_visit_kind(row.at("kind").get<std::string>());
        if (!kind) return {kind.error()};
        table.push_back({row.at("keyword").get<std::string>(), kind.value()});
    }
    if (table.empty())
        return R::failure("malformed", fmt::format("{}: empty mapping table", file.string()));
    return table;
}

}  // namespace ddose::ehr
