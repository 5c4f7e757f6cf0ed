// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ddose/domain.hpp"

namespace ddose::ehr {

struct PhysicianProfile {
    std::string physician_id;
    std::string display_name;
    std::string email;
    std::string campus;
    bool operator==(const PhysicianProfile&) const = default;
};

/// The section-level retrieval vocabulary. Closed: one value per retrieval
/// the summarization step performs.
enum class EhrSection {
    patient_details,
    treatment_details,
    diagnosis_details,
    appointments_today,
    radiology_reports,
    pathology_reports,
    notes_radiology,
    notes_pathology,
    notes_surgery,
    notes_medonc,
    notes_ent,
    notes_urology,
    notes_radonc,
    medications,
    labs,
};

inline constexpr int kSectionCount = 15;

std::string_view to_string(EhrSection);
Result<EhrSection> parse_section(std::string_view);

/// Section content in its canonical JSON form. `empty` means the section is
/// absent or carries no information; it is distinct from an unknown patient,
/// which is an error.
struct SectionPayload {
    nlohmann::json content;
    bool empty = false;
};

/// Immutable after load; concurrent readers need no synchronization.
class CohortStore {
public:
    /// Loads `root/physicians/*.json`, `root/patients/*.json`,
    /// `root/schedules/*.json` and validates referential integrity.
    static Result<CohortStore> load(const std::filesystem::path& root);

    /// Writes the documented layout back out. load(save(s)) == s.
    Result<void> save(const std::filesystem::path& root) const;

    Result<SectionPayload> get_section(const std::string& patient_id, EhrSection section,
                                       const Date& run_date) const;
    Result<std::vector<domain::Appointment>> get_schedule(const std::string& physician_id,
                                                          const Date& date) const;
    /// All physician ids, sorted. Physicians with no clinic that day are
    /// included; skipping empty schedules is the orchestrator's call.
    std::vector<std::string> list_physicians(const Date& run_date) const;

    const PhysicianProfile* find_physician(const std::string& physician_id) const;
    const domain::PatientChart* find_patient(const std::string& patient_id) const;

    const std::map<std::string, domain::PatientChart>& patients() const { return patients_; }
    const std::map<std::string, PhysicianProfile>& physicians() const { return physicians_; }

    bool operator==(const CohortStore&) const = default;

private:
    std::map<std::string, domain::PatientChart> patients_;
    std::map<std::string, PhysicianProfile> physicians_;
    // Keyed by (physician_id, date); values sorted by start_time.
    std::map<std::pair<std::string, Date>, std::vector<domain::Appointment>> schedules_;
};

Result<CohortStore> load_cohort(const std::filesystem::path& root);

/// Loads a keyword→kind table from a JSON asset (array of
/// {"keyword": ..., "kind": ...} rows, priority order preserved).
Result<domain::VisitKindTable> load_visit_kind_table(const std::filesystem::path& file);

}  // namespace ddose::ehr
