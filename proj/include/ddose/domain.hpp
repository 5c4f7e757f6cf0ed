// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddose/dates.hpp"

namespace ddose::domain {

enum class Sex { female, male, unknown };

enum class VisitKind { consult, new_visit, follow_up, management, simulation, treatment, other };

enum class Specialty { radiology, pathology, surgery, medonc, ent, urology, radonc };

// Closed staging vocabulary: T1-T4 with a/b/c refinements, N0/N1, M0/M1.
enum class TStage { t1, t1a, t1b, t1c, t2, t2a, t2b, t2c, t3, t3a, t3b, t3c, t4 };
enum class NStage { n0, n1 };
enum class MStage { m0, m1 };

struct TnmStaging {
    std::optional<TStage> t;
    std::optional<NStage> n;
    std::optional<MStage> m;
    bool operator==(const TnmStaging&) const = default;
};

struct ProstateDetail {
    int gleason_primary = 0;    // 1..5
    int gleason_secondary = 0;  // 1..5
    int cores_positive = 0;
    int cores_total = 0;  // > 0, >= cores_positive
    bool operator==(const ProstateDetail&) const = default;

    int gleason_sum() const { return gleason_primary + gleason_secondary; }
    void check() const;  // throws std::invalid_argument on invariant violation
};

struct DiagnosisDetail {
    std::string site;
    Date onset_date;
    TnmStaging staging;
    std::string histology;
    std::optional<ProstateDetail> prostate_detail;
    bool operator==(const DiagnosisDetail&) const = default;
};

struct DatedDocument {
    Date date;
    std::string title;
    std::string text;
    bool operator==(const DatedDocument&) const = default;
};

struct MedicationEntry {
    std::string name;
    Date start_date;
    std::optional<Date> end_date;
    bool operator==(const MedicationEntry&) const = default;
};

struct LabResult {
    std::string analyte;
    double value = 0;
    std::string unit;
    Date date;
    bool operator==(const LabResult&) const = default;
};

struct PriorRadiationCourse {
    double dose_gy = 0;  // > 0
    int year = 0;
    bool operator==(const PriorRadiationCourse&) const = default;
};

struct EligibilityFacts {
    std::optional<int> ecog;  // 0..5
    std::vector<std::string> comorbidities;
    std::map<std::string, std::string> biomarkers;
    std::vector<PriorRadiationCourse> prior_radiation;
    std::vector<std::string> prior_systemic_therapies;
    bool operator==(const EligibilityFacts&) const = default;
};

struct TreatmentDetail {
    std::string site;
    std::string modality;
    std::optional<double> dose_gy_prescribed;
    std::optional<double> dose_gy_delivered;
    std::optional<int> fractions_prescribed;
    std::optional<int> fractions_delivered;
    Date start_date;
    std::optional<Date> most_recent_date;
    std::optional<Date> next_date;
    bool current = false;
    bool operator==(const TreatmentDetail&) const = default;
};

struct Appointment {
    std::string appointment_id;
    std::string physician_id;
    std::string patient_id;
    LocalTimestamp start_time;
    VisitKind visit_kind = VisitKind::other;
    std::string raw_type_label;
    bool operator==(const Appointment&) const = default;
};

/// Everything the mock EHR knows about one patient.
struct PatientChart {
    std::string patient_id;
    std::string name;
    Date date_of_birth;
    Sex sex = Sex::unknown;
    std::vector<DiagnosisDetail> diagnoses;
    std::vector<TreatmentDetail> treatments;
    std::vector<Appointment> appointments;
    std::vector<DatedDocument> radiology_reports;
    std::vector<DatedDocument> pathology_reports;
    std::map<Specialty, std::vector<DatedDocument>> notes;
    std::vector<MedicationEntry> medications;
    std::vector<LabResult> labs;
    EligibilityFacts eligibility_facts;
    bool operator==(const PatientChart&) const = default;

    std::optional<int> age_years_on(const Date& on) const;
};

// --- enum <-> string ---------------------------------------------------

std::string_view to_string(Sex);
std::string_view to_string(VisitKind);
std::string_view to_string(Specialty);
std::string_view to_string(TStage);
std::string_view to_string(NStage);
std::string_view to_string(MStage);

Result<Sex> parse_sex(std::string_view);
Result<VisitKind> parse_visit_kind(std::string_view);
Result<Specialty> parse_specialty(std::string_view);
Result<TStage> parse_t_stage(std::string_view);
Result<NStage> parse_n_stage(std::string_view);
Result<MStage> parse_m_stage(std::string_view);

// --- visit-kind mapping -------------------------------------------------

/// Priority-ordered keyword table: first row whose keyword appears
/// (case-insensitive substring) in the raw label wins.
struct VisitKindRule {
    std::string keyword;
    VisitKind kind;
};
using VisitKindTable = std::vector<VisitKindRule>;

const VisitKindTable& default_visit_kind_table();

/// Total over non-empty labels; unmapped labels fall through to `other`.
/// Throws std::invalid_argument on an empty label.
VisitKind classify_visit_kind(std::string_view raw_type_label);
VisitKind classify_visit_kind(std::string_view raw_type_label, const VisitKindTable& table);

/// Trial matching is gated to first-contact visits.
bool is_trial_eligible_visit(VisitKind kind);

}  // namespace ddose::domain
