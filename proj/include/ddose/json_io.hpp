// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "json.hpp"

#include "ddose/domain.hpp"

// Canonical JSON forms of the domain types. This is both the fixture
// on-disk schema (docs/fixtures.md) and the wire form of tool payloads,
// so changes here are format changes.
namespace ddose::jsonio {

using nlohmann::json;

json to_json(const domain::Appointment&);
json to_json(const domain::DiagnosisDetail&);
json to_json(const domain::TreatmentDetail&);
json to_json(const domain::DatedDocument&);
json to_json(const domain::MedicationEntry&);
json to_json(const domain::LabResult&);
json to_json(const domain::EligibilityFacts&);
json to_json(const domain::PatientChart&);

Result<domain::Appointment> appointment_from_json(const json&);
Result<domain::DiagnosisDetail> diagnosis_from_json(const json&);
Result<domain::TreatmentDetail> treatment_from_json(const json&);
Result<domain::DatedDocument> dated_document_from_json(const json&);
Result<domain::MedicationEntry> medication_from_json(const json&);
Result<domain::LabResult> lab_from_json(const json&);
Result<domain::EligibilityFacts> eligibility_from_json(const json&);
Result<domain::PatientChart> chart_from_json(const json&);

}  // namespace ddose::jsonio
