// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "ddose/json_io.hpp"

using namespace ddose;
using namespace ddose::jsonio;

namespace {

domain::PatientChart sample_chart() {
    domain::PatientChart c;
    c.patient_id = "P001";
    c.name = "Harold Jennings";
    c.date_of_birth = Date{1958, 5, 12};
    c.sex = domain::Sex::male;

    domain::DiagnosisDetail d;
    d.site = "prostate";
    d.onset_date = Date{2025, 3, 5};
    d.staging = {domain::TStage::t1c, domain::NStage::n0, domain::MStage::m0};
    d.histology = "adenocarcinoma";
    d.prostate_detail = domain::ProstateDetail{4, 3, 3, 12};
    c.diagnoses.push_back(d);

    domain::TreatmentDetail t;
    t.site = "prostate";
    t.modality = "EBRT";
    t.dose_gy_prescribed = 60.0;
    t.fractions_prescribed = 20;
    t.start_date = Date{2025, 9, 1};
    c.treatments.push_back(t);

    c.labs.push_back({"PSA", 5.4, "ng/mL", Date{2025, 3, 4}});
    c.medications.push_back({"tamsulosin", Date{2025, 4, 1}, std::nullopt});
    c.notes[domain::Specialty::urology].push_back(
        {Date{2025, 6, 10}, "Urology clinic note", "Stable urinary symptoms."});
    c.eligibility_facts.ecog = 1;
    c.eligibility_facts.prior_radiation.push_back({75.0, 2022});
    return c;
}

}  // namespace

TEST_SUITE("json_io") {

TEST_CASE("chart round-trips through the canonical JSON form") {
    const auto c = sample_chart();
    const json j = to_json(c);
    auto back = chart_from_json(j);
    REQUIRE(back.ok());
    CHECK(back.value() == c);
    // Serialization itself is deterministic.
    CHECK(to_json(back.value()).dump(2) == j.dump(2));
}

TEST_CASE("parse errors name the offending field") {
    json j = to_json(sample_chart());
    j.erase("date_of_birth");
    auto r = chart_from_json(j);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().message.find("date_of_birth") != std::string::npos);
}

TEST_CASE("PSA labs must carry ng/mL") {
    json j = to_json(domain::LabResult{"PSA", 5.4, "mg/dL", Date{2025, 3, 4}});
    CHECK_FALSE(lab_from_json(j).ok());
    j["unit"] = "ng/mL";
    CHECK(lab_from_json(j).ok());
}

TEST_CASE("gleason and core invariants are enforced at parse time") {
    json j = to_json(sample_chart().diagnoses[0]);
    j["prostate_detail"]["gleason_primary"] = 6;
    CHECK_FALSE(diagnosis_from_json(j).ok());
    j["prostate_detail"]["gleason_primary"] = 4;
    j["prostate_detail"]["cores_positive"] = 13;
    CHECK_FALSE(diagnosis_from_json(j).ok());
}

TEST_CASE("prior radiation requires a positive dose") {
    json j = json{{"prior_radiation", json::array({{{"dose_gy", 0.0}, {"year", 2022}}})}};
    CHECK_FALSE(eligibility_from_json(j).ok());
}

TEST_CASE("dated lists are sorted ascending at load") {
    json j = to_json(sample_chart());
    j["labs"] = json::array({to_json(domain::LabResult{"PSA", 5.0, "ng/mL", Date{2025, 7, 15}}),
                             to_json(domain::LabResult{"PSA", 5.4, "ng/mL", Date{2025, 3, 4}})});
    auto r = chart_from_json(j);
    REQUIRE(r.ok());
    REQUIRE(r.value().labs.size() == 2);
    CHECK(r.value().labs[0].date == Date{2025, 3, 4});
    CHECK(r.value().labs[1].date == Date{2025, 7, 15});
}

TEST_CASE("appointment visit_kind derives from the raw label when absent") {
    json j{{"appointment_id", "A1"},
           {"physician_id", "dr-A"},
           {"patient_id", "P001"},
           {"start_time", "2025-08-04T08:30:00-05:00"},
           {"raw_type_label", "Consult - Prostate"}};
    auto r = appointment_from_json(j);
    REQUIRE(r.ok());
    CHECK(r.value().visit_kind == domain::VisitKind::consult);

    j["visit_kind"] = "follow_up";
    r = appointment_from_json(j);
    REQUIRE(r.ok());
    CHECK(r.value().visit_kind == domain::VisitKind::follow_up);

    j["raw_type_label"] = "";
    CHECK_FALSE(appointment_from_json(j).ok());
}

}  // TEST_SUITE
