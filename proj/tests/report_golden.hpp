#pragma once

// Hand-traced golden corpus for the report preprocessing pipeline.

#include <string>
#include <vector>

#include "xrprobe/report_prep.hpp"

namespace golden {

inline const std::vector<xrprobe::report::RawReport>& raw_reports() {
  static const std::vector<xrprobe::report::RawReport> r{
      {"r01", "Tech notes. FINDINGS: Heart size normal. Lungs are clear."},
      {"r02", "Heart size normal. Lungs clear."},
      {"r03", "REPORT:\n\n"},
      {"r04", "FINDINGS: Measures 3.5 cm in the right apex. No change since 2019."},
      {"r05", "____ XR CHEST ____ Normal."},
      {"r06", "Clinical history: cough. FINDINGS: Clear. Heart size normal. Mediastinum unremarkable."},
      {"r07", "REPORT: see below. FINDINGS: The lungs are clear."},
      {"r08", "Patient REPORTED pain. Findings - Small left effusion. No pneumothorax."},
      {"r09", "FINDINGS: [AUTO-TEXT v2] Heart size normal. [ID 123] Lungs clear bilaterally."},
      {"r10", "FINDINGS: Discussed with Dr. Smith at 10:00. Findings e.g. Effusion are stable. Tube No. 4 in place."},
      {"r11", "FINDINGS: Large effusion! Recommend follow up? yes. Heart enlarged."},
      {"r12", "FINDINGS: Three nodules are seen. 2 are calcified. 1 is new."},
      {"r13", "FINDINGS:\n  Heart   size\tnormal.\n\nLungs  are\nclear."},
      {"r14", "FINDINGS: ==== CHEST PA AND LATERAL ==== The heart is normal in size. -- The lungs are clear."},
      {"r15", "FINDINGS: Clear. Normal. OK."},
      {"r16", "REPORT - The heart is normal. The aorta is tortuous. No focal consolidation seen. No pleural effusion "
              "present. Bones are unremarkable."},
      {"r17", "Final report: Heart size normal. Lungs clear."},
      {"r18", "FINDINGS: Heart size normal __ lungs clear __ no effusion."},
      {"r19", "Cœur de taille normale. Poumons clairs et aérés."},
      {"r20", "FINDINGS: Patient states \"no pain\". [Signed electronically] Heart size normal. Lungs are clear."},
  };
  return r;
}

inline const std::string& expected_short_jsonl() {
  static const std::string s =
      R"({"id":"r01","sentences":["Heart size normal.","Lungs are clear."],"short_units":["Heart size normal. Lungs are clear."]}
{"id":"r02","sentences":["Heart size normal. Lungs clear."],"short_units":["Heart size normal. Lungs clear."]}
{"id":"r03","sentences":[],"short_units":[]}
{"id":"r04","sentences":["Measures 3.5 cm in the right apex.","No change since 2019."],"short_units":["Measures 3.5 cm in the right apex. No change since 2019."]}
{"id":"r05","sentences":[],"short_units":[]}
{"id":"r06","sentences":["Heart size normal. Mediastinum unremarkable."],"short_units":["Heart size normal. Mediastinum unremarkable."]}
{"id":"r07","sentences":["FINDINGS: The lungs are clear."],"short_units":["FINDINGS: The lungs are clear."]}
{"id":"r08","sentences":["Small left effusion. No pneumothorax."],"short_units":["Small left effusion. No pneumothorax."]}
{"id":"r09","sentences":["Heart size normal.","Lungs clear bilaterally."],"short_units":["Heart size normal. Lungs clear bilaterally."]}
{"id":"r10","sentences":["Discussed with Dr. Smith at 10:00.","Findings e.g. Effusion are stable.","Tube No. 4 in place."],"short_units":["Discussed with Dr. Smith at 10:00. Findings e.g. Effusion are stable.","Tube No. 4 in place."]}
{"id":"r11","sentences":["Recommend follow up? yes. Heart enlarged."],"short_units":["Recommend follow up? yes. Heart enlarged."]}
{"id":"r12","sentences":["Three nodules are seen.","2 are calcified.","1 is new."],"short_units":["Three nodules are seen. 2 are calcified.","1 is new."]}
{"id":"r13","sentences":["Heart size normal.","Lungs are clear."],"short_units":["Heart size normal. Lungs are clear."]}
{"id":"r14","sentences":["The heart is normal in size.","The lungs are clear."],"short_units":["The heart is normal in size. The lungs are clear."]}
{"id":"r15","sentences":[],"short_units":[]}
{"id":"r16","sentences":["The heart is normal.","The aorta is tortuous.","No focal consolidation seen.","No pleural effusion present.","Bones are unremarkable."],"short_units":["The heart is normal. The aorta is tortuous.","No focal consolidation seen. No pleural effusion present.","Bones are unremarkable."]}
{"id":"r17","sentences":["Heart size normal. Lungs clear."],"short_units":["Heart size normal. Lungs clear."]}
{"id":"r18","sentences":["Heart size normal lungs clear no effusion."],"short_units":["Heart size normal lungs clear no effusion."]}
{"id":"r19","sentences":["C)" "œ" R"(ur de taille normale.","Poumons clairs et a)" "éré" R"(s."],"short_units":["C)" "œ" R"(ur de taille normale. Poumons clairs et a)" "éré" R"(s."]}
{"id":"r20","sentences":["Patient states \"no pain\".","Heart size normal.","Lungs are clear."],"short_units":["Patient states \"no pain\". Heart size normal.","Lungs are clear."]}
)";
  return s;
}

inline const std::string& expected_audit_jsonl() {
  static const std::string s =
      R"({"id":"r02","flags":["no_keyword"],"dropped":[]}
{"id":"r03","flags":["empty_content"],"dropped":[]}
{"id":"r05","flags":["no_keyword","dropped_fragment","all_short"],"dropped":["Normal."]}
{"id":"r06","flags":["dropped_fragment"],"dropped":["Clear."]}
{"id":"r07","flags":["dropped_fragment"],"dropped":["see below."]}
{"id":"r11","flags":["dropped_fragment"],"dropped":["Large effusion!"]}
{"id":"r15","flags":["dropped_fragment","all_short"],"dropped":["Clear.","Normal.","OK."]}
{"id":"r19","flags":["no_keyword"],"dropped":[]}
)";
  return s;
}

/// Runs the pipeline over the corpus and renders both JSONL streams.
inline std::pair<std::string, std::string> render() {
  std::string out, audit;
  for (const auto& raw : raw_reports()) {
    xrprobe::report::AuditEntry a;
    out += xrprobe::report::to_json(xrprobe::report::preprocess(raw, a)).dump() + "\n";
    if (!a.empty()) audit += xrprobe::report::to_json(a).dump() + "\n";
  }
  return {out, audit};
}

}  // namespace golden
