#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "shapnarr/shapnarr.hpp"

namespace testutil {

inline std::string data_path(const std::string& rel) { return std::string(SHAPNARR_TEST_DATA) + "/" + rel; }

inline std::string slurp(const std::string& rel) {
  std::ifstream in(data_path(rel), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline shapnarr::ShapTable student_table() { return shapnarr::load_shap_table(slurp("student/student-14.json")).table; }

inline shapnarr::DatasetInfo student_info() { return shapnarr::load_dataset_info(slurp("student/datasets/student.json")); }

// The narrative of the running Student example, as an extraction: goout and
// failures exchanged, Walc told as positive, goout quoted as 5.
inline shapnarr::ExtractionRecord figure2_extraction() {
  return {{{"absences", 0, 1, 2.0, std::nullopt},
           {"failures", 1, 1, 0.0, std::nullopt},
           {"Walc", 2, 1, 3.0, std::nullopt},
           {"goout", 3, -1, 5.0, std::nullopt}}};
}

inline shapnarr::ExtractionRecord truth_extraction(const shapnarr::ShapTable& t, int n) {
  shapnarr::ExtractionRecord r;
  for (const auto& g : shapnarr::ground_truth(t, n)) r.entries.push_back({g.feature_name, g.rank, g.sign, g.value, std::nullopt});
  return r;
}

}  // namespace testutil
