#pragma once

// Carrier for one empirical-vs-main-term experiment.

#include <map>
#include <string>
#include <vector>

namespace gpylab {

struct RangeReport {
  double empirical = 0.0;
  double main_term = 0.0;
  double ratio = 0.0;  // empirical / main_term
  long long n_lo = 0;  // range (n_lo, n_hi]
  long long n_hi = 0;
  bool flagged = false;             // e.g. non-admissible tuple
  std::vector<std::string> notes;   // human-readable diagnostics
  std::map<std::string, double> diagnostics;  // route-tagged numeric extras

  void finish() { ratio = main_term != 0.0 ? empirical / main_term : 0.0; }
};

}  // namespace gpylab
