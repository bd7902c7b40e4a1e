#ifndef QSL_REPORT_HPP
#define QSL_REPORT_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsl/errors.hpp"

namespace qsl {

/// One named check: scalar or series, with an explicit tolerance and the
/// identity it verifies. Exploratory checks report values but never fail.
struct CheckResult {
  std::string name;
  std::string kind = "scalar";  // "scalar" | "series" | "exploratory"
  double value = 0.0;           // scalar value or worst-case of the series
  std::vector<double> series;
  std::vector<double> abscissae;  // optional x-values for the series
  double tolerance = 0.0;
  bool pass = true;
  std::string verifies;  // which identity/inequality this instantiates
  std::string notes;

  static CheckResult scalar(std::string name, double value, double tol,
                            std::string verifies, std::string notes = "") {
    CheckResult c;
    c.name = std::move(name);
    c.value = value;
    c.tolerance = tol;
    c.pass = std::abs(value) <= tol;
    c.verifies = std::move(verifies);
    c.notes = std::move(notes);
    return c;
  }
};

/// Named collection of checks; aggregate pass iff every non-exploratory
/// check passes.
struct DiagnosticsReport {
  std::string name;
  std::vector<CheckResult> checks;

  void add(CheckResult c) { checks.push_back(std::move(c)); }
  bool all_pass() const {
    for (const auto& c : checks)
      if (c.kind != "exploratory" && !c.pass) return false;
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["pass"] = all_pass();
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json cj;
      cj["name"] = c.name;
      cj["kind"] = c.kind;
      cj["value"] = c.value;
      cj["tolerance"] = c.tolerance;
      cj["pass"] = c.pass;
      cj["verifies"] = c.verifies;
      if (!c.notes.empty()) cj["notes"] = c.notes;
      if (!c.series.empty()) cj["series_length"] = c.series.size();
      arr.push_back(cj);
    }
    j["checks"] = arr;
    return j;
  }

  /// One CSV per series check (x,value columns, 17 significant digits).
  void write_series_csv(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char buf[40];
    for (const auto& c : checks) {
      if (c.series.empty()) continue;
      std::ofstream out(dir + "/" + c.name + ".csv");
      out << "x,value\n";
      for (std::size_t i = 0; i < c.series.size(); ++i) {
        const double x =
            i < c.abscissae.size() ? c.abscissae[i] : static_cast<double>(i);
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", c.series[i]);
        out << buf << "\n";
      }
    }
  }
};

}  // namespace qsl

#endif  // QSL_REPORT_HPP
