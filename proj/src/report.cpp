#include "fpc/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fpc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string param_hash(const ExperimentReport& r) {
  std::string blob;
  for (const auto& [k, v] : r.parameters) blob += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(blob)));
  return buf;
}

void write_bounds_csv(std::ostream& os, const std::vector<ExperimentReport>& reports) {
  os << "experiment_id,param_hash,name,lhs,relation,rhs,pass\r\n";
  for (const auto& r : reports) {
    const auto hash = param_hash(r);
    for (const auto& b : r.bounds_checked) {
      os << csv_field(r.experiment_id) << ',' << hash << ',' << csv_field(b.description) << ','
         << format_double(b.lhs) << ',' << csv_field(b.relation) << ',' << format_double(b.rhs) << ','
         << (b.pass ? "true" : "false") << "\r\n";
    }
  }
}

void write_measurements_csv(std::ostream& os, const std::vector<ExperimentReport>& reports) {
  os << "experiment_id,param_hash,name,value\r\n";
  for (const auto& r : reports) {
    const auto hash = param_hash(r);
    for (const auto& [name, v] : r.measurements)
      os << csv_field(r.experiment_id) << ',' << hash << ',' << csv_field(name) << ',' << format_double(v) << "\r\n";
  }
}

std::string text_summary(const ExperimentReport& r) {
  std::ostringstream os;
  os << "experiment " << r.experiment_id << "  [" << (r.pass ? "PASS" : "FAIL") << "]"
     << (r.converged ? "" : "  (some solves did not converge)") << "\n";
  os << "  parameters (hash " << param_hash(r) << ")\n";
  for (const auto& [k, v] : r.parameters) os << "    " << k << " = " << v << "\n";
  if (!r.measurements.empty()) {
    os << "  measurements\n";
    for (const auto& [k, v] : r.measurements) os << "    " << k << " = " << format_double(v) << "\n";
  }
  if (!r.bounds_checked.empty()) {
    os << "  checks\n";
    for (const auto& b : r.bounds_checked)
      os << "    [" << (b.pass ? "ok" : "FAIL") << "] " << b.description << ": " << format_double(b.lhs) << " "
         << b.relation << " " << format_double(b.rhs) << "\n";
  }
  if (r.fit) {
    os << "  fit " << r.fit->model << ":";
    for (double c : r.fit->coefficients) os << " " << format_double(c);
    os << "  (rms " << format_double(r.fit->residual) << ")\n";
  }
  for (const auto& n : r.notes) os << "  note: " << n << "\n";
  return os.str();
}

}  // namespace fpc
