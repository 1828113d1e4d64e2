#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fpc/experiments.hpp"

namespace fpc {

// %.17g, with "inf", "-inf" and "nan" spelled out.
std::string format_double(double v);

// RFC 4180: quote when the field holds a comma, quote, CR or LF; double inner quotes.
std::string csv_field(const std::string& s);

std::uint64_t fnv1a(const std::string& s);

// 16 hex digits of FNV-1a over "key=value\n" for every parameter, in order.
std::string param_hash(const ExperimentReport& r);

// experiment_id,param_hash,name,lhs,relation,rhs,pass  (one row per bound check)
void write_bounds_csv(std::ostream& os, const std::vector<ExperimentReport>& reports);

// experiment_id,param_hash,name,value
void write_measurements_csv(std::ostream& os, const std::vector<ExperimentReport>& reports);

// Human-readable block. Wall time is left out so reruns compare equal.
std::string text_summary(const ExperimentReport& r);

}  // namespace fpc
