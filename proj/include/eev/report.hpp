#pragma once

#include <map>
#include <string>
#include <vector>

#include "eev/bdrate.hpp"

namespace eev::bench {

struct BDEntry {
    std::string class_label;
    std::string sequence;
    double bd_percent = 0.0;
};

struct BDReport {
    std::string metric; // "psnr", "ms-ssim", "vmaf"
    std::vector<BDEntry> entries; // sorted by (class, sequence)
    std::map<std::string, double> class_means;
    double overall_sequence_mean = 0.0; // mean over all sequences
    double mean_of_class_means = 0.0;   // mean of the per-class means
};

BDReport aggregate_report(const std::vector<BDEntry>& entries, const std::string& metric);

// Deterministic tabular form: header line, then one row per sequence sorted
// by (class, sequence).
std::string emit_bd_csv(const BDReport& report);
BDReport parse_bd_csv(const std::string& csv);

std::string emit_bd_json(const BDReport& report);
// Structural check against the shipped schema; throws FormatError on
// violations.
void validate_bd_report_json(const std::string& json_text);
const char* bd_report_schema();

// R-D points as csv ("bpp,quality" per line) for the bdrate CLI.
std::string emit_rd_csv(const RDCurve& curve);
RDCurve parse_rd_csv(const std::string& csv);

// Scatter/line plot of one or more R-D curves.
std::string emit_rd_svg(const std::vector<RDCurve>& curves, const std::string& quality_label);

} // namespace eev::bench
