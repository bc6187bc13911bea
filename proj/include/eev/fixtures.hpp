#pragma once

// Embedded reference data: the published per-sequence BD-rate tables (HEVC
// anchor) and the model complexity summary. Read-only; the benchmark
// harness reproduces the printed class means and averages from the
// per-sequence cells.

#include <string>
#include <vector>

#include "eev/common.hpp"

namespace eev::bench::fixtures {

enum class Table { II, III, V, VII, VIII };

Table table_from_name(const std::string& name);
const char* table_name(Table t);
// distortion metric of each BD table
const char* table_metric(Table t);

// column order of every BD table
inline const std::vector<std::string>& codecs() {
    static const std::vector<std::string> c = {"EEV-0.4", "EEV-0.3", "VVC", "EEV-0.1"};
    return c;
}

struct SequenceCell {
    const char* class_label;
    const char* sequence;
    double values[4]; // by codec column
};

struct SummaryCell {
    const char* label; // "Class A", "Average", "Average (Class A-E)", "Overall Average"
    double values[4];
};

const std::vector<SequenceCell>& table_cells(Table t);
const std::vector<SummaryCell>& table_summaries(Table t);

double lookup(Table t, const std::string& codec, const std::string& sequence);

struct ComplexityRow {
    const char* model;
    double macs_per_pixel_m; // millions of MACs per pixel
    double params_m;         // millions of parameters
};

const std::vector<ComplexityRow>& complexity_rows();
double complexity_lookup(const std::string& model, const std::string& field);

} // namespace eev::bench::fixtures
