#pragma once

#include <string>
#include <vector>

#include "eev/common.hpp"

namespace eev::bench {

struct RDPointB {
    double bpp = 0.0;
    double quality = 0.0;
};

struct RDCurve {
    std::string codec_id;
    std::string sequence;
    std::vector<RDPointB> points;
};

// Sorts by bpp and enforces strictly increasing rate; a quality drop along
// increasing rate is reported as a warning, not an error.
void validate_curve(RDCurve& curve, std::vector<std::string>* warnings = nullptr);

// Classic Bjontegaard delta rate: cubic least-squares fit of log10(rate) over
// quality, integrated across the overlapping quality range. Negative means
// the test codec spends less rate at equal quality. Requires >= 4 points per
// curve and a non-empty overlap.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

// Monotone piecewise-cubic (Fritsch-Carlson) variant.
double bd_rate_pchip(const RDCurve& anchor, const RDCurve& test);

} // namespace eev::bench
