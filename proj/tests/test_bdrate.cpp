#include "doctest.h"

#include <cmath>

#include "eev/bdrate.hpp"
#include "eev/report.hpp"

using namespace eev;
using namespace eev::bench;

namespace {

RDCurve sample_curve() {
    RDCurve c;
    c.codec_id = "anchor";
    c.sequence = "synthetic";
    c.points = {{0.05, 30.1}, {0.11, 33.4}, {0.24, 36.2}, {0.52, 38.8}};
    return c;
}

RDCurve scale_rates(const RDCurve& in, double factor) {
    RDCurve out = in;
    for (auto& p : out.points) p.bpp *= factor;
    return out;
}

} // namespace

TEST_CASE("bd_rate of identical curves is zero") {
    auto a = sample_curve();
    CHECK(bd_rate(a, a) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(bd_rate_pchip(a, a) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bd_rate of a constant rate shift is the exact percentage") {
    auto a = sample_curve();
    // x0.9 rate at equal quality: log10 rates shift by log10(0.9) everywhere
    CHECK(bd_rate(a, scale_rates(a, 0.9)) == doctest::Approx(-10.0).epsilon(1e-4));
    CHECK(bd_rate(a, scale_rates(a, 2.0)) == doctest::Approx(100.0).epsilon(1e-4));
    CHECK(bd_rate_pchip(a, scale_rates(a, 0.9)) == doctest::Approx(-10.0).epsilon(1e-4));
    CHECK(bd_rate_pchip(a, scale_rates(a, 2.0)) == doctest::Approx(100.0).epsilon(1e-4));
}

TEST_CASE("bd_rate of any synthetic curve against itself is zero") {
    Rng rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        RDCurve c;
        c.sequence = "synthetic" + std::to_string(trial);
        double bpp = 0.02 + 0.1 * rng.uniform();
        double q = 28.0 + 4.0 * rng.uniform();
        for (int i = 0; i < 4 + static_cast<int>(rng.next_u32() % 3); ++i) {
            c.points.push_back({bpp, q});
            bpp *= 1.5 + rng.uniform();
            q += 0.5 + 2.0 * rng.uniform();
        }
        CHECK(bd_rate(c, c) == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("a strictly better curve gets a negative delta") {
    auto a = sample_curve();
    RDCurve better = a;
    for (auto& p : better.points) {
        p.bpp *= 0.8;
        p.quality += 0.5;
    }
    CHECK(bd_rate(a, better) < 0.0);
    CHECK(bd_rate(better, a) > 0.0);
}

TEST_CASE("bd_rate input validation") {
    auto a = sample_curve();
    RDCurve three = a;
    three.points.pop_back();
    CHECK_THROWS_AS(bd_rate(a, three), Error);

    RDCurve disjoint = a;
    for (auto& p : disjoint.points) p.quality += 100.0;
    CHECK_THROWS_AS(bd_rate(a, disjoint), Error);

    RDCurve dup = a;
    dup.points[1].bpp = dup.points[0].bpp;
    CHECK_THROWS_AS(bd_rate(dup, a), Error);
}

TEST_CASE("validate_curve sorts by rate and warns on quality drops") {
    RDCurve c;
    c.sequence = "warnme";
    c.points = {{0.5, 38.0}, {0.1, 30.0}, {0.25, 29.0}};
    std::vector<std::string> warnings;
    validate_curve(c, &warnings);
    CHECK(c.points[0].bpp == doctest::Approx(0.1));
    CHECK(c.points[2].bpp == doctest::Approx(0.5));
    REQUIRE(!warnings.empty());
    CHECK(warnings[0].find("quality drops") != std::string::npos);
}

TEST_CASE("aggregate_report means") {
    std::vector<BDEntry> entries = {
        {"Class A", "one", -10.0},
        {"Class A", "two", -20.0},
        {"Class B", "three", -40.0},
    };
    auto report = aggregate_report(entries, "psnr");
    CHECK(report.class_means.at("Class A") == doctest::Approx(-15.0));
    CHECK(report.class_means.at("Class B") == doctest::Approx(-40.0));
    CHECK(report.overall_sequence_mean == doctest::Approx((-10.0 - 20.0 - 40.0) / 3.0));
    CHECK(report.mean_of_class_means == doctest::Approx((-15.0 - 40.0) / 2.0));

    auto single = aggregate_report({{"Class C", "only", -7.5}}, "psnr");
    CHECK(single.class_means.at("Class C") == doctest::Approx(-7.5));
    CHECK(single.overall_sequence_mean == doctest::Approx(-7.5));
}

TEST_CASE("bd csv round-trips byte-identically") {
    std::vector<BDEntry> entries = {
        {"Class B", "zeta", -12.3456},
        {"Class A", "alpha", 4.2},
        {"Class A", "beta", -63.61},
    };
    auto report = aggregate_report(entries, "ms-ssim");
    const std::string csv = emit_bd_csv(report);
    auto parsed = parse_bd_csv(csv);
    CHECK(emit_bd_csv(parsed) == csv);
    CHECK(parsed.class_means.at("Class A") == doctest::Approx(report.class_means.at("Class A")));

    auto empty = aggregate_report({}, "psnr");
    CHECK(emit_bd_csv(empty) == "class,sequence,bd_rate_percent\n");
}

TEST_CASE("bd json validates against the shipped schema") {
    auto report = aggregate_report({{"Class A", "alpha", -1.0}, {"Class B", "beta", 2.0}}, "vmaf");
    const std::string json = emit_bd_json(report);
    validate_bd_report_json(json); // throws on violation

    CHECK_THROWS_AS(validate_bd_report_json("{\"metric\": 5}"), FormatError);
    CHECK_THROWS_AS(validate_bd_report_json("not json"), FormatError);
}

TEST_CASE("rd csv round-trips") {
    auto curve = sample_curve();
    const std::string csv = emit_rd_csv(curve);
    auto parsed = parse_rd_csv(csv);
    REQUIRE(parsed.points.size() == curve.points.size());
    CHECK(emit_rd_csv(parsed) == csv);
}

TEST_CASE("rd svg contains a polyline per curve") {
    auto a = sample_curve();
    auto b = scale_rates(a, 0.8);
    b.codec_id = "test";
    const std::string svg = emit_rd_svg({a, b}, "PSNR (dB)");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("anchor/synthetic") != std::string::npos);
    CHECK(svg.find("test/synthetic") != std::string::npos);
    // deterministic: same input, same bytes
    CHECK(emit_rd_svg({a, b}, "PSNR (dB)") == svg);
}
