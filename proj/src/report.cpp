#include "eev/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace eev::bench {

namespace {

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace

BDReport aggregate_report(const std::vector<BDEntry>& entries, const std::string& metric) {
    if (entries.empty()) {
        BDReport empty;
        empty.metric = metric;
        return empty;
    }
    BDReport report;
    report.metric = metric;
    report.entries = entries;
    std::sort(report.entries.begin(), report.entries.end(), [](const BDEntry& a, const BDEntry& b) {
        if (a.class_label != b.class_label) return a.class_label < b.class_label;
        return a.sequence < b.sequence;
    });

    std::map<std::string, std::pair<double, int>> by_class;
    double total = 0.0;
    for (const auto& e : report.entries) {
        auto& [sum, count] = by_class[e.class_label];
        sum += e.bd_percent;
        count += 1;
        total += e.bd_percent;
    }
    double class_total = 0.0;
    for (const auto& [label, acc] : by_class) {
        report.class_means[label] = acc.first / acc.second;
        class_total += report.class_means[label];
    }
    report.overall_sequence_mean = total / static_cast<double>(report.entries.size());
    report.mean_of_class_means = class_total / static_cast<double>(by_class.size());
    return report;
}

std::string emit_bd_csv(const BDReport& report) {
    std::string out = "class,sequence,bd_rate_percent\n";
    for (const auto& e : report.entries)
        out += e.class_label + "," + e.sequence + "," + fmt(e.bd_percent) + "\n";
    return out;
}

BDReport parse_bd_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "class,sequence,bd_rate_percent")
        throw FormatError("bd csv: missing or malformed header");
    std::vector<BDEntry> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw FormatError("bd csv: malformed row \"" + line + "\"");
        BDEntry e;
        e.class_label = line.substr(0, c1);
        e.sequence = line.substr(c1 + 1, c2 - c1 - 1);
        e.bd_percent = std::stod(line.substr(c2 + 1));
        entries.push_back(std::move(e));
    }
    return aggregate_report(entries, "");
}

std::string emit_bd_json(const BDReport& report) {
    nlohmann::json j;
    j["metric"] = report.metric;
    j["sequences"] = nlohmann::json::array();
    for (const auto& e : report.entries)
        j["sequences"].push_back({{"class", e.class_label},
                                  {"sequence", e.sequence},
                                  {"bd_rate_percent", e.bd_percent}});
    j["class_means"] = nlohmann::json::object();
    for (const auto& [label, mean] : report.class_means) j["class_means"][label] = mean;
    j["overall_sequence_mean"] = report.overall_sequence_mean;
    j["mean_of_class_means"] = report.mean_of_class_means;
    return j.dump(2) + "\n";
}

const char* bd_report_schema() {
    return R"({
  "type": "object",
  "required": ["metric", "sequences", "class_means", "overall_sequence_mean", "mean_of_class_means"],
  "properties": {
    "metric": {"type": "string"},
    "sequences": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["class", "sequence", "bd_rate_percent"],
        "properties": {
          "class": {"type": "string"},
          "sequence": {"type": "string"},
          "bd_rate_percent": {"type": "number"}
        }
      }
    },
    "class_means": {"type": "object"},
    "overall_sequence_mean": {"type": "number"},
    "mean_of_class_means": {"type": "number"}
  }
})";
}

namespace {

void check_against_schema(const nlohmann::json& value, const nlohmann::json& schema,
                          const std::string& where) {
    const std::string type = schema.value("type", "");
    if (type == "object") {
        if (!value.is_object()) throw FormatError(where + ": expected an object");
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!value.contains(key.get<std::string>()))
                    throw FormatError(where + ": missing required key \"" +
                                      key.get<std::string>() + "\"");
        if (schema.contains("properties"))
            for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
                if (value.contains(it.key()))
                    check_against_schema(value[it.key()], it.value(), where + "." + it.key());
    } else if (type == "array") {
        if (!value.is_array()) throw FormatError(where + ": expected an array");
        if (schema.contains("items"))
            for (std::size_t i = 0; i < value.size(); ++i)
                check_against_schema(value[i], schema["items"],
                                     where + "[" + std::to_string(i) + "]");
    } else if (type == "string") {
        if (!value.is_string()) throw FormatError(where + ": expected a string");
    } else if (type == "number") {
        if (!value.is_number()) throw FormatError(where + ": expected a number");
    }
}

} // namespace

void validate_bd_report_json(const std::string& json_text) {
    nlohmann::json value;
    nlohmann::json schema;
    try {
        value = nlohmann::json::parse(json_text);
        schema = nlohmann::json::parse(bd_report_schema());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bd report json: ") + e.what());
    }
    check_against_schema(value, schema, "$");
}

std::string emit_rd_csv(const RDCurve& curve) {
    std::string out = "bpp,quality\n";
    for (const auto& p : curve.points) out += fmt(p.bpp, 6) + "," + fmt(p.quality, 6) + "\n";
    return out;
}

RDCurve parse_rd_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "bpp,quality")
        throw FormatError("rd csv: missing or malformed header (want \"bpp,quality\")");
    RDCurve curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError("rd csv: malformed row \"" + line + "\"");
        RDPointB p;
        p.bpp = std::stod(line.substr(0, comma));
        p.quality = std::stod(line.substr(comma + 1));
        curve.points.push_back(p);
    }
    return curve;
}

std::string emit_rd_svg(const std::vector<RDCurve>& curves, const std::string& quality_label) {
    constexpr int kWidth = 640, kHeight = 480, kMargin = 56;
    double min_bpp = 1e30, max_bpp = -1e30, min_q = 1e30, max_q = -1e30;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            min_bpp = std::min(min_bpp, p.bpp);
            max_bpp = std::max(max_bpp, p.bpp);
            min_q = std::min(min_q, p.quality);
            max_q = std::max(max_q, p.quality);
        }
    if (curves.empty() || min_bpp > max_bpp) {
        min_bpp = 0.0;
        max_bpp = 1.0;
        min_q = 0.0;
        max_q = 1.0;
    }
    if (max_bpp == min_bpp) max_bpp += 1.0;
    if (max_q == min_q) max_q += 1.0;

    auto sx = [&](double bpp) {
        return kMargin + (bpp - min_bpp) / (max_bpp - min_bpp) * (kWidth - 2 * kMargin);
    };
    auto sy = [&](double q) {
        return kHeight - kMargin - (q - min_q) / (max_q - min_q) * (kHeight - 2 * kMargin);
    };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "  <line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">bpp</text>\n";
    out << "  <text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"14\""
        << " transform=\"rotate(-90 16 " << kHeight / 2 << ")\">" << quality_label
        << "</text>\n";

    std::vector<RDCurve> sorted = curves;
    std::sort(sorted.begin(), sorted.end(), [](const RDCurve& a, const RDCurve& b) {
        if (a.codec_id != b.codec_id) return a.codec_id < b.codec_id;
        return a.sequence < b.sequence;
    });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const char* color = kColors[i % 6];
        out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : sorted[i].points) out << fmt(sx(p.bpp), 1) << "," << fmt(sy(p.quality), 1) << " ";
        out << "\"/>\n";
        for (const auto& p : sorted[i].points)
            out << "  <circle cx=\"" << fmt(sx(p.bpp), 1) << "\" cy=\"" << fmt(sy(p.quality), 1)
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        out << "  <text x=\"" << kWidth - kMargin + 4 << "\" y=\"" << kMargin + 16 * (i + 1)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << sorted[i].codec_id << "/"
            << sorted[i].sequence << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace eev::bench
