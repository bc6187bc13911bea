#include "eev/fixtures.hpp"

namespace eev::bench::fixtures {

Table table_from_name(const std::string& name) {
    if (name == "II" || name == "2" || name == "ii") return Table::II;
    if (name == "III" || name == "3" || name == "iii") return Table::III;
    if (name == "V" || name == "5" || name == "v") return Table::V;
    if (name == "VII" || name == "7" || name == "vii") return Table::VII;
    if (name == "VIII" || name == "8" || name == "viii") return Table::VIII;
    throw ParseError("unknown fixture table \"" + name + "\" (expected II, III, V, VII, or VIII)");
}

const char* table_name(Table t) {
    switch (t) {
    case Table::II: return "II";
    case Table::III: return "III";
    case Table::V: return "V";
    case Table::VII: return "VII";
    case Table::VIII: return "VIII";
    }
    return "?";
}

const char* table_metric(Table t) {
    switch (t) {
    case Table::II: return "ms-ssim";
    case Table::III: return "psnr";
    case Table::V: return "ms-ssim";
    case Table::VII: return "vmaf";
    case Table::VIII: return "complexity";
    }
    return "?";
}

// columns: EEV-0.4, EEV-0.3, VVC, EEV-0.1 (all BD-rate vs HEVC, percent)

const std::vector<SequenceCell>& table_cells(Table t) {
    static const std::vector<SequenceCell> table2 = {
        {"Class A", "BasketballGround", {-49.23, 43.93, -44.40, 4.73}},
        {"Class A", "GrassLand", {-70.38, 2.83, -61.42, -54.31}},
        {"Class A", "Intersection", {-71.72, -22.99, -57.51, -49.96}},
        {"Class A", "NightMall", {-61.60, -12.62, -46.53, -33.28}},
        {"Class A", "SoccerGround", {-66.36, -15.83, -59.58, -55.47}},
        {"Class B", "Circle", {-69.13, -19.28, -57.98, -52.36}},
        {"Class B", "CrossBridge", {-45.78, 0.29, -44.59, -18.44}},
        {"Class B", "Highway", {-59.94, -29.13, -55.25, -33.32}},
        {"Class C", "Classroom", {-61.67, -21.13, -85.60, -32.49}},
        {"Class C", "Elevator", {-80.74, -54.63, -79.79, -57.37}},
        {"Class C", "Hall", {-73.56, -32.06, -77.71, -51.84}},
        {"Class D", "Campus", {-64.56, -28.87, -51.61, -41.51}},
        {"Class D", "RoadByTheSea", {-64.09, -27.77, -54.15, -39.97}},
        {"Class D", "Theater", {-51.73, 6.59, -59.72, -20.14}},
    };
    static const std::vector<SequenceCell> table3 = {
        {"Class A", "BasketballGround", {-27.11, 9.04, -44.22, 44.00}},
        {"Class A", "GrassLand", {-51.61, -38.90, -58.63, -25.02}},
        {"Class A", "Intersection", {-54.54, -29.20, -56.57, -12.41}},
        {"Class A", "NightMall", {-42.19, -7.43, -50.21, 19.39}},
        {"Class A", "SoccerGround", {-44.68, -11.37, -61.46, 16.39}},
        {"Class B", "Circle", {-36.34, -26.72, -55.64, -7.53}},
        {"Class B", "CrossBridge", {-6.37, 28.70, -61.58, 71.23}},
        {"Class B", "Highway", {-40.09, -14.23, -56.91, 8.26}},
        {"Class C", "Classroom", {-39.01, 77.69, -45.06, 63.97}},
        {"Class C", "Elevator", {-41.27, 18.64, -40.16, 28.92}},
        {"Class C", "Hall", {-48.13, -4.66, -42.95, 7.47}},
        {"Class D", "Campus", {-50.31, -26.19, -52.55, 2.48}},
        {"Class D", "RoadByTheSea", {-44.76, -24.88, -54.95, -3.72}},
        {"Class D", "Theater", {-29.69, 3.31, -57.50, 33.57}},
    };
    static const std::vector<SequenceCell> table5 = {
        {"Class A", "Traffic", {-42.87, 21.60, -34.64, -20.59}},
        {"Class A", "PeopleOnStreet", {-68.40, -47.50, -39.55, -43.35}},
        {"Class B", "BasketballDrive", {-42.99, 6.66, -39.60, 11.04}},
        {"Class B", "BQTerrace", {-52.26, 22.77, -43.57, -4.68}},
        {"Class B", "ParkScene", {-32.58, 7.20, -31.24, -10.46}},
        {"Class B", "Cactus", {-44.90, 11.37, -33.61, -9.96}},
        {"Class B", "Kimono", {-48.17, -24.56, -33.90, -23.77}},
        {"Class C", "BasketballDrill", {-55.52, 69.36, -30.62, -12.61}},
        {"Class C", "BQMALL", {-54.35, -4.26, -43.18, -9.26}},
        {"Class C", "PartyScene", {-57.57, -4.86, -37.90, -25.17}},
        {"Class C", "RaceHorsesC", {-56.92, -11.62, -33.65, -3.87}},
        {"Class D", "BasketballPass", {-69.63, -42.89, -34.88, -47.06}},
        {"Class D", "BlowingBubbles", {-63.09, 11.44, -35.36, -30.03}},
        {"Class D", "BQSquare", {-74.41, -38.58, -38.13, -51.00}},
        {"Class D", "RaceHorses", {-63.22, -27.25, -28.70, -20.92}},
        {"Class E", "FourPeople", {-45.06, 60.28, -40.02, 6.77}},
        {"Class E", "Johnny", {-29.22, 168.76, -43.28, 61.84}},
        {"Class E", "KristenAndSara", {-47.38, 54.18, -41.04, 3.04}},
        {"Class F", "BasketballDrillText", {-47.95, 79.88, -31.92, -1.89}},
        {"Class F", "ChinaSpeed", {-58.66, -23.24, -48.38, -27.95}},
        {"Class F", "SlideEditing", {-34.58, 123.84, -63.34, 69.65}},
        {"Class F", "SlideShow", {55.89, 523.50, -55.06, 597.93}},
        {"UVG", "Beauty", {-33.38, -6.38, -33.21, -21.73}},
        {"UVG", "Bosphorus", {-42.27, 28.47, -36.43, -6.08}},
        {"UVG", "HoneyBee", {18.20, 191.57, -11.81, 164.84}},
        {"UVG", "Jockey", {9.08, 162.79, -33.78, 180.63}},
        {"UVG", "ShakeNDry", {-42.94, 0.06, -41.35, -7.06}},
        {"UVG", "YachtRide", {-68.34, -36.96, -39.82, -37.81}},
        {"UVG", "ReadySteadyGo", {-19.22, 25.84, -34.57, 27.96}},
    };
    static const std::vector<SequenceCell> table7 = {
        {"Class A", "BasketballGround", {-51.39, -24.56, -52.36, -19.82}},
        {"Class A", "GrassLand", {-48.17, -32.63, -60.82, -42.52}},
        {"Class A", "Intersection", {-57.68, -34.37, -60.20, -39.95}},
        {"Class A", "NightMall", {-50.08, -24.06, -52.83, -18.98}},
        {"Class A", "SoccerGround", {-45.55, -20.25, -71.18, -30.09}},
        {"Class B", "Circle", {-47.30, -37.37, -59.12, -29.25}},
        {"Class B", "CrossBridge", {-9.72, 16.35, -58.84, 69.03}},
        {"Class B", "Highway", {-44.46, -13.65, -53.16, 2.50}},
        {"Class C", "Classroom", {-37.66, 25.71, -47.93, 11.70}},
        {"Class C", "Elevator", {-47.19, -8.04, -46.90, 7.31}},
        {"Class C", "Hall", {-52.61, -14.78, -52.72, -31.71}},
        {"Class D", "Campus", {-54.58, -35.27, -53.30, -21.12}},
        {"Class D", "RoadByTheSea", {-51.46, -32.86, -51.08, -19.43}},
        {"Class D", "Theater", {-26.77, 4.85, -56.38, 31.28}},
    };
    switch (t) {
    case Table::II: return table2;
    case Table::III: return table3;
    case Table::V: return table5;
    case Table::VII: return table7;
    case Table::VIII: break;
    }
    throw Error("table VIII holds complexity rows, not BD cells");
}

const std::vector<SummaryCell>& table_summaries(Table t) {
    static const std::vector<SummaryCell> table2 = {
        {"Class A", {-63.86, -0.94, -53.89, -37.66}},
        {"Class B", {-58.29, -16.04, -52.60, -34.70}},
        {"Class C", {-71.99, -35.94, -81.03, -47.23}},
        {"Class D", {-60.13, -16.68, -55.16, -33.87}},
        {"Average", {-63.61, -15.05, -59.70, -38.26}},
    };
    static const std::vector<SummaryCell> table3 = {
        {"Class A", {-44.02, -15.57, -54.22, 8.47}},
        {"Class B", {-27.60, -4.08, -58.04, 23.99}},
        {"Class C", {-42.80, 30.56, -42.73, 33.45}},
        {"Class D", {-41.58, -15.91, -55.00, 10.78}},
        {"Average", {-39.72, -3.30, -52.74, 17.64}},
    };
    static const std::vector<SummaryCell> table5 = {
        {"Class A", {-55.63, -12.95, -37.10, -31.97}},
        {"Class B", {-44.18, 4.69, -36.38, -7.57}},
        {"Class C", {-56.09, 12.16, -36.34, -12.73}},
        {"Class D", {-67.59, -24.32, -34.27, -37.25}},
        {"Class E", {-40.55, 94.40, -41.45, 23.88}},
        {"Class F", {-21.33, 175.99, -49.68, 159.43}},
        {"UVG", {-25.55, 52.20, -32.99, 42.96}},
        {"Average (Class A-E)", {-52.81, 14.80, -37.11, -13.13}},
        {"Overall Average", {-44.42, 43.17, -38.31, 19.54}},
    };
    static const std::vector<SummaryCell> table7 = {
        {"Class A", {-50.57, -27.17, -59.48, -30.27}},
        {"Class B", {-33.83, -11.55, -57.04, 14.09}},
        {"Class C", {-45.82, 0.96, -49.18, -4.23}},
        {"Class D", {-44.27, -21.09, -53.59, -3.09}},
        {"Average", {-44.62, -16.49, -55.49, -9.36}},
    };
    switch (t) {
    case Table::II: return table2;
    case Table::III: return table3;
    case Table::V: return table5;
    case Table::VII: return table7;
    case Table::VIII: break;
    }
    throw Error("table VIII holds complexity rows, not BD summaries");
}

double lookup(Table t, const std::string& codec, const std::string& sequence) {
    int column = -1;
    for (std::size_t i = 0; i < codecs().size(); ++i)
        if (codecs()[i] == codec) column = static_cast<int>(i);
    if (column < 0) throw Error("fixture lookup: unknown codec \"" + codec + "\"");
    for (const auto& cell : table_cells(t))
        if (sequence == cell.sequence) return cell.values[column];
    throw Error("fixture lookup: table " + std::string(table_name(t)) + " has no sequence \"" +
                sequence + "\"");
}

const std::vector<ComplexityRow>& complexity_rows() {
    static const std::vector<ComplexityRow> rows = {
        {"EEV-0.1", 0.678, 5.26},
        {"EEV-0.3", 2.021, 7.17},
        {"EEV-0.4", 3.127, 23.96},
    };
    return rows;
}

double complexity_lookup(const std::string& model, const std::string& field) {
    for (const auto& row : complexity_rows()) {
        if (model == row.model) {
            if (field == "macs_per_pixel") return row.macs_per_pixel_m;
            if (field == "params") return row.params_m;
            throw Error("complexity lookup: unknown field \"" + field + "\"");
        }
    }
    throw Error("complexity lookup: no reference row for \"" + model + "\"");
}

} // namespace eev::bench::fixtures
