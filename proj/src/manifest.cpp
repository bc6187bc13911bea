#include "eev/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace eev::bench {

namespace {

void validate_spec(const SequenceSpec& s) {
    if (s.name.empty()) throw FormatError("manifest: sequence without a name");
    if (s.path.empty()) throw FormatError("manifest: sequence \"" + s.name + "\" has no path");
    if (s.frames <= 0)
        throw FormatError("manifest: sequence \"" + s.name + "\" needs a positive frame count");
    if (s.format != VideoFormat::image_sequence && (s.width <= 0 || s.height <= 0))
        throw FormatError("manifest: sequence \"" + s.name + "\" needs width and height");
}

} // namespace

Manifest parse_manifest_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest json: ") + e.what());
    }
    if (!j.contains("sequences") || !j["sequences"].is_array())
        throw FormatError("manifest json: missing \"sequences\" array");
    Manifest m;
    for (const auto& entry : j["sequences"]) {
        SequenceSpec s;
        s.name = entry.value("name", "");
        s.path = entry.value("path", "");
        s.format = format_from_name(entry.value("format", "raw-rgb24"));
        s.width = entry.value("width", 0);
        s.height = entry.value("height", 0);
        s.frames = entry.value("frames", 0);
        s.class_label = entry.value("class", "");
        s.fps = entry.value("fps", 30.0);
        validate_spec(s);
        m.sequences.push_back(std::move(s));
    }
    return m;
}

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

Manifest parse_manifest_toml(const std::string& text) {
    Manifest m;
    SequenceSpec* current = nullptr;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip(raw);
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = strip(line.substr(0, hash));
        if (line.empty()) continue;
        if (line == "[[sequence]]") {
            if (current) validate_spec(*current);
            m.sequences.emplace_back();
            current = &m.sequences.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || !current)
            throw FormatError("manifest toml: line " + std::to_string(line_no) +
                              ": expected [[sequence]] or key = value");
        const std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key == "name") current->name = value;
        else if (key == "path") current->path = value;
        else if (key == "format") current->format = format_from_name(value);
        else if (key == "width") current->width = std::stoi(value);
        else if (key == "height") current->height = std::stoi(value);
        else if (key == "frames") current->frames = std::stoi(value);
        else if (key == "class") current->class_label = value;
        else if (key == "fps") current->fps = std::stod(value);
        else
            throw FormatError("manifest toml: line " + std::to_string(line_no) +
                              ": unknown key \"" + key + "\"");
    }
    if (current) validate_spec(*current);
    if (m.sequences.empty()) throw FormatError("manifest toml: no [[sequence]] tables");
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.size() > 5 && path.substr(path.size() - 5) == ".toml")
        return parse_manifest_toml(buf.str());
    return parse_manifest_json(buf.str());
}

} // namespace eev::bench
