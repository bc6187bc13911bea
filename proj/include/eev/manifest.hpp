#pragma once

// Benchmark manifest: the list of sequences with class labels. JSON is the
// primary format; a small TOML subset ([[sequence]] tables with scalar keys)
// is accepted as well.

#include <string>
#include <vector>

#include "eev/video_io.hpp"

namespace eev::bench {

struct SequenceSpec {
    std::string name;
    std::string path;
    VideoFormat format = VideoFormat::raw_rgb24;
    int width = 0;
    int height = 0;
    int frames = 0;
    std::string class_label;
    double fps = 30.0;
};

struct Manifest {
    std::vector<SequenceSpec> sequences;
};

Manifest parse_manifest_json(const std::string& text);
Manifest parse_manifest_toml(const std::string& text);
// dispatches on extension (.json / .toml), defaulting to JSON
Manifest load_manifest(const std::string& path);

} // namespace eev::bench
