#pragma once

#include <map>
#include <string>

#include "convmf/common.hpp"

namespace convmf {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kManifestFileName = "run_manifest.json";

// One manifest per output directory, written after inputs are validated and
// hashed but before any other output.
struct RunManifest {
    std::string command;
    std::string config_json;  // resolved config with per-field provenance
    std::map<std::string, std::string> input_hashes;  // path -> fnv1a64 hex
    std::uint64_t seed = 0;
    std::map<std::string, std::string> outputs;  // logical name -> path
};

std::uint64_t hash_file(const std::string& path);

std::string manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& out_dir);

}  // namespace convmf
