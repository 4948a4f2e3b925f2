#include "convmf/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace convmf {

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input for hashing: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64({buf, static_cast<std::size_t>(in.gcount())}, h);
    if (in.bad()) throw IoError("I/O failure while hashing: " + path);
    return h;
}

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::json j;
    j["command"] = manifest.command;
    j["artifact_version"] = kArtifactVersion;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config_json.empty() ? nlohmann::json(nullptr)
                                               : nlohmann::json::parse(manifest.config_json);
    nlohmann::json inputs;
    for (const auto& [path, hash] : manifest.input_hashes) inputs[path] = hash;
    j["input_hashes"] = std::move(inputs);
    nlohmann::json outputs;
    for (const auto& [name, path] : manifest.outputs) outputs[name] = path;
    j["outputs"] = std::move(outputs);
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / kManifestFileName;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << manifest_to_json(manifest);
    if (!out) throw IoError("failed writing manifest: " + path.string());
}

}  // namespace convmf
