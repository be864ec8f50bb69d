#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace plid {

/// Record of one CLI invocation, written as run_manifest.json in its output directory.
struct RunManifest {
	std::string command;
	std::string config_path;
	nlohmann::json config; // resolved values
	std::uint64_t seed = 0;
	std::string started_at;
	std::string finished_at;
	std::vector<std::string> artifacts; // relative to the run directory
	std::string input_hash;             // over the input files and resolved config

	/// FNV-1a over everything except the timestamps.
	std::string content_hash() const;
	nlohmann::json to_json() const;
	static RunManifest from_json(const nlohmann::json &j);
};

inline constexpr const char *run_manifest_name = "run_manifest.json";

void write_run_manifest(const RunManifest &m, const std::filesystem::path &dir);
/// Throws ValidationError when the stored content hash does not recompute.
RunManifest read_run_manifest(const std::filesystem::path &dir);

/// Hash of every regular file below root (sorted relative paths and bytes).
std::string hash_tree(const std::filesystem::path &root);
std::string utc_timestamp();

} // namespace plid
