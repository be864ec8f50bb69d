#include "plid/run_manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "plid/errors.hpp"
#include "plid/rng.hpp"

namespace plid {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json hashed_fields(const RunManifest &m)
{
	return json{{"command", m.command}, {"config_path", m.config_path}, {"config", m.config},
	            {"seed", m.seed},       {"artifacts", m.artifacts},     {"input_hash", m.input_hash}};
}

} // namespace

std::string RunManifest::content_hash() const { return hex64(fnv1a64(hashed_fields(*this).dump())); }

json RunManifest::to_json() const
{
	json j = hashed_fields(*this);
	j["started_at"] = started_at;
	j["finished_at"] = finished_at;
	j["content_hash"] = content_hash();
	return j;
}

RunManifest RunManifest::from_json(const json &j)
{
	try {
		RunManifest m;
		m.command = j.at("command").get<std::string>();
		m.config_path = j.at("config_path").get<std::string>();
		m.config = j.at("config");
		m.seed = j.at("seed").get<std::uint64_t>();
		m.started_at = j.at("started_at").get<std::string>();
		m.finished_at = j.at("finished_at").get<std::string>();
		m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
		m.input_hash = j.at("input_hash").get<std::string>();
		if (m.content_hash() != j.at("content_hash").get<std::string>())
			throw ValidationError("run manifest content hash mismatch");
		return m;
	} catch (const json::exception &e) {
		throw ValidationError(std::string("malformed run manifest: ") + e.what());
	}
}

void write_run_manifest(const RunManifest &m, const fs::path &dir)
{
	fs::create_directories(dir);
	std::ofstream os(dir / run_manifest_name, std::ios::binary);
	if (!os)
		throw Error("cannot write " + (dir / run_manifest_name).string());
	os << m.to_json().dump(2) << '\n';
}

RunManifest read_run_manifest(const fs::path &dir)
{
	std::ifstream is(dir / run_manifest_name);
	if (!is)
		throw LoadError("missing file: " + (dir / run_manifest_name).string());
	try {
		return RunManifest::from_json(json::parse(is));
	} catch (const json::parse_error &e) {
		throw ValidationError(std::string("malformed run manifest: ") + e.what());
	}
}

std::string hash_tree(const fs::path &root)
{
	std::vector<fs::path> files;
	if (fs::is_regular_file(root))
		files.push_back(root);
	else if (fs::is_directory(root))
		for (const auto &e : fs::recursive_directory_iterator(root))
			if (e.is_regular_file() && e.path().filename() != run_manifest_name)
				files.push_back(e.path());
	std::sort(files.begin(), files.end());
	std::uint64_t h = fnv1a64("");
	for (const auto &f : files) {
		std::ifstream is(f, std::ios::binary);
		std::stringstream ss;
		ss << is.rdbuf();
		h = fnv1a64(fs::relative(f, fs::is_directory(root) ? root : root.parent_path()).generic_string(), h);
		h = fnv1a64(ss.str(), h);
	}
	return hex64(h);
}

std::string utc_timestamp()
{
	const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
	std::tm tm{};
	gmtime_r(&t, &tm);
	char buf[32];
	std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

} // namespace plid
