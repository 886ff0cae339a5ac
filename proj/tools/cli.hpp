#pragma once
// Command-line front end: config resolution, run directories and dispatch.
//
// Exit codes: 0 success, 1 runtime failure (diagnostics written to the run
// directory), 2 usage or configuration error.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "feasc/config_json.hpp"

namespace feasc::cli {

inline constexpr const char* kOutputRootEnv = "FEASC_OUTPUT_ROOT";

/// Bad flag, missing or malformed config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SHA-1 of "blob <size>\0<content>", as computed by git for file contents.
std::string git_blob_sha1(const std::string& content);

/// $FEASC_OUTPUT_ROOT if set and non-empty, else "runs".
std::string default_output_root();

/// Reads a JSON object from a config file; throws ConfigError naming the path.
Json read_config_file(const std::string& path);

struct RunManifest {
  std::string command;
  Json config;              // resolved snapshot, as written to config.json
  std::string config_sha1;  // git_blob_sha1 of config.json
  std::string output_dir;
  std::string started_at, finished_at;  // UTC, ISO 8601
  std::string status;                   // running, ok or failed
  std::string error;
  std::string diagnostics;
  Json results = Json::object();

  std::string to_json() const;
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace feasc::cli
