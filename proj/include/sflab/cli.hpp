#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sflab/config.hpp"
#include "sflab/experiments.hpp"

namespace sflab::cli {

inline constexpr const char* kVersion = "0.1.0";

struct Artifacts {
    std::string trajectory_csv;
    std::vector<std::pair<std::string, std::string>> summary;
    std::map<std::string, std::string> files;  // extra files in the run directory
    std::vector<Checkpoint> checkpoints;
    bool failed = false;
    std::string failure;
};

const std::vector<std::string>& subcommands();

// built-in defaults with the subcommand's overrides
Config defaults_for(const std::string& sub);

// throws ConfigError naming the first invalid key
void validate(const std::string& sub, const Config& cfg);

// runs the experiment in memory
Artifacts execute(const std::string& sub, const Config& cfg);

std::filesystem::path runs_root();
std::filesystem::path run_directory(const std::string& sub, const Config& cfg);

std::string manifest_text(const std::string& sub, const Config& cfg, const std::string& started,
                          const std::filesystem::path& dir);

// manifest, run, artifacts; returns the exit code
int run_to_directory(const std::string& sub, const Config& cfg, std::ostream& out, std::ostream& err);

int replay(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace sflab::cli
