#pragma once

#include "usemention/corpus.hpp"
#include "usemention/modelio.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace usemention {

/// Values from the --config file; command-line flags override them.
struct RunConfig
{
    std::map<Subtask, std::filesystem::path> corpora;
    std::map<std::string, BackendConfig> backends;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<int> resamples;
    std::optional<double> level;
};

/// Replaces ${NAME} with the environment value; unset variables are an error.
std::string expand_env(const std::string& value);

/// INI-style file: a [run] section and one [backend.NAME] section per backend.
RunConfig load_run_config(const std::filesystem::path& path);

/// Exit codes: 0 success, 1 operational failure, 2 data-quality warnings.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace usemention
