#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "neatboost/learners.hpp"
#include "neatboost/neat.hpp"

namespace neatboost {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

/// Everything a run depends on. Paths and the job cap are excluded from the
/// config hash; every other field is part of it.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::filesystem::path data;
    std::filesystem::path out;
    std::size_t jobs = 1;

    std::array<double, 3> split = {251.0 / 336.0, 34.0 / 336.0, 51.0 / 336.0};
    std::size_t folds = 5;
    std::size_t smote_k = 5;
    std::size_t top_k = 1;

    NeatConfig neat;
    TrainingBudget budget;

    std::size_t synth_per_class = 100;
    double synth_separation = 4.0;

    /// Canonical `key=value` lines, sorted by key.
    std::string canonical() const;
    /// SHA-256 hex digest of canonical().
    std::string hash() const;
};

/// Values from an INI file ([run], [split], [cv], [neat], [mlp], [synth]).
void apply_ini(RunConfig& cfg, const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

/// Entry point shared by the executable and the tests.
int run_cli(const std::vector<std::string>& args);

}  // namespace neatboost
