#pragma once

#include "glmpca/family.hpp"
#include "glmpca/io.hpp"
#include "glmpca/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace glmpca {

/// Everything `glmpca fit` needs, after flag parsing.
struct RunConfig {
    std::filesystem::path input_path;
    std::optional<MatrixFormat> input_format; // inferred from the extension when unset
    FamilyKind family = FamilyKind::poisson;
    Link link = Link::canonical;
    std::optional<double> dispersion;
    Index dims = 2;
    std::optional<std::filesystem::path> obs_covariates_path;
    std::optional<std::filesystem::path> feature_covariates_path;
    std::string offset = "auto"; // none | auto | file:<path>
    bool intercept = true;
    double penalty_u = 1e-4;
    double penalty_v = 1e-4;
    double penalty_coef = 0.0;
    FitConfig fit;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "glmpca_out";

    /// Throws ConfigError naming the offending flag.
    void validate() const;
    nlohmann::json to_json() const;
};

enum ExitCode : int { kExitConverged = 0, kExitError = 1, kExitNotConverged = 2 };

/// Loads inputs, fits, writes outputs. Returns an ExitCode; errors go to stderr.
int run_fit(const RunConfig& config);

/// Entry point of the `glmpca` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

} // namespace glmpca
