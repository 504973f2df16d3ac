#include "glmpca/cli.hpp"

#include "glmpca/errors.hpp"
#include "glmpca/kernels.hpp"
#include "glmpca/model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace glmpca {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (input_path.empty()) {
        throw ConfigError("--input is required");
    }
    if (dims < 1) {
        throw ConfigError("--dims must be >= 1");
    }
    if (family == FamilyKind::negative_binomial && !dispersion) {
        throw ConfigError("--dispersion is required when --family is negative_binomial");
    }
    if (family != FamilyKind::negative_binomial && dispersion) {
        throw ConfigError("--dispersion only applies to --family negative_binomial");
    }
    if (dispersion && !(*dispersion > 0.0 && std::isfinite(*dispersion))) {
        throw ConfigError("--dispersion must be a finite positive number");
    }
    if (offset != "none" && offset != "auto" && offset.rfind("file:", 0) != 0) {
        throw ConfigError("--offset must be 'none', 'auto' or 'file:<path>'");
    }
    for (double p : {penalty_u, penalty_v, penalty_coef}) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw ConfigError("penalties must be finite and non-negative");
        }
    }
    fit.validate();
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["input"] = input_path.generic_string();
    j["input_format"] = input_format ? (*input_format == MatrixFormat::csv ? "csv" : "matrixmarket") : "auto";
    j["family"] = std::string(to_string(family));
    j["link"] = std::string(to_string(link));
    j["dispersion"] = dispersion ? nlohmann::json(*dispersion) : nlohmann::json(nullptr);
    j["dims"] = dims;
    j["obs_covariates"] = obs_covariates_path ? nlohmann::json(obs_covariates_path->generic_string()) : nullptr;
    j["feature_covariates"] =
        feature_covariates_path ? nlohmann::json(feature_covariates_path->generic_string()) : nullptr;
    j["offset"] = offset;
    j["intercept"] = intercept;
    j["penalty_u"] = penalty_u;
    j["penalty_v"] = penalty_v;
    j["penalty_coef"] = penalty_coef;
    j["max_iters"] = fit.max_iters;
    j["tol"] = fit.tol;
    j["damping"] = fit.damping;
    j["balance"] = fit.balance;
    j["full_scoring_A"] = fit.full_scoring_A;
    j["trace_every"] = fit.trace_every;
    j["seed"] = seed;
    j["output_dir"] = output_dir.generic_string();
    return j;
}

namespace {

DataMatrix read_covariates(const fs::path& path) {
    return read_matrix(path, infer_matrix_format(path));
}

OffsetPolicy offset_policy(const RunConfig& cfg, Index N) {
    if (cfg.offset == "none") {
        return OffsetPolicy::none();
    }
    if (cfg.offset == "auto") {
        return OffsetPolicy::automatic();
    }
    const fs::path path = cfg.offset.substr(5);
    const DataMatrix m = read_matrix(path, infer_matrix_format(path));
    if (m.values.cols() == 1 && m.values.rows() == N) {
        return OffsetPolicy::given(m.values.col(0));
    }
    if (m.values.rows() == 1 && m.values.cols() == N) {
        return OffsetPolicy::given(m.values.row(0).transpose());
    }
    throw ConfigError("offset file '" + path.string() + "' must hold " + std::to_string(N) + " values in one column");
}

} // namespace

int run_fit(const RunConfig& cfg) {
    try {
        cfg.validate();
        const Family family(cfg.family, cfg.link, cfg.dispersion.value_or(1.0));
        const MatrixFormat format = cfg.input_format.value_or(infer_matrix_format(cfg.input_path));
        DataMatrix data = read_matrix(cfg.input_path, format, family);
        const Index J = data.values.rows();
        const Index N = data.values.cols();

        ModelOptions opts;
        opts.latent_dims = cfg.dims;
        opts.intercept = cfg.intercept;
        opts.seed = cfg.seed;
        opts.penalties.latent_u = Vector::Constant(1, cfg.penalty_u);
        opts.penalties.latent_v = Vector::Constant(1, cfg.penalty_v);
        opts.penalties.coefficients = cfg.penalty_coef;
        opts.offset = offset_policy(cfg, N);

        OutputLabels labels;
        labels.features = data.row_names;
        labels.observations = data.col_names;
        if (cfg.obs_covariates_path) {
            DataMatrix x = read_covariates(*cfg.obs_covariates_path);
            opts.obs_covariates = std::move(x.values);
            labels.obs_covariates = std::move(x.col_names);
        }
        if (cfg.feature_covariates_path) {
            DataMatrix z = read_covariates(*cfg.feature_covariates_path);
            opts.feature_covariates = std::move(z.values);
            labels.feature_covariates = std::move(z.col_names);
        }

        ModelState state = build_model(std::move(data.values), family, opts);
        if (state.dims.obs_covariates > static_cast<Index>(labels.obs_covariates.size())) {
            labels.obs_covariates.insert(labels.obs_covariates.begin(), "intercept");
        }

        const FitResult result = fit(state, cfg.fit);

        nlohmann::json meta;
        meta["config"] = cfg.to_json();
        meta["dimensions"] = {{"features", J},
                              {"observations", N},
                              {"obs_covariates", state.dims.obs_covariates},
                              {"feature_covariates", state.dims.feature_covariates},
                              {"latent", state.dims.latent}};
        meta["kernel_backend"] = std::string(kernels::to_string(kernels::active().backend));
        write_result(result, labels, meta, cfg.output_dir);

        for (const auto& w : result.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        if (!result.converged) {
            std::cerr << "glmpca: did not converge within " << cfg.fit.max_iters << " iterations\n";
            return kExitNotConverged;
        }
        return kExitConverged;
    } catch (const std::exception& e) {
        std::cerr << "glmpca: error: " << e.what() << '\n';
        return kExitError;
    }
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"GLM-PCA: dimension reduction for exponential-family data", "glmpca"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string format;
    std::string family = "poisson";
    std::string link = "canonical";
    double dispersion = 0.0;
    bool no_intercept = false;
    bool no_damping = false;
    bool no_balance = false;

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a GLM-PCA model and write factors, loadings and coefficients");
    fit_cmd->add_option("--input", cfg.input_path, "Data matrix, features in rows (MatrixMarket or CSV)")->required();
    fit_cmd->add_option("--format", format, "Input format: matrixmarket | csv (default: from extension)");
    fit_cmd->add_option("--family", family, "gaussian | poisson | bernoulli | negative_binomial")
        ->capture_default_str();
    fit_cmd->add_option("--link", link, "canonical | identity | log | logit")->capture_default_str();
    auto* disp_opt = fit_cmd->add_option("--dispersion", dispersion, "Negative binomial shape (required for NB)");
    fit_cmd->add_option("--dims", cfg.dims, "Number of latent dimensions L")->required();
    fit_cmd->add_option("--obs-covariates", cfg.obs_covariates_path, "Observation covariates X (N rows)");
    fit_cmd->add_option("--feature-covariates", cfg.feature_covariates_path, "Feature covariates Z (J rows)");
    fit_cmd->add_option("--offset", cfg.offset, "none | auto | file:<path>")->capture_default_str();
    fit_cmd->add_flag("--no-intercept", no_intercept, "Do not add feature intercepts");
    fit_cmd->add_option("--penalty-u", cfg.penalty_u, "Ridge penalty on latent factors")->capture_default_str();
    fit_cmd->add_option("--penalty-v", cfg.penalty_v, "Ridge penalty on latent loadings")->capture_default_str();
    fit_cmd->add_option("--penalty-coef", cfg.penalty_coef, "Ridge penalty on A and Gamma")->capture_default_str();
    fit_cmd->add_option("--max-iters", cfg.fit.max_iters, "Maximum number of sweeps")->capture_default_str();
    fit_cmd->add_option("--tol", cfg.fit.tol, "Relative objective change for convergence")->capture_default_str();
    fit_cmd->add_flag("--no-damping", no_damping, "Accept every sweep without step halving");
    fit_cmd->add_flag("--no-balance", no_balance, "Skip the latent rebalancing after each sweep");
    fit_cmd->add_flag("--full-scoring-A", cfg.fit.full_scoring_A, "Full Fisher scoring for A");
    fit_cmd->add_option("--trace-every", cfg.fit.trace_every, "Record Q every n sweeps")->capture_default_str();
    fit_cmd->add_option("--seed", cfg.seed, "Seed for the initial latent factors")->capture_default_str();
    fit_cmd->add_option("--output-dir", cfg.output_dir, "Directory for results")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "glmpca: error: " << e.what() << '\n';
        return kExitError;
    }

    try {
        if (!format.empty()) {
            cfg.input_format = parse_matrix_format(format);
        }
        cfg.family = parse_family_kind(family);
        cfg.link = parse_link(link);
        if (disp_opt->count() > 0) {
            cfg.dispersion = dispersion;
        }
    } catch (const std::exception& e) {
        std::cerr << "glmpca: error: " << e.what() << '\n';
        return kExitError;
    }
    cfg.intercept = !no_intercept;
    cfg.fit.damping = !no_damping;
    cfg.fit.balance = !no_balance;
    return run_fit(cfg);
}

} // namespace glmpca
