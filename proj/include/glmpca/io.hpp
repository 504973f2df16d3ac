#pragma once

#include "glmpca/family.hpp"
#include "glmpca/model.hpp"
#include "glmpca/optimizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glmpca {

enum class MatrixFormat { matrix_market, csv };

/// Accepts "matrixmarket", "mtx", "mm" and "csv".
MatrixFormat parse_matrix_format(std::string_view name);
/// `.mtx` / `.mm` files are MatrixMarket, everything else CSV.
MatrixFormat infer_matrix_format(const std::filesystem::path& path);

/// A dense matrix with row and column labels. Rows are features and columns
/// observations when it holds data.
struct DataMatrix {
    Matrix values;
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;
};

/// Names "<prefix>1" .. "<prefix>n".
std::vector<std::string> positional_names(std::string_view prefix, Index n);

/**
 * MatrixMarket coordinate reader (`%%MatrixMarket matrix coordinate real|integer general`).
 * Entries are 1-based; absent entries are zero and duplicates are summed.
 * Rows and columns get positional names. Throws ParseError with the line number.
 */
DataMatrix parse_matrix_market(std::istream& in);

/**
 * RFC-4180 CSV reader. A header row is detected when its first record holds a
 * non-numeric field, and a row-name column when the first field of the first
 * data record is non-numeric. Throws ParseError with the line number.
 */
DataMatrix parse_csv(std::istream& in);

/// Reads a matrix file; when `family` is given, also checks every entry lies in its support.
DataMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format,
                       const std::optional<Family>& family = std::nullopt);

/// Shortest decimal form that round-trips ("%.17g").
std::string format_double(double x);

/// Writes a labeled matrix as CSV with a header row whose first cell is `corner`.
void write_csv(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& row_names,
               const std::vector<std::string>& col_names, std::string_view corner);

struct OutputLabels {
    std::vector<std::string> features;
    std::vector<std::string> observations;
    std::vector<std::string> obs_covariates;
    std::vector<std::string> feature_covariates;
};

/**
 * Writes factors.csv, loadings.csv, coef_A.csv, coef_Gamma.csv (only when
 * K_f > 0), offset.csv, trace.csv and meta.json into `dir`, creating it if
 * needed. `meta` is merged into meta.json alongside the fit summary.
 */
void write_result(const FitResult& result, const OutputLabels& labels, const nlohmann::json& meta,
                  const std::filesystem::path& dir);

} // namespace glmpca
