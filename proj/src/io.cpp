#include "glmpca/io.hpp"

#include "glmpca/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace glmpca {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::optional<double> parse_number(std::string_view field) {
    field = trim(field);
    if (field.empty()) {
        return std::nullopt;
    }
    if (field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<long long> parse_integer(std::string_view field) {
    field = trim(field);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        return std::nullopt;
    }
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line;
};

std::vector<CsvRecord> read_csv_records(std::istream& in) {
    std::vector<CsvRecord> records;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t line = 1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        CsvRecord rec{{}, line};
        std::string field;
        bool in_quotes = false;
        bool record_done = false;
        bool any_content = false;
        while (pos < text.size() && !record_done) {
            const char c = text[pos++];
            if (in_quotes) {
                if (c == '"') {
                    if (pos < text.size() && text[pos] == '"') {
                        field += '"';
                        ++pos;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') {
                        ++line;
                    }
                    field += c;
                }
                continue;
            }
            switch (c) {
            case '"':
                in_quotes = true;
                any_content = true;
                break;
            case ',':
                rec.fields.push_back(std::move(field));
                field.clear();
                any_content = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                record_done = true;
                break;
            default:
                field += c;
                any_content = true;
            }
        }
        if (in_quotes) {
            throw ParseError("unterminated quoted field", rec.line);
        }
        if (!any_content && trim(field).empty()) {
            continue; // blank line
        }
        rec.fields.push_back(std::move(field));
        records.push_back(std::move(rec));
    }
    return records;
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

} // namespace

MatrixFormat parse_matrix_format(std::string_view name) {
    const std::string n = lower(name);
    if (n == "matrixmarket" || n == "mtx" || n == "mm") {
        return MatrixFormat::matrix_market;
    }
    if (n == "csv") {
        return MatrixFormat::csv;
    }
    throw ConfigError("unknown input format '" + std::string(name) + "'");
}

MatrixFormat infer_matrix_format(const fs::path& path) {
    const std::string ext = lower(path.extension().string());
    return (ext == ".mtx" || ext == ".mm") ? MatrixFormat::matrix_market : MatrixFormat::csv;
}

std::vector<std::string> positional_names(std::string_view prefix, Index n) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 1; i <= n; ++i) {
        out.push_back(std::string(prefix) + std::to_string(i));
    }
    return out;
}

DataMatrix parse_matrix_market(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line)) {
        throw ParseError("empty MatrixMarket file", 1);
    }
    ++lineno;
    const auto banner = split_ws(line);
    if (banner.size() != 5 || lower(banner[0]) != "%%matrixmarket" || lower(banner[1]) != "matrix") {
        throw ParseError("missing '%%MatrixMarket matrix ...' banner", lineno);
    }
    if (lower(banner[2]) != "coordinate") {
        throw ParseError("only the coordinate format is supported", lineno);
    }
    const std::string field = lower(banner[3]);
    if (field != "real" && field != "integer") {
        throw ParseError("unsupported field type '" + std::string(banner[3]) + "'", lineno);
    }
    if (lower(banner[4]) != "general") {
        throw ParseError("only general (non-symmetric) matrices are supported", lineno);
    }

    long long rows = -1;
    long long cols = -1;
    long long nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '%') {
            continue;
        }
        const auto parts = split_ws(t);
        const auto r = parts.size() == 3 ? parse_integer(parts[0]) : std::nullopt;
        const auto c = parts.size() == 3 ? parse_integer(parts[1]) : std::nullopt;
        const auto z = parts.size() == 3 ? parse_integer(parts[2]) : std::nullopt;
        if (!r || !c || !z || *r < 1 || *c < 1 || *z < 0) {
            throw ParseError("expected size line 'rows cols entries'", lineno);
        }
        rows = *r;
        cols = *c;
        nnz = *z;
        break;
    }
    if (rows < 0) {
        throw ParseError("missing size line", lineno);
    }

    DataMatrix out;
    out.values = Matrix::Zero(rows, cols);
    long long seen = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '%') {
            continue;
        }
        const auto parts = split_ws(t);
        if (parts.size() != 3) {
            throw ParseError("expected entry 'row col value'", lineno);
        }
        const auto i = parse_integer(parts[0]);
        const auto j = parse_integer(parts[1]);
        const auto v = parse_number(parts[2]);
        if (!i || !j || !v) {
            throw ParseError("malformed entry", lineno);
        }
        if (*i < 1 || *i > rows || *j < 1 || *j > cols) {
            throw ParseError("entry index out of range", lineno);
        }
        if (++seen > nnz) {
            throw ParseError("more entries than declared (" + std::to_string(nnz) + ")", lineno);
        }
        out.values(*i - 1, *j - 1) += *v;
    }
    if (seen != nnz) {
        throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen), lineno);
    }
    out.row_names = positional_names("feature", rows);
    out.col_names = positional_names("obs", cols);
    return out;
}

DataMatrix parse_csv(std::istream& in) {
    const std::vector<CsvRecord> records = read_csv_records(in);
    if (records.empty()) {
        throw ParseError("empty CSV input", 1);
    }
    const bool has_header = std::any_of(records[0].fields.begin(), records[0].fields.end(),
                                        [](const std::string& f) { return !parse_number(f); });
    const std::size_t first = has_header ? 1 : 0;
    if (records.size() <= first) {
        throw ParseError("CSV has a header but no data rows", records[0].line);
    }
    const bool has_row_names = !parse_number(records[first].fields.front());
    const std::size_t width = records[first].fields.size();
    const std::size_t offset = has_row_names ? 1 : 0;
    if (width <= offset) {
        throw ParseError("CSV data row has no numeric columns", records[first].line);
    }
    const auto nrows = static_cast<Index>(records.size() - first);
    const auto ncols = static_cast<Index>(width - offset);

    DataMatrix out;
    out.values.resize(nrows, ncols);
    for (std::size_t r = first; r < records.size(); ++r) {
        const CsvRecord& rec = records[r];
        if (rec.fields.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(rec.fields.size()),
                             rec.line);
        }
        if (has_row_names) {
            out.row_names.push_back(std::string(trim(rec.fields[0])));
        }
        for (std::size_t c = offset; c < width; ++c) {
            const auto v = parse_number(rec.fields[c]);
            if (!v) {
                throw ParseError("non-numeric value '" + rec.fields[c] + "' in column " + std::to_string(c + 1),
                                 rec.line);
            }
            out.values(static_cast<Index>(r - first), static_cast<Index>(c - offset)) = *v;
        }
    }
    if (has_header) {
        const auto& header = records[0].fields;
        if (header.size() == width) {
            for (std::size_t c = offset; c < width; ++c) {
                out.col_names.push_back(std::string(trim(header[c])));
            }
        } else if (header.size() + 1 == width && has_row_names) {
            for (const auto& h : header) {
                out.col_names.push_back(std::string(trim(h)));
            }
        } else {
            throw ParseError("header has " + std::to_string(header.size()) + " fields, data rows have " +
                                 std::to_string(width),
                             records[0].line);
        }
    }
    if (!has_row_names) {
        out.row_names = positional_names("feature", nrows);
    }
    if (!has_header) {
        out.col_names = positional_names("obs", ncols);
    }
    return out;
}

DataMatrix read_matrix(const fs::path& path, MatrixFormat format, const std::optional<Family>& family) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    DataMatrix m;
    try {
        m = format == MatrixFormat::matrix_market ? parse_matrix_market(in) : parse_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    if (family) {
        validate_data(m.values, *family);
    }
    return m;
}

std::string format_double(double x) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

void write_csv(const fs::path& path, const Matrix& values, const std::vector<std::string>& row_names,
               const std::vector<std::string>& col_names, std::string_view corner) {
    if (row_names.size() != static_cast<std::size_t>(values.rows()) ||
        col_names.size() != static_cast<std::size_t>(values.cols())) {
        throw Error("label count does not match matrix shape when writing '" + path.string() + "'");
    }
    std::ofstream out = open_output(path);
    out << csv_escape(corner);
    for (const auto& name : col_names) {
        out << ',' << csv_escape(name);
    }
    out << '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        out << csv_escape(row_names[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < values.cols(); ++c) {
            out << ',' << format_double(values(r, c));
        }
        out << '\n';
    }
    finish_output(out, path);
}

void write_result(const FitResult& result, const OutputLabels& labels, const nlohmann::json& meta,
                  const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    const Index L = result.U_hat.cols();
    const auto dim_names = positional_names("dim", L);

    write_csv(dir / "factors.csv", result.U_hat, labels.observations, dim_names, "observation");
    write_csv(dir / "loadings.csv", result.V_hat, labels.features, dim_names, "feature");
    write_csv(dir / "coef_A.csv", result.A, labels.features, labels.obs_covariates, "feature");
    if (result.Gamma.cols() > 0) {
        write_csv(dir / "coef_Gamma.csv", result.Gamma, labels.observations, labels.feature_covariates,
                  "observation");
    }
    write_csv(dir / "offset.csv", result.offset, labels.observations, {"offset"}, "observation");

    {
        const fs::path path = dir / "trace.csv";
        std::ofstream out = open_output(path);
        out << "iteration,Q\n";
        for (const TracePoint& p : result.trace) {
            out << p.iteration << ',' << format_double(p.objective) << '\n';
        }
        finish_output(out, path);
    }

    nlohmann::json doc = meta;
    doc["converged"] = result.converged;
    doc["iterations"] = result.iterations_run;
    doc["initial_objective"] = result.initial_objective;
    doc["final_objective"] = result.final_objective;
    doc["objective_kind"] = "partial";
    doc["objective_note"] = "penalized log-likelihood without the data-only term c(y)";
    doc["postprocessed"] = result.postprocessed;
    doc["singular_values"] = std::vector<double>(result.singular_values.data(),
                                                 result.singular_values.data() + result.singular_values.size());
    doc["full_scoring_fallbacks"] = result.full_scoring_fallbacks;
    doc["warnings"] = result.warnings;

    const fs::path path = dir / "meta.json";
    std::ofstream out = open_output(path);
    out << doc.dump(2) << '\n';
    finish_output(out, path);
}

} // namespace glmpca
