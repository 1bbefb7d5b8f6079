#pragma once

#include "qgvp/fourier.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace qgvp::io {

using Cell = std::variant<long, double, std::string>;
using Row = std::vector<Cell>;

// Doubles as %.16e (17 significant digits); non-finite values are rejected.
std::string format_double(double v);
std::string to_csv(const std::vector<std::string>& header, const std::vector<Row>& rows);

// Write via a temporary file in the same directory followed by rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<Row>& rows);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    double number(size_t row, size_t col) const;
};
CsvTable read_csv(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// {"grid_size": M, "coeffs": [[j, re, im], ...]} for j >= 1
nlohmann::json curve_to_json(const FourierCurve& r);
FourierCurve curve_from_json(const nlohmann::json& j);

}  // namespace qgvp::io
