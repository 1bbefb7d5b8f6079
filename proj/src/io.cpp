#include "qgvp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace qgvp::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("refusing to write a non-finite value");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string o = "\"";
    for (char c : s) {
        if (c == '"') o += '"';
        o += c;
    }
    return o + "\"";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool q = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (q) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                q = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            q = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string to_csv(const std::vector<std::string>& header, const std::vector<Row>& rows) {
    std::ostringstream os;
    for (size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << quote(header[k]);
    os << '\n';
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw std::invalid_argument("CSV row width does not match the header");
        for (size_t k = 0; k < r.size(); ++k) {
            if (k) os << ',';
            if (auto p = std::get_if<long>(&r[k])) os << *p;
            else if (auto d = std::get_if<double>(&r[k])) os << format_double(*d);
            else os << quote(std::get<std::string>(r[k]));
        }
        os << '\n';
    }
    return os.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f << content;
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const std::vector<Row>& rows) {
    write_atomic(path, to_csv(header, rows));
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

double CsvTable::number(size_t row, size_t col) const {
    const std::string& s = rows.at(row).at(col);
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("not a number: " + s);
    return v;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (first) {
            t.header = split_line(line);
            first = false;
        } else {
            t.rows.push_back(split_line(line));
        }
    }
    if (first) throw std::runtime_error("empty CSV file " + path.string());
    return t;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(f);
}

nlohmann::json curve_to_json(const FourierCurve& r) {
    nlohmann::json c = nlohmann::json::array();
    for (int j = 1; j <= r.max_mode(); ++j) {
        cplx v = r.coeff(j);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::invalid_argument("non-finite coefficient");
        c.push_back({j, v.real(), v.imag()});
    }
    return {{"grid_size", r.grid_size()}, {"coeffs", c}};
}

FourierCurve curve_from_json(const nlohmann::json& j) {
    int M = j.at("grid_size").get<int>();
    if (M < 4 || M % 2) throw std::invalid_argument("grid_size must be even and >= 4");
    FourierCurve r(M);
    for (const auto& e : j.at("coeffs")) {
        int k = e.at(0).get<int>();
        if (k < 1 || k > r.max_mode()) throw std::invalid_argument("curve coefficient index out of range");
        r.set(k, cplx(e.at(1).get<double>(), e.at(2).get<double>()));
    }
    return r;
}

}  // namespace qgvp::io
