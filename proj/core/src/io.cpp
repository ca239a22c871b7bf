#include "orthosurv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace orthosurv {

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto end = line.find(',', start);
        out.push_back(line.substr(start, end == std::string_view::npos ? end : end - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail_row(std::size_t row, const std::string& what) {
    throw std::runtime_error("row " + std::to_string(row) + ": " + what);
}

double parse_double(std::string_view s, std::size_t row, std::string_view column) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        fail_row(row, "column " + std::string(column) + " is not a number");
    }
    return v;
}

int parse_int(std::string_view s, std::size_t row, std::string_view column) {
    s = trim(s);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        fail_row(row, "column " + std::string(column) + " is not an integer");
    }
    return v;
}

}  // namespace

Dataset read_csv_dataset(std::istream& in, std::optional<int> t_max) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset");
    const auto header = split(trim(line));
    std::size_t p = 0;
    while (p < header.size() && trim(header[p]) == "x" + std::to_string(p)) ++p;
    const std::vector<std::string_view> tail(header.begin() + static_cast<std::ptrdiff_t>(p), header.end());
    const std::vector<std::string_view> expected{"a", "t_tilde", "delta_s", "delta_g"};
    bool ok = p > 0 && tail.size() == expected.size();
    for (std::size_t k = 0; ok && k < tail.size(); ++k) ok = trim(tail[k]) == expected[k];
    if (!ok) {
        throw std::runtime_error("missing columns: expected header x0,...,x{p-1},a,t_tilde,delta_s,delta_g");
    }

    std::vector<Observation> rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split(trim(line));
        if (cells.size() != p + 4) {
            fail_row(row, "expected " + std::to_string(p + 4) + " fields, found " +
                              std::to_string(cells.size()));
        }
        Observation o;
        o.x.resize(p);
        for (std::size_t j = 0; j < p; ++j) o.x[j] = parse_double(cells[j], row, "x" + std::to_string(j));
        o.a = parse_int(cells[p], row, "a");
        o.t_tilde = parse_int(cells[p + 1], row, "t_tilde");
        o.delta_s = parse_int(cells[p + 2], row, "delta_s");
        o.delta_g = parse_int(cells[p + 3], row, "delta_g");
        rows.push_back(std::move(o));
    }
    if (rows.empty()) throw std::runtime_error("empty dataset");

    int grid = 0;
    if (t_max) {
        grid = *t_max;
    } else {
        for (const auto& o : rows) grid = std::max(grid, o.t_tilde);
    }
    Dataset d(std::move(rows), grid, p);
    const auto violations = validate_dataset(d);
    if (!violations.empty()) {
        std::string msg;
        for (const auto& v : violations) {
            if (!msg.empty()) msg += "; ";
            msg += "row " + std::to_string(v.row + 1) + ": " + v.message;
        }
        throw std::runtime_error(msg);
    }
    return d;
}

Dataset load_csv_dataset(const std::string& path, std::optional<int> t_max) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_csv_dataset(in, t_max);
}

void write_csv_dataset(std::ostream& out, const Dataset& d) {
    for (std::size_t j = 0; j < d.dim(); ++j) out << 'x' << j << ',';
    out << "a,t_tilde,delta_s,delta_g\n";
    char buf[40];
    for (const auto& o : d.rows()) {
        for (double v : o.x) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << o.a << ',' << o.t_tilde << ',' << o.delta_s << ',' << o.delta_g << '\n';
    }
}

void save_csv_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv_dataset(out, d);
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace orthosurv
