#include "pgee/io.hpp"

#include "pgee/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string_view>

namespace pgee {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw InputError("line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view field, int line, const std::string& column) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        fail(line, "column " + column + " is not a number: '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) fail(line, "column " + column + " is not finite");
    return value;
}

int parse_int(std::string_view field, int line, const std::string& column) {
    field = trim(field);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        fail(line, "column " + column + " is not an integer: '" + std::string(field) + "'");
    }
    return value;
}

struct PendingUnit {
    int first_line = 0;
    std::map<int, std::pair<double, VectorXd>> rows;  // k -> (y, x)
};

}  // namespace

Dataset read_long_csv(std::istream& in) {
    std::string line;
    int line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (!trim(header_line).empty()) break;
    }
    if (trim(header_line).empty()) throw InputError("CSV input is empty");
    header = split_fields(header_line);
    if (header.size() < 4) fail(line_no, "header needs unit_id,k,y and at least one x column");
    const char* fixed[] = {"unit_id", "k", "y"};
    for (int c = 0; c < 3; ++c) {
        if (trim(header[static_cast<size_t>(c)]) != fixed[c]) {
            fail(line_no, std::string("expected column '") + fixed[c] + "' in header");
        }
    }
    const int p = static_cast<int>(header.size()) - 3;
    for (int j = 0; j < p; ++j) {
        const std::string want = "x" + std::to_string(j + 1);
        if (trim(header[static_cast<size_t>(j + 3)]) != want) {
            fail(line_no, "expected column '" + want + "' in header");
        }
    }

    std::vector<int> order;
    std::map<int, PendingUnit> units;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(fields.size()));
        }
        const int id = parse_int(fields[0], line_no, "unit_id");
        const int k = parse_int(fields[1], line_no, "k");
        if (k < 1) fail(line_no, "measurement index k must be >= 1");
        const double y = parse_double(fields[2], line_no, "y");
        VectorXd x(p);
        for (int j = 0; j < p; ++j) {
            x(j) = parse_double(fields[static_cast<size_t>(j + 3)], line_no,
                                "x" + std::to_string(j + 1));
        }
        auto [it, fresh] = units.try_emplace(id);
        if (fresh) {
            it->second.first_line = line_no;
            order.push_back(id);
        }
        if (!it->second.rows.emplace(k, std::make_pair(y, std::move(x))).second) {
            fail(line_no, "duplicate row for unit " + std::to_string(id) + ", k = " +
                              std::to_string(k));
        }
    }
    if (order.empty()) throw InputError("CSV input has no data rows");

    int l = 0;
    std::vector<ObservationBlock> blocks;
    blocks.reserve(order.size());
    for (int id : order) {
        const auto& unit = units.at(id);
        const int lu = static_cast<int>(unit.rows.size());
        if (l == 0) l = lu;
        if (lu != l || unit.rows.rbegin()->first != l) {
            fail(unit.first_line, "unit " + std::to_string(id) + " does not have measurements k = 1.." +
                                      std::to_string(l));
        }
        VectorXd y(l);
        MatrixXd x(p, l);
        for (const auto& [k, row] : unit.rows) {
            y(k - 1) = row.first;
            x.col(k - 1) = row.second;
        }
        blocks.emplace_back(std::move(y), std::move(x), id);
    }
    return Dataset(std::move(blocks));
}

Dataset read_long_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_long_csv(in);
}

void write_long_csv(const Dataset& data, std::ostream& out) {
    out << "unit_id,k,y";
    for (int j = 0; j < data.p(); ++j) out << ",x" << (j + 1);
    out << '\n' << std::setprecision(17);
    for (const auto& block : data.blocks()) {
        for (int k = 0; k < block.l(); ++k) {
            out << block.unit_id << ',' << (k + 1) << ',' << block.y(k);
            for (int j = 0; j < block.p(); ++j) out << ',' << block.x(j, k);
            out << '\n';
        }
    }
}

void write_long_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_long_csv(data, out);
}

}  // namespace pgee
