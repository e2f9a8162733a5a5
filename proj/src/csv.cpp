#include "mivs/csv.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "mivs/error.h"

namespace mivs {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

double parse_cell(const std::string& cell, size_t row, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError("malformed numeric cell '" + cell + "' at row " + std::to_string(row) +
                         ", column '" + column + "'");
    return v;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> values;  // per column
    std::vector<std::vector<uint8_t>> missing;
};

RawTable read_table(const std::filesystem::path& path, const std::string& missing_token) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    RawTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
    t.header = split_line(line);
    t.values.resize(t.header.size());
    t.missing.resize(t.header.size());

    size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(t.header.size()));
        for (size_t c = 0; c < cells.size(); ++c) {
            if (cells[c] == missing_token) {
                t.values[c].push_back(0.0);
                t.missing[c].push_back(1);
            } else {
                t.values[c].push_back(parse_cell(cells[c], row, t.header[c]));
                t.missing[c].push_back(0);
            }
        }
    }
    return t;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

DataMatrix load_csv(const std::filesystem::path& path, const Schema& schema,
                    const std::string& missing_token) {
    RawTable t = read_table(path, missing_token);

    std::unordered_map<std::string, size_t> pos;
    for (size_t c = 0; c < t.header.size(); ++c) {
        if (!pos.emplace(t.header[c], c).second)
            throw SchemaError("duplicate header column '" + t.header[c] + "'");
    }
    std::unordered_map<std::string, ColumnKind> kinds;
    for (const auto& cs : schema.columns) kinds[cs.name] = cs.kind;
    if (kinds.count(schema.outcome)) throw SchemaError("outcome listed as a predictor");
    if (t.header.size() != schema.columns.size() + 1)
        throw SchemaError("header has " + std::to_string(t.header.size()) + " columns, schema expects " +
                          std::to_string(schema.columns.size() + 1));
    if (!pos.count(schema.outcome)) throw SchemaError("outcome column '" + schema.outcome + "' not in header");

    std::vector<Column> cols;
    for (size_t c = 0; c < t.header.size(); ++c) {
        const auto& name = t.header[c];
        if (name == schema.outcome) continue;
        auto it = kinds.find(name);
        if (it == kinds.end()) throw SchemaError("header column '" + name + "' not in schema");
        cols.push_back(Column{name, it->second, std::move(t.values[c]), std::move(t.missing[c])});
    }
    const size_t yc = pos[schema.outcome];
    return DataMatrix(std::move(cols), std::move(t.values[yc]), std::move(t.missing[yc]), schema.outcome);
}

Schema infer_schema(const std::filesystem::path& path, const std::string& outcome,
                    const std::string& missing_token) {
    RawTable t = read_table(path, missing_token);
    Schema s;
    s.outcome = outcome;
    bool found = false;
    for (size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == outcome) {
            found = true;
            continue;
        }
        bool binary = true;
        for (size_t i = 0; i < t.values[c].size() && binary; ++i)
            if (!t.missing[c][i]) binary = t.values[c][i] == 0.0 || t.values[c][i] == 1.0;
        s.columns.push_back({t.header[c], binary ? ColumnKind::Binary : ColumnKind::Continuous});
    }
    if (!found) throw SchemaError("outcome column '" + outcome + "' not in header of '" + path.string() + "'");
    return s;
}

void save_csv(const DataMatrix& d, const std::filesystem::path& path, const std::string& missing_token) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (size_t k = 0; k < d.cols(); ++k) out << d.name(k) << ',';
    out << d.outcome_name() << '\n';
    for (size_t i = 0; i < d.rows(); ++i) {
        for (size_t k = 0; k < d.cols(); ++k) {
            out << (d.missing(i, k) ? missing_token : format_double(d.value(i, k))) << ',';
        }
        out << (d.outcome_missing(i) ? missing_token : format_double(d.outcome(i))) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace mivs
