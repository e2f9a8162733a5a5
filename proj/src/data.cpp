#include "mivs/data.h"

#include <cmath>
#include <limits>

#include "mivs/error.h"

namespace mivs {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_binary_value(double v) { return v == 0.0 || v == 1.0; }
} // namespace

const char* to_string(ColumnKind kind) {
    return kind == ColumnKind::Binary ? "binary" : "continuous";
}

ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "binary") return ColumnKind::Binary;
    if (s == "continuous") return ColumnKind::Continuous;
    throw SpecError("unknown column kind '" + s + "'");
}

DataMatrix::DataMatrix(std::vector<Column> columns, std::vector<double> outcome,
                       std::vector<uint8_t> outcome_missing, std::string outcome_name)
    : columns_(std::move(columns)),
      outcome_(std::move(outcome)),
      outcome_missing_(std::move(outcome_missing)),
      outcome_name_(std::move(outcome_name)) {
    const size_t n = outcome_.size();
    if (n == 0) throw SchemaError("data matrix needs at least one row");
    if (columns_.empty()) throw SchemaError("data matrix needs at least one column");
    if (outcome_missing_.empty()) outcome_missing_.assign(n, 0);
    if (outcome_missing_.size() != n) throw SchemaError("outcome mask length mismatch");

    for (auto& c : columns_) {
        if (c.missing.empty()) c.missing.assign(n, 0);
        if (c.values.size() != n || c.missing.size() != n)
            throw SchemaError("column '" + c.name + "' has " + std::to_string(c.values.size()) +
                              " values, expected " + std::to_string(n));
        for (size_t i = 0; i < n; ++i) {
            if (c.missing[i]) {
                c.values[i] = kNaN;
            } else if (c.kind == ColumnKind::Binary && !is_binary_value(c.values[i])) {
                throw SchemaError("binary column '" + c.name + "' has value " +
                                  std::to_string(c.values[i]) + " at row " + std::to_string(i + 1));
            }
        }
    }
    for (size_t i = 0; i < n; ++i) {
        if (outcome_missing_[i]) {
            outcome_[i] = kNaN;
        } else if (!is_binary_value(outcome_[i])) {
            throw SchemaError("outcome '" + outcome_name_ + "' has value " +
                              std::to_string(outcome_[i]) + " at row " + std::to_string(i + 1));
        }
    }
}

std::optional<size_t> DataMatrix::find(const std::string& name) const {
    for (size_t k = 0; k < columns_.size(); ++k)
        if (columns_[k].name == name) return k;
    return std::nullopt;
}

std::vector<std::string> DataMatrix::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

size_t DataMatrix::missing_count(size_t k) const {
    size_t m = 0;
    for (auto v : columns_[k].missing) m += v;
    return m;
}

size_t DataMatrix::outcome_missing_count() const {
    size_t m = 0;
    for (auto v : outcome_missing_) m += v;
    return m;
}

size_t DataMatrix::masked_cells() const {
    size_t m = outcome_missing_count();
    for (size_t k = 0; k < cols(); ++k) m += missing_count(k);
    return m;
}

bool DataMatrix::row_complete(size_t i) const {
    if (outcome_missing_[i]) return false;
    for (const auto& c : columns_)
        if (c.missing[i]) return false;
    return true;
}

double DataMatrix::incomplete_row_fraction() const {
    size_t bad = 0;
    for (size_t i = 0; i < rows(); ++i) bad += !row_complete(i);
    return static_cast<double>(bad) / static_cast<double>(rows());
}

DataMatrix DataMatrix::select_rows(std::span<const size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
        Column out{c.name, c.kind, {}, {}};
        out.values.reserve(rows.size());
        out.missing.reserve(rows.size());
        for (size_t r : rows) {
            out.values.push_back(c.values[r]);
            out.missing.push_back(c.missing[r]);
        }
        cols.push_back(std::move(out));
    }
    std::vector<double> y;
    std::vector<uint8_t> ym;
    y.reserve(rows.size());
    ym.reserve(rows.size());
    for (size_t r : rows) {
        y.push_back(outcome_[r]);
        ym.push_back(outcome_missing_[r]);
    }
    return DataMatrix(std::move(cols), std::move(y), std::move(ym), outcome_name_);
}

DataMatrix DataMatrix::select_columns(std::span<const size_t> cols) const {
    std::vector<Column> out;
    out.reserve(cols.size());
    for (size_t k : cols) out.push_back(columns_.at(k));
    return DataMatrix(std::move(out), outcome_, outcome_missing_, outcome_name_);
}

DataMatrix DataMatrix::complete_cases() const {
    std::vector<size_t> keep;
    for (size_t i = 0; i < rows(); ++i)
        if (row_complete(i)) keep.push_back(i);
    if (keep.empty()) throw SpecError("no complete cases");
    return select_rows(keep);
}

Dataset Dataset::subset_columns(std::span<const size_t> cols) const {
    Dataset out;
    out.X.resize(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) {
        out.X.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
        if (!names.empty()) out.names.push_back(names[cols[j]]);
    }
    out.y = y;
    return out;
}

Dataset Dataset::subset_rows(std::span<const size_t> rows) const {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    out.y.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
        out.y[i] = y[rows[i]];
    }
    out.names = names;
    return out;
}

Dataset to_dataset(const DataMatrix& d) {
    if (!d.complete()) throw SpecError("learner input has masked cells");
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(d.cols()));
    for (size_t k = 0; k < d.cols(); ++k) {
        const auto& v = d.column(k).values;
        for (size_t i = 0; i < d.rows(); ++i)
            out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i];
    }
    out.y = d.outcome();
    out.names = d.names();
    return out;
}

TransformSpec& TransformSpec::square(const std::string& x) {
    derived.push_back({x + "^2", TransformOp::Square, {x}});
    return *this;
}

TransformSpec& TransformSpec::cube(const std::string& x) {
    derived.push_back({x + "^3", TransformOp::Cube, {x}});
    return *this;
}

TransformSpec& TransformSpec::exp(const std::string& x) {
    derived.push_back({"exp(" + x + ")", TransformOp::Exp, {x}});
    return *this;
}

TransformSpec& TransformSpec::product(const std::string& a, const std::string& b) {
    derived.push_back({a + "*" + b, TransformOp::Product, {a, b}});
    return *this;
}

const char* to_string(TransformOp op) {
    switch (op) {
        case TransformOp::Square: return "square";
        case TransformOp::Cube: return "cube";
        case TransformOp::Exp: return "exp";
        case TransformOp::Product: return "product";
    }
    return "unknown";
}

TransformOp transform_op_from_string(const std::string& s) {
    if (s == "square") return TransformOp::Square;
    if (s == "cube") return TransformOp::Cube;
    if (s == "exp") return TransformOp::Exp;
    if (s == "product") return TransformOp::Product;
    throw SpecError("unknown transform op '" + s + "'");
}

DataMatrix apply_transforms(const DataMatrix& d, const TransformSpec& t) {
    std::vector<Column> cols = d.columns();
    const size_t n = d.rows();
    for (const auto& dc : t.derived) {
        const size_t arity = dc.op == TransformOp::Product ? 2 : 1;
        if (dc.inputs.size() != arity)
            throw SpecError("derived column '" + dc.name + "' expects " + std::to_string(arity) +
                            " input(s)");
        std::vector<size_t> idx;
        bool all_binary = true;
        for (const auto& in : dc.inputs) {
            auto k = d.find(in);
            if (!k) throw SpecError("derived column '" + dc.name + "' references unknown column '" + in + "'");
            idx.push_back(*k);
            all_binary = all_binary && d.kind(*k) == ColumnKind::Binary;
        }

        Column out{dc.name, ColumnKind::Continuous, std::vector<double>(n), std::vector<uint8_t>(n, 0)};
        if (all_binary && dc.op != TransformOp::Exp) out.kind = ColumnKind::Binary;
        for (size_t i = 0; i < n; ++i) {
            bool miss = false;
            for (size_t k : idx) miss = miss || d.missing(i, k);
            if (miss) {
                out.missing[i] = 1;
                continue;
            }
            const double a = d.value(i, idx[0]);
            switch (dc.op) {
                case TransformOp::Square: out.values[i] = a * a; break;
                case TransformOp::Cube: out.values[i] = a * a * a; break;
                case TransformOp::Exp: out.values[i] = std::exp(a); break;
                case TransformOp::Product: out.values[i] = a * d.value(i, idx[1]); break;
            }
        }
        cols.push_back(std::move(out));
    }
    return DataMatrix(std::move(cols), d.outcome(), d.outcome_mask(), d.outcome_name());
}

} // namespace mivs
