#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mivs {

enum class ColumnKind { Continuous, Binary };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<double> values;
    std::vector<uint8_t> missing;  // 1 = masked
};

// n x K covariates plus a binary outcome, each cell with a missingness flag.
// Masked cells hold NaN; only the masks are consulted. Immutable once built.
class DataMatrix {
public:
    DataMatrix() = default;

    // Validates shapes and invariants, and overwrites masked cells with NaN.
    // Throws SchemaError on a non-{0,1} observed binary cell or outcome.
    DataMatrix(std::vector<Column> columns, std::vector<double> outcome,
               std::vector<uint8_t> outcome_missing, std::string outcome_name = "y");

    size_t rows() const { return outcome_.size(); }
    size_t cols() const { return columns_.size(); }

    const Column& column(size_t k) const { return columns_[k]; }
    const std::vector<Column>& columns() const { return columns_; }
    const std::string& name(size_t k) const { return columns_[k].name; }
    ColumnKind kind(size_t k) const { return columns_[k].kind; }
    const std::string& outcome_name() const { return outcome_name_; }

    double value(size_t i, size_t k) const { return columns_[k].values[i]; }
    bool missing(size_t i, size_t k) const { return columns_[k].missing[i] != 0; }
    double outcome(size_t i) const { return outcome_[i]; }
    bool outcome_missing(size_t i) const { return outcome_missing_[i] != 0; }
    const std::vector<double>& outcome() const { return outcome_; }
    const std::vector<uint8_t>& outcome_mask() const { return outcome_missing_; }

    std::optional<size_t> find(const std::string& name) const;
    std::vector<std::string> names() const;

    size_t missing_count(size_t k) const;
    size_t outcome_missing_count() const;
    size_t masked_cells() const;
    bool row_complete(size_t i) const;
    bool complete() const { return masked_cells() == 0; }
    // Fraction of rows with at least one masked cell (covariates or outcome).
    double incomplete_row_fraction() const;

    // Row subset with repetition allowed; masks travel with their rows.
    DataMatrix select_rows(std::span<const size_t> rows) const;
    DataMatrix select_columns(std::span<const size_t> cols) const;
    DataMatrix complete_cases() const;

private:
    std::vector<Column> columns_;
    std::vector<double> outcome_;
    std::vector<uint8_t> outcome_missing_;
    std::string outcome_name_ = "y";
};

// Dense design for learners: X is column-major n x K, y in {0,1}.
struct Dataset {
    Eigen::MatrixXd X;
    std::vector<double> y;
    std::vector<std::string> names;

    size_t rows() const { return static_cast<size_t>(X.rows()); }
    size_t cols() const { return static_cast<size_t>(X.cols()); }
    Dataset subset_columns(std::span<const size_t> cols) const;
    Dataset subset_rows(std::span<const size_t> rows) const;
};

// Throws SpecError if any cell is masked.
Dataset to_dataset(const DataMatrix& d);

enum class TransformOp { Square, Cube, Exp, Product };

struct DerivedColumn {
    std::string name;
    TransformOp op = TransformOp::Product;
    std::vector<std::string> inputs;
};

// Derived predictors (the Q block): squares, cubes, exponentials and
// pairwise products of base columns. A derived cell is missing iff any of
// its inputs is missing in that row.
struct TransformSpec {
    std::vector<DerivedColumn> derived;

    TransformSpec& square(const std::string& x);
    TransformSpec& cube(const std::string& x);
    TransformSpec& exp(const std::string& x);
    TransformSpec& product(const std::string& a, const std::string& b);
};

const char* to_string(TransformOp op);
TransformOp transform_op_from_string(const std::string& s);

// Appends |t| derived columns. Throws SpecError on unknown inputs.
DataMatrix apply_transforms(const DataMatrix& d, const TransformSpec& t);

} // namespace mivs
