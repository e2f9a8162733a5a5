#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mivs/data.h"

namespace mivs {

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
};

// Predictor columns plus the name of the binary outcome column. Header order
// in the file is free; predictors keep the file's order.
struct Schema {
    std::vector<ColumnSpec> columns;
    std::string outcome = "y";
};

// Cells equal to `missing_token` become masked. Throws IoError when the file
// cannot be opened, ParseError on a malformed numeric cell (naming row and
// column) and SchemaError when the header or a binary cell disagrees with
// the schema.
DataMatrix load_csv(const std::filesystem::path& path, const Schema& schema,
                    const std::string& missing_token = "NA");

// Reads the header and values to guess kinds: a predictor whose observed
// values are all 0/1 is Binary, anything else Continuous.
Schema infer_schema(const std::filesystem::path& path, const std::string& outcome = "y",
                    const std::string& missing_token = "NA");

// Writes predictors in order then the outcome. Doubles use the shortest
// representation that parses back to the same bits.
void save_csv(const DataMatrix& d, const std::filesystem::path& path,
              const std::string& missing_token = "NA");

std::string format_double(double v);

} // namespace mivs
