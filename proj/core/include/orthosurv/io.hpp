// io.hpp
//
// Dataset CSV files: header x0,...,x{p-1},a,t_tilde,delta_s,delta_g, comma
// separated, no quoting.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "orthosurv/types.hpp"

namespace orthosurv {

// Throws std::runtime_error naming the row (1-based data row) on parse or
// validation failure. Without t_max the largest observed time is used.
Dataset read_csv_dataset(std::istream& in, std::optional<int> t_max = std::nullopt);
Dataset load_csv_dataset(const std::string& path, std::optional<int> t_max = std::nullopt);

void write_csv_dataset(std::ostream& out, const Dataset& d);
void save_csv_dataset(const std::string& path, const Dataset& d);

}  // namespace orthosurv
