#pragma once

#include "pgee/model.hpp"

#include <iosfwd>
#include <string>

namespace pgee {

/// Long-format CSV: header `unit_id,k,y,x1,...,xp`, one row per
/// (unit, measurement) with k in 1..l. Units keep the order of their first
/// row; rows within a unit may come in any order. Errors name the line.
Dataset read_long_csv(std::istream& in);
Dataset read_long_csv(const std::string& path);

void write_long_csv(const Dataset& data, std::ostream& out);
void write_long_csv(const Dataset& data, const std::string& path);

}  // namespace pgee
