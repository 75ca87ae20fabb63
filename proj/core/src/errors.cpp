#include "pvtrade/errors.hpp"

#include <utility>

namespace pvtrade {

ConfigError::ConfigError(std::string field, const std::string& what)
    : Error("config error [" + field + "]: " + what), field_(std::move(field)) {}

DataError::DataError(const std::string& what, std::size_t row)
    : Error(row > 0 ? "data error at row " + std::to_string(row) + ": " + what
                    : "data error: " + what),
      row_(row) {}

}  // namespace pvtrade
