#include "optira/error.hpp"

namespace optira {

ParseError::ParseError(const std::string& message, std::size_t offset)
    : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

}  // namespace optira
