#pragma once

#include <string>
#include <string_view>

#include "rla/election.hpp"

namespace rla {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Digest of a CVR table's content (batch index, then identifier/votes per row).
std::string cvr_digest(const CvrTable& table);

}  // namespace rla
