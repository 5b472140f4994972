#pragma once

#include <string>
#include <string_view>

namespace usemention {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Digest of a file's contents; throws DataError if unreadable.
std::string file_sha256_hex(const std::string& path);

} // namespace usemention
