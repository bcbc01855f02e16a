#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace coirl::util {

// Writes through a sibling temp file and renames it into place. The temp file
// is removed if anything fails; throws DataError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace coirl::util
