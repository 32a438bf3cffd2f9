#pragma once

// Small file I/O helpers shared by the command-line tools: whole-file reads,
// atomic writes (temp-and-rename, so a crash never leaves a half-written
// artifact), and SHA-256 content hashes for run manifests.

#include <string>
#include <string_view>

namespace sigkit {

// Reads the whole file; throws Error when it cannot be opened or read.
std::string read_file(const std::string& path);

// Writes content to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

// Lowercase hex SHA-256 digest of the bytes.
std::string sha256_hex(std::string_view data);

}  // namespace sigkit
