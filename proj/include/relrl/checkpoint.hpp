#pragma once

#include "relrl/parameters.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace relrl {

/// Plain-text `key=value` lines stored next to the parameter archive.
using Manifest = std::map<std::string, std::string>;

/// Checkpoint directory layout:
///   params.bin    "RELRLCK1", u32 entry count, then per entry (sorted by name):
///                 u32 name length, name bytes, u32 rank (1 or 2), u32 dims...,
///                 little-endian IEEE-754 float32 payload in row-major order.
///   manifest.txt  one `key=value` per line; includes step_count.
void save_checkpoint(const std::filesystem::path& dir, const ParameterStore& store, const Manifest& manifest);

struct Checkpoint {
  ParameterStore store;
  Manifest manifest;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_archive(std::ostream& out, const ParameterStore& store);
ParameterStore read_archive(std::istream& in);

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);

}  // namespace relrl
