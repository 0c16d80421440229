#pragma once

#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace corrdef::io {

std::string_view version() noexcept;

/// Shortest decimal string that reads back to the same double.
std::string format_number(double x);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Comment lines opening every output file:
///   # corrdef <version>
///   # config_hash <hash>
std::string header_block(std::string_view config_hash);

/// Model document: {n_vertices, edges: [[u,v],...], alpha: [...],
/// beta: [{edge: [u,v], value}], bipartition?: {hat: [...], check: [...]}}.
/// Edges without a beta entry get 0. Throws ConfigError.
ModelParams parse_model(std::string_view json_text);
std::string model_to_json(const ModelParams& params);

/// Generator document: {n_vertices, entries: [{subset_bitmask, vertex, rate}]}.
MonotoneGenerator parse_generator(std::string_view json_text);
std::string generator_to_json(const MonotoneGenerator& gen);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace corrdef::io
