#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nmtune/matrix.hpp"

namespace nmtune::io {

inline constexpr char kFmatMagic[4] = {'F', 'M', 'A', 'T'};
inline constexpr std::uint16_t kFmatVersion = 1;
inline constexpr std::uint8_t kFmatFloat64 = 1;
inline constexpr std::size_t kFmatHeaderBytes = 28;

/// Serialized FMAT image: 28-byte header, little-endian float64 payload,
/// CRC32 of the payload.
std::string encode_fmat(const Matrix& m);
Matrix decode_fmat(const std::string& bytes);

/// Atomic: writes a sibling temp file and renames it over `path`.
void write_fmat(const Matrix& m, const std::filesystem::path& path);
Matrix read_fmat(const std::filesystem::path& path);

/// Whole-file helpers shared by the other formats.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace nmtune::io
