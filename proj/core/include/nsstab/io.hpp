#pragma once

// Binary matrix container shared by every persisted artifact.
//
// Layout: three little-endian uint64 header words (nx, ny, ncols) followed
// by rows * ncols IEEE-754 doubles in row-major order. The row count is
// implied by the file size.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nsstab/types.hpp"

namespace nsstab::io {

struct MatrixFile {
  std::uint64_t nx = 0;
  std::uint64_t ny = 0;
  Mat data;
};

void write_matrix(const std::filesystem::path& path, std::uint64_t nx,
                  std::uint64_t ny, const Mat& m);
MatrixFile read_matrix(const std::filesystem::path& path);

/// Complex blocks are stored as interleaved (re, im) column pairs.
Mat split_complex(const CMat& m);
CMat join_complex(const Mat& m);

/// 64-bit FNV-1a of raw bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace nsstab::io
