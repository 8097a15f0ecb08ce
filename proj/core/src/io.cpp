#include "nsstab/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nsstab/errors.hpp"

namespace nsstab::io {

static_assert(std::endian::native == std::endian::little,
              "binary container assumes a little-endian host");

void write_matrix(const std::filesystem::path& path, std::uint64_t nx,
                  std::uint64_t ny, const Mat& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  const std::uint64_t header[3] = {nx, ny, static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const double x = m(r, c);
      out.write(reinterpret_cast<const char*>(&x), sizeof(double));
    }
  }
  if (!out) throw InputError("write failed for " + path.string());
}

MatrixFile read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw InputError("truncated header in " + path.string());
  const auto size = std::filesystem::file_size(path);
  const std::uint64_t payload = size - sizeof(header);
  const std::uint64_t ncols = header[2];
  if (payload % sizeof(double) != 0 ||
      (ncols > 0 && (payload / sizeof(double)) % ncols != 0) ||
      (ncols == 0 && payload != 0)) {
    throw InputError("malformed matrix payload in " + path.string());
  }
  const std::uint64_t rows = ncols == 0 ? 0 : payload / sizeof(double) / ncols;
  MatrixFile f{header[0], header[1], Mat(Index(rows), Index(ncols))};
  for (Index r = 0; r < f.data.rows(); ++r) {
    for (Index c = 0; c < f.data.cols(); ++c) {
      double x;
      in.read(reinterpret_cast<char*>(&x), sizeof(double));
      f.data(r, c) = x;
    }
  }
  if (!in) throw InputError("truncated payload in " + path.string());
  return f;
}

Mat split_complex(const CMat& m) {
  Mat out(m.rows(), 2 * m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    out.col(2 * c) = m.col(c).real();
    out.col(2 * c + 1) = m.col(c).imag();
  }
  return out;
}

CMat join_complex(const Mat& m) {
  if (m.cols() % 2 != 0) throw InputError("complex block has odd column count");
  CMat out(m.rows(), m.cols() / 2);
  for (Index c = 0; c < out.cols(); ++c) {
    out.col(c).real() = m.col(2 * c);
    out.col(c).imag() = m.col(2 * c + 1);
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string file_hash(const std::filesystem::path& path) {
  return fnv1a_hex(read_text(path));
}

}  // namespace nsstab::io
