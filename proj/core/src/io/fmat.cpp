#include "nmtune/io/fmat.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nmtune/error.hpp"

namespace nmtune::io {

namespace {

static_assert(std::endian::native == std::endian::little, "FMAT I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_fmat(const Matrix& m) {
  const std::size_t payload = m.size() * sizeof(double);
  std::string out;
  out.reserve(kFmatHeaderBytes + payload + 4);
  out.append(kFmatMagic, 4);
  put<std::uint16_t>(out, kFmatVersion);
  put<std::uint8_t>(out, kFmatFloat64);
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, 0);  // pad so the header is 28 bytes
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  out.append(reinterpret_cast<const char*>(m.data()), payload);
  put<std::uint32_t>(out, crc32_of(out.data() + kFmatHeaderBytes, payload));
  return out;
}

Matrix decode_fmat(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFmatMagic, 4) != 0) {
    fail(ErrorKind::kBadMagic, "not an FMAT file");
  }
  if (bytes.size() < kFmatHeaderBytes) fail(ErrorKind::kTruncatedFile, "FMAT header is truncated");
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kFmatVersion) {
    fail(ErrorKind::kUnsupportedVersion, "FMAT version " + std::to_string(version));
  }
  const auto dtype = get<std::uint8_t>(bytes, 6);
  if (dtype != kFmatFloat64) {
    fail(ErrorKind::kUnsupportedVersion, "FMAT dtype code " + std::to_string(dtype));
  }
  const auto rows = get<std::uint64_t>(bytes, 12);
  const auto cols = get<std::uint64_t>(bytes, 20);
  if (cols != 0 && rows > (bytes.size() / sizeof(double)) / cols) {
    fail(ErrorKind::kTruncatedFile, "FMAT payload is shorter than its header claims");
  }
  const std::size_t payload = rows * cols * sizeof(double);
  const std::size_t expected = kFmatHeaderBytes + payload + 4;
  if (bytes.size() < expected) fail(ErrorKind::kTruncatedFile, "FMAT file is truncated");
  if (bytes.size() > expected) fail(ErrorKind::kTruncatedFile, "FMAT file has trailing bytes");
  const auto stored = get<std::uint32_t>(bytes, kFmatHeaderBytes + payload);
  if (stored != crc32_of(bytes.data() + kFmatHeaderBytes, payload)) {
    fail(ErrorKind::kCrcMismatch, "FMAT payload checksum mismatch");
  }
  Matrix m(rows, cols);
  std::memcpy(m.data(), bytes.data() + kFmatHeaderBytes, payload);
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingArtifact, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIoError, "cannot rename into " + path.string() + ": " + ec.message());
}

void write_fmat(const Matrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_fmat(m));
}

Matrix read_fmat(const std::filesystem::path& path) { return decode_fmat(read_file(path)); }

}  // namespace nmtune::io
