#include "tapestry/zip.hpp"

#include "tapestry/error.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>

namespace tapestry {

namespace {

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get16(const std::string& s, std::size_t at) {
  if (at + 2 > s.size()) fail(ErrorCode::MalformedResponse, "truncated zip archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

std::uint32_t get32(const std::string& s, std::size_t at) {
  return static_cast<std::uint32_t>(get16(s, at)) | (static_cast<std::uint32_t>(get16(s, at + 2)) << 16);
}

constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

std::string inflate_raw(const std::string& compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorCode::MalformedResponse, "zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) {
    fail(ErrorCode::MalformedResponse, "corrupt deflate stream in zip entry");
  }
  return out;
}

} // namespace

std::string make_zip(const std::vector<ZipEntry>& entries) {
  std::string out;
  std::string central;
  for (const ZipEntry& e : entries) {
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(e.data.data()), static_cast<uInt>(e.data.size())));
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const auto size = static_cast<std::uint32_t>(e.data.size());
    put32(out, 0x04034b50);
    put16(out, 20);
    put16(out, 0);
    put16(out, 0);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out += e.name;
    out += e.data;

    put32(central, 0x02014b50);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, static_cast<std::uint16_t>(e.name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += e.name;
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, central_offset);
  put16(out, 0);
  return out;
}

std::vector<ZipEntry> read_zip(const std::string& archive) {
  if (archive.size() < 22) fail(ErrorCode::MalformedResponse, "zip archive too small");
  std::size_t eocd = std::string::npos;
  for (std::size_t i = archive.size() - 22 + 1; i-- > 0;) {
    if (get32(archive, i) == 0x06054b50) {
      eocd = i;
      break;
    }
    if (archive.size() - i > 22 + 65535) break;
  }
  if (eocd == std::string::npos) fail(ErrorCode::MalformedResponse, "zip end-of-directory record not found");
  const std::uint16_t count = get16(archive, eocd + 10);
  std::size_t at = get32(archive, eocd + 16);
  std::vector<ZipEntry> entries;
  for (std::uint16_t n = 0; n < count; ++n) {
    if (get32(archive, at) != 0x02014b50) fail(ErrorCode::MalformedResponse, "bad zip central directory");
    const std::uint16_t method = get16(archive, at + 10);
    const std::uint32_t crc = get32(archive, at + 16);
    const std::uint32_t csize = get32(archive, at + 20);
    const std::uint32_t usize = get32(archive, at + 24);
    const std::uint16_t name_len = get16(archive, at + 28);
    const std::uint16_t extra_len = get16(archive, at + 30);
    const std::uint16_t comment_len = get16(archive, at + 32);
    const std::uint32_t local = get32(archive, at + 42);
    if (at + 46 + name_len > archive.size()) fail(ErrorCode::MalformedResponse, "truncated zip directory");
    std::string name = archive.substr(at + 46, name_len);
    at += 46 + name_len + extra_len + comment_len;

    if (get32(archive, local) != 0x04034b50) fail(ErrorCode::MalformedResponse, "bad zip local header");
    const std::size_t data_at = local + 30 + get16(archive, local + 26) + get16(archive, local + 28);
    if (data_at + csize > archive.size()) fail(ErrorCode::MalformedResponse, "truncated zip entry");
    if (!name.empty() && name.back() == '/') continue;
    std::string data = archive.substr(data_at, csize);
    if (method == 8) {
      data = inflate_raw(data, usize);
    } else if (method != 0) {
      fail(ErrorCode::MalformedResponse, "unsupported zip compression method");
    }
    const auto actual = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
    if (actual != crc) fail(ErrorCode::MalformedResponse, "zip entry CRC mismatch: " + name);
    entries.push_back({std::move(name), std::move(data)});
  }
  return entries;
}

} // namespace tapestry
