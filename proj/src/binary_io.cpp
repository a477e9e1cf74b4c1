#include "trailgrade/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace trailgrade::io {

void ByteWriter::put_string(std::string_view s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw Error(Errc::InvalidArgument, "string too long for archive field");
    }
    put(static_cast<std::uint16_t>(s.size()));
    put_bytes(s);
}

void ByteWriter::put_fixed_string(std::string_view s, std::size_t width) {
    if (s.size() >= width) {
        throw Error(Errc::InvalidArgument,
                    "'" + std::string(s) + "' exceeds fixed field width " + std::to_string(width - 1));
    }
    if (s.find('\0') != std::string_view::npos) {
        throw Error(Errc::InvalidArgument, "embedded NUL in fixed string field");
    }
    put_bytes(s);
    bytes_.append(width - s.size(), '\0');
}

void ByteReader::require(std::size_t count) const {
    if (count > bytes_.size() - pos_) {
        throw Error(errc_, "unexpected end of data at byte " + std::to_string(pos_));
    }
}

std::string_view ByteReader::get_bytes(std::size_t count) {
    require(count);
    auto out = bytes_.substr(pos_, count);
    pos_ += count;
    return out;
}

std::string ByteReader::get_string() {
    const auto len = get<std::uint16_t>();
    return std::string(get_bytes(len));
}

std::string ByteReader::get_fixed_string(std::size_t width) {
    auto raw = get_bytes(width);
    auto nul = raw.find('\0');
    if (nul == std::string_view::npos) throw Error(errc_, "unterminated fixed string field");
    return std::string(raw.substr(0, nul));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

}  // namespace trailgrade::io
