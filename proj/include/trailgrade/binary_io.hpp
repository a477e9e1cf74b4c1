#pragma once

// Little-endian byte packing shared by the session archive, the sample
// archive and model checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "trailgrade/error.hpp"

namespace trailgrade::io {

class ByteWriter {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        }
        bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
    }

    void put_bytes(std::string_view raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

    // u16 length prefix, then raw bytes.
    void put_string(std::string_view s);

    // Exactly `width` bytes, NUL padded. Throws InvalidArgument if s does not fit
    // with at least one terminating NUL.
    void put_fixed_string(std::string_view s, std::size_t width);

    const std::string& bytes() const noexcept { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    // `on_truncation` is the error code raised when a read runs past the end.
    ByteReader(std::string_view bytes, Errc on_truncation) : bytes_(bytes), errc_(on_truncation) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        require(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string_view get_bytes(std::size_t count);
    std::string get_string();
    std::string get_fixed_string(std::size_t width);

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void require(std::size_t count) const;

    std::string_view bytes_;
    std::size_t pos_ = 0;
    Errc errc_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace trailgrade::io
