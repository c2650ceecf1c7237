#pragma once

// Little-endian primitive encoding for the artifact file formats.

#include "plsm/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace plsm::io {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value)
    {
        os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void magic(std::string_view tag) { os_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    void string(std::string_view s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void array(std::span<const T> values)
    {
        put<std::uint64_t>(values.size());
        os_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    }

    void check() const
    {
        if (!os_) throw FormatError("write failed");
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get()
    {
        T value{};
        is_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!is_) throw FormatError("unexpected end of file");
        return value;
    }

    void expect_magic(std::string_view tag)
    {
        std::string buf(tag.size(), '\0');
        is_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!is_ || buf != tag) throw FormatError("bad magic, expected '" + std::string(tag) + "'");
    }

    std::string string()
    {
        const auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        is_.read(s.data(), n);
        if (!is_) throw FormatError("unexpected end of file");
        return s;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    std::vector<T> array(std::uint64_t max_len = (1ULL << 34))
    {
        const auto n = get<std::uint64_t>();
        if (n > max_len) throw FormatError("array length out of range");
        std::vector<T> values(n);
        is_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)));
        if (!is_) throw FormatError("unexpected end of file");
        return values;
    }

private:
    std::istream& is_;
};

}  // namespace plsm::io
