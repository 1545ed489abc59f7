#include "polarseg/rten.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace polarseg {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'E', 'N'};
constexpr std::uint16_t kVersion = 1;

std::size_t dtype_size(RtenDtype d) {
    switch (d) {
        case RtenDtype::f32: return 4;
        case RtenDtype::f64: return 8;
        case RtenDtype::c64: return 8;
        case RtenDtype::u8: return 1;
    }
    throw std::invalid_argument("rten: unknown dtype");
}

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_file(const std::string& path, RtenDtype dtype, const Shape& dims, const void* payload,
                std::size_t payload_bytes) {
    const std::int64_t n = shape_numel(dims);
    if (static_cast<std::size_t>(n) * dtype_size(dtype) != payload_bytes)
        throw std::invalid_argument("rten_write: payload size mismatch for " + path);

    std::string header;
    header.append(kMagic, 4);
    put_u16(header, kVersion);
    header.push_back(static_cast<char>(dtype));
    header.push_back(static_cast<char>(dims.size()));
    for (auto d : dims) put_u64(header, static_cast<std::uint64_t>(d));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("rten_write: cannot open " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(payload_bytes));
    if (!out) throw std::runtime_error("rten_write: short write to " + path);
}

// x86 hosts are little-endian; the container format pins that byte order.
static_assert(std::endian::native == std::endian::little, "rten payload IO assumes a little-endian host");

}  // namespace

void rten_write(const std::string& path, const Tensor& t) {
    write_file(path, RtenDtype::f32, t.shape, t.data.data(), t.data.size() * sizeof(float));
}

void rten_write(const std::string& path, const TensorD& t) {
    write_file(path, RtenDtype::f64, t.shape, t.data.data(), t.data.size() * sizeof(double));
}

void rten_write_c64(const std::string& path, const std::vector<std::complex<float>>& data, const Shape& dims) {
    write_file(path, RtenDtype::c64, dims, data.data(), data.size() * sizeof(std::complex<float>));
}

void rten_write_u8(const std::string& path, const std::vector<std::uint8_t>& data, const Shape& dims) {
    write_file(path, RtenDtype::u8, dims, data.data(), data.size());
}

RtenData rten_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("rten_read: cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::int64_t file_size = static_cast<std::int64_t>(in.tellg());
    in.seekg(0);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("rten_read: bad magic at offset 0 in " + path);
    unsigned char rest[4];
    if (!in.read(reinterpret_cast<char*>(rest), 4))
        throw std::runtime_error("rten_read: truncated header at offset 4 in " + path);
    const std::uint16_t version = static_cast<std::uint16_t>(rest[0] | (rest[1] << 8));
    if (version != kVersion)
        throw std::runtime_error("rten_read: unsupported version " + std::to_string(version) + " in " + path);
    const std::uint8_t dtype_raw = rest[2];
    if (dtype_raw > 3) throw std::runtime_error("rten_read: unknown dtype " + std::to_string(dtype_raw) + " at offset 6");
    const int ndim = rest[3];

    RtenData out;
    out.dtype = static_cast<RtenDtype>(dtype_raw);
    out.dims.resize(static_cast<std::size_t>(ndim));
    for (int i = 0; i < ndim; ++i) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8))
            throw std::runtime_error("rten_read: truncated dims at offset " + std::to_string(8 + 8 * i) + " in " + path);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
        out.dims[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
    }

    const std::int64_t n = out.numel();
    const std::size_t expect = static_cast<std::size_t>(n) * dtype_size(out.dtype);
    const std::int64_t header_bytes = 8 + 8 * ndim;
    const std::int64_t actual = file_size - header_bytes;
    if (actual != static_cast<std::int64_t>(expect))
        throw std::runtime_error("rten_read: payload size mismatch in " + path + ": expected " +
                                 std::to_string(expect) + " bytes, found " + std::to_string(actual));

    switch (out.dtype) {
        case RtenDtype::f32:
            out.f32.resize(static_cast<std::size_t>(n));
            in.read(reinterpret_cast<char*>(out.f32.data()), static_cast<std::streamsize>(expect));
            break;
        case RtenDtype::f64:
            out.f64.resize(static_cast<std::size_t>(n));
            in.read(reinterpret_cast<char*>(out.f64.data()), static_cast<std::streamsize>(expect));
            break;
        case RtenDtype::c64:
            out.c64.resize(static_cast<std::size_t>(n));
            in.read(reinterpret_cast<char*>(out.c64.data()), static_cast<std::streamsize>(expect));
            break;
        case RtenDtype::u8:
            out.u8.resize(static_cast<std::size_t>(n));
            in.read(reinterpret_cast<char*>(out.u8.data()), static_cast<std::streamsize>(expect));
            break;
    }
    if (!in) throw std::runtime_error("rten_read: short read of payload in " + path);
    return out;
}

Tensor rten_read_f32(const std::string& path) {
    RtenData d = rten_read(path);
    if (d.dtype != RtenDtype::f32) throw std::runtime_error("rten_read_f32: " + path + " is not an f32 tensor");
    return Tensor(d.dims, std::move(d.f32));
}

}  // namespace polarseg
