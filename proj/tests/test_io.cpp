#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "polarseg/image_io.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/rten.hpp"

using namespace polarseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "polarseg_io_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Rten, F32RoundTripIsBitExact) {
    Rng rng(61);
    Tensor t(Shape{128, 128});
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-10, 10));
    const auto path = temp_file("roundtrip.rten");
    rten_write(path.string(), t);
    auto back = rten_read_f32(path.string());
    EXPECT_EQ(back.shape, t.shape);
    EXPECT_EQ(back.data, t.data);
}

TEST(Rten, HeaderLayoutForCubeIs32Bytes) {
    std::vector<std::complex<float>> cube(static_cast<std::size_t>(128) * 128 * 64, {0.0f, 0.0f});
    const auto path = temp_file("cube.rten");
    rten_write_c64(path.string(), cube, Shape{128, 128, 64});
    // magic(4) + version(2) + dtype(1) + ndim(1) + 3*u64(24) = 32 bytes of header.
    EXPECT_EQ(fs::file_size(path), 32u + cube.size() * 8u);
    auto back = rten_read(path.string());
    EXPECT_EQ(back.dtype, RtenDtype::c64);
    EXPECT_EQ(back.dims, (Shape{128, 128, 64}));
}

TEST(Rten, TruncationNamesByteCounts) {
    Tensor t(Shape{4, 4}, 1.0f);
    const auto path = temp_file("trunc.rten");
    rten_write(path.string(), t);
    fs::resize_file(path, fs::file_size(path) - 8);
    try {
        rten_read(path.string());
        FAIL() << "expected truncation error";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("64"), std::string::npos) << msg;  // expected bytes
        EXPECT_NE(msg.find("56"), std::string::npos) << msg;  // actual bytes
    }
}

TEST(Rten, RejectsBadMagicAndVersion) {
    const auto path = temp_file("bad.rten");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE then some bytes";
    }
    EXPECT_THROW(rten_read(path.string()), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary);
        const char bytes[] = {'R', 'T', 'E', 'N', 9, 0, 0, 0};
        out.write(bytes, sizeof(bytes));
    }
    EXPECT_THROW(rten_read(path.string()), std::runtime_error);
    EXPECT_THROW(rten_read("/nonexistent/nowhere.rten"), std::runtime_error);
}

TEST(Rten, U8AndF64Payloads) {
    const auto path = temp_file("u8.rten");
    std::vector<std::uint8_t> bytes = {0, 255, 7, 128};
    rten_write_u8(path.string(), bytes, Shape{2, 2});
    auto back = rten_read(path.string());
    EXPECT_EQ(back.dtype, RtenDtype::u8);
    EXPECT_EQ(back.u8, bytes);

    TensorD d(Shape{3}, {1.0, -2.5, 1e-300});
    const auto path2 = temp_file("f64.rten");
    rten_write(path2.string(), d);
    auto back2 = rten_read(path2.string());
    EXPECT_EQ(back2.f64, d.data);
}

TEST(Pgm, MaskRoundTrip) {
    Rng rng(62);
    Tensor mask(Shape{128, 128});
    for (auto& v : mask.data) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
    const auto path = temp_file("mask.pgm");
    write_mask_pgm(path.string(), mask);
    auto back = read_mask_pgm(path.string());
    EXPECT_EQ(back.shape, mask.shape);
    EXPECT_EQ(back.data, mask.data);
}

TEST(Ppm, WritesValidHeaderAndSize) {
    std::vector<std::uint8_t> rgb(16 * 8 * 3, 100);
    const auto path = temp_file("img.ppm");
    write_ppm(path.string(), rgb, 16, 8);
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    in >> magic;
    EXPECT_EQ(magic, "P6");
}
