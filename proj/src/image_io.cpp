#include "polarseg/image_io.hpp"

#include <fstream>
#include <stdexcept>

namespace polarseg {

namespace {

void write_pnm(const std::string& path, const char* tag, const std::vector<std::uint8_t>& bytes,
               std::int64_t width, std::int64_t height, std::int64_t channels) {
    if (static_cast<std::int64_t>(bytes.size()) != width * height * channels)
        throw std::invalid_argument("write_pnm: size mismatch for " + path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_pnm: cannot open " + path);
    out << tag << "\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_pnm: short write to " + path);
}

int next_token(std::ifstream& in) {
    // Skips whitespace and '#' comments, returns the next integer.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("read_pgm: malformed header");
    return v;
}

}  // namespace

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& gray, std::int64_t width,
               std::int64_t height) {
    write_pnm(path, "P5", gray, width, height, 1);
}

void write_ppm(const std::string& path, const std::vector<std::uint8_t>& rgb, std::int64_t width,
               std::int64_t height) {
    write_pnm(path, "P6", rgb, width, height, 3);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, std::int64_t* width, std::int64_t* height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("read_pgm: " + path + " is not binary PGM");
    const std::int64_t w = next_token(in);
    const std::int64_t h = next_token(in);
    const int maxval = next_token(in);
    if (maxval != 255) throw std::runtime_error("read_pgm: unsupported maxval in " + path);
    in.get();  // single whitespace after header
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w * h));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    *width = w;
    *height = h;
    return data;
}

void write_mask_pgm(const std::string& path, const Tensor& mask01) {
    if (mask01.rank() != 2) throw std::invalid_argument("write_mask_pgm: expected rank-2 mask");
    std::vector<std::uint8_t> gray(mask01.data.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask01.data[i] >= 0.5f ? 255 : 0;
    write_pgm(path, gray, mask01.dim(1), mask01.dim(0));
}

Tensor read_mask_pgm(const std::string& path) {
    std::int64_t w = 0, h = 0;
    auto gray = read_pgm(path, &w, &h);
    Tensor mask(Shape{h, w});
    for (std::size_t i = 0; i < gray.size(); ++i) mask.data[i] = gray[i] >= 128 ? 1.0f : 0.0f;
    return mask;
}

}  // namespace polarseg
