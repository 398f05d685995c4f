#include "hyqal/pgm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace hyqal::data {

namespace {

struct PgmScanner {
    const std::string& path;
    std::vector<unsigned char> bytes;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(path + ": " + what + " (byte offset " + std::to_string(pos) + ")");
    }

    bool eof() const { return pos >= bytes.size(); }

    // Skips whitespace and '#' comments between header tokens.
    void skip_separators() {
        while (!eof()) {
            const unsigned char c = bytes[pos];
            if (c == '#') {
                while (!eof() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
                ++pos;
            } else {
                break;
            }
        }
    }

    unsigned long next_uint(const char* name) {
        skip_separators();
        if (eof()) {
            fail(std::string("unexpected end of file while reading ") + name);
        }
        if (bytes[pos] < '0' || bytes[pos] > '9') {
            fail(std::string("expected digit for ") + name);
        }
        unsigned long v = 0;
        while (!eof() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + static_cast<unsigned long>(bytes[pos] - '0');
            if (v > 1u << 30) {
                fail(std::string(name) + " out of range");
            }
            ++pos;
        }
        return v;
    }
};

} // namespace

Tensor read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(path + ": cannot open file");
    }
    PgmScanner sc{path,
                  {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()},
                  0};
    if (sc.bytes.size() < 2 || sc.bytes[0] != 'P' || (sc.bytes[1] != '2' && sc.bytes[1] != '5')) {
        sc.fail("missing P2/P5 magic");
    }
    const bool binary = sc.bytes[1] == '5';
    sc.pos = 2;
    const unsigned long width = sc.next_uint("width");
    const unsigned long height = sc.next_uint("height");
    const unsigned long maxval = sc.next_uint("maxval");
    if (width == 0 || height == 0) {
        sc.fail("zero image dimension");
    }
    if (maxval == 0 || maxval > 65535) {
        sc.fail("maxval must be in [1,65535]");
    }
    const std::size_t count = static_cast<std::size_t>(width) * height;
    Tensor img({static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
    const double scale = 1.0 / static_cast<double>(maxval);

    if (binary) {
        // Exactly one whitespace byte separates the header from raster data.
        if (sc.eof()) {
            sc.fail("unexpected end of file before raster");
        }
        ++sc.pos;
        const std::size_t bytes_per = maxval > 255 ? 2 : 1;
        if (sc.bytes.size() - sc.pos < count * bytes_per) {
            sc.pos = sc.bytes.size();
            sc.fail("raster truncated: expected " + std::to_string(count * bytes_per) +
                    " bytes");
        }
        for (std::size_t i = 0; i < count; ++i) {
            unsigned long v;
            if (bytes_per == 2) {
                v = static_cast<unsigned long>(sc.bytes[sc.pos]) << 8 |
                    static_cast<unsigned long>(sc.bytes[sc.pos + 1]);
                sc.pos += 2;
            } else {
                v = sc.bytes[sc.pos];
                ++sc.pos;
            }
            if (v > maxval) {
                sc.fail("sample value " + std::to_string(v) + " exceeds maxval");
            }
            img[i] = static_cast<double>(v) * scale;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned long v = sc.next_uint("pixel");
            if (v > maxval) {
                sc.fail("sample value " + std::to_string(v) + " exceeds maxval");
            }
            img[i] = static_cast<double>(v) * scale;
        }
    }
    return img;
}

void write_pgm(const std::string& path, const Tensor& image, unsigned maxval,
               const std::string& comment) {
    if (image.rank() != 2) {
        throw ShapeError("write_pgm: expected [H,W] image, got " + image.shape_str());
    }
    if (maxval != 255 && maxval != 65535) {
        throw DataError("write_pgm: maxval must be 255 or 65535");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    out << "P5\n";
    if (!comment.empty()) {
        out << "# " << comment << "\n";
    }
    out << image.dim(1) << " " << image.dim(0) << "\n" << maxval << "\n";
    for (double v : image.values()) {
        const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        const unsigned long q =
            static_cast<unsigned long>(std::lround(clamped * static_cast<double>(maxval)));
        if (maxval > 255) {
            out.put(static_cast<char>((q >> 8) & 0xff));
            out.put(static_cast<char>(q & 0xff));
        } else {
            out.put(static_cast<char>(q & 0xff));
        }
    }
    if (!out) {
        throw DataError(path + ": write failed");
    }
}

} // namespace hyqal::data
