#include "dtsl/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace dtsl {

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    if (img.pixels.size() != img.height * img.width) throw std::invalid_argument("write_pgm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
    std::string magic;
    std::size_t maxval = 0;
    GrayImage img;
    in >> magic >> img.width >> img.height >> maxval;
    if (magic != "P5" || maxval != 255 || !in) throw std::runtime_error("read_pgm: unsupported header in " + path.string());
    in.get();
    img.pixels.resize(img.width * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated " + path.string());
    return img;
}

GrayImage image_to_gray(const Tensor& image) {
    const Shape& s = image.shape();
    if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1))) throw std::invalid_argument("image_to_gray: expected [1,H,W]");
    GrayImage g{s[s.size() - 2], s[s.size() - 1], {}};
    for (double v : image.data()) g.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return g;
}

GrayImage labels_to_gray(const LabelMap& labels, std::size_t b, std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("labels_to_gray: need at least 2 classes");
    GrayImage g{labels.height, labels.width, {}};
    const std::size_t plane = labels.pixels_per_sample();
    for (std::size_t i = 0; i < plane; ++i) {
        const auto c = static_cast<double>(labels.labels[b * plane + i]);
        g.pixels.push_back(static_cast<std::uint8_t>(std::lround(255.0 * c / static_cast<double>(num_classes - 1))));
    }
    return g;
}

GrayImage tile_horizontal(const std::vector<GrayImage>& tiles) {
    if (tiles.empty()) return {};
    GrayImage out{tiles[0].height, 0, {}};
    for (const auto& t : tiles) {
        if (t.height != out.height) throw std::invalid_argument("tile_horizontal: heights differ");
        out.width += t.width;
    }
    out.pixels.resize(out.height * out.width);
    std::size_t x0 = 0;
    for (const auto& t : tiles) {
        for (std::size_t y = 0; y < t.height; ++y)
            std::copy_n(t.pixels.begin() + static_cast<std::ptrdiff_t>(y * t.width), t.width,
                        out.pixels.begin() + static_cast<std::ptrdiff_t>(y * out.width + x0));
        x0 += t.width;
    }
    return out;
}

}  // namespace dtsl
