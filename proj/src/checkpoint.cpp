#include "dtsl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dtsl {

namespace {

constexpr const char* kMagic = "DTSL-CHECKPOINT 1";

void put_f64le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes{};
    for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    out.write(bytes.data(), 8);
}

double get_f64le(std::istream& in) {
    std::array<unsigned char, 8> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

std::string read_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: unexpected end of header");
    return line;
}

std::string expect_key(const std::string& line, const std::string& key) {
    if (line.rfind(key + " ", 0) != 0) throw std::runtime_error("checkpoint: expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    out << kMagic << '\n'
        << "architecture " << to_string(params.architecture) << '\n'
        << "num_classes " << params.num_classes << '\n'
        << "base_channels " << params.base_channels << '\n'
        << "tensors " << params.tensors.size() << '\n'
        << "end\n";
    for (const auto& t : params.tensors) {
        const Shape& s = t.value.shape();
        out << "tensor " << t.name << ' ' << s.size();
        for (std::size_t d : s) out << ' ' << d;
        out << '\n';
        for (double v : t.value.data()) put_f64le(out, v);
    }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    write_checkpoint(out, params);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

ModelParams read_checkpoint(std::istream& in) {
    if (read_line(in) != kMagic) throw std::runtime_error("checkpoint: bad magic line");
    ModelParams params;
    params.architecture = parse_architecture(expect_key(read_line(in), "architecture"));
    params.num_classes = std::stoul(expect_key(read_line(in), "num_classes"));
    params.base_channels = std::stoul(expect_key(read_line(in), "base_channels"));
    const std::size_t count = std::stoul(expect_key(read_line(in), "tensors"));
    if (read_line(in) != "end") throw std::runtime_error("checkpoint: missing header terminator");
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream header(expect_key(read_line(in), "tensor"));
        std::string name;
        std::size_t rank = 0;
        header >> name >> rank;
        Shape shape(rank);
        for (auto& d : shape) header >> d;
        if (!header || name.empty()) throw std::runtime_error("checkpoint: malformed tensor header");
        std::vector<double> values(shape_numel(shape));
        for (double& v : values) v = get_f64le(in);
        params.tensors.push_back({name, Tensor(std::move(shape), std::move(values), false)});
    }
    return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace dtsl
