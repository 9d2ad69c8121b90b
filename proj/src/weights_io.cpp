#include "polarseg/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace polarseg {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
    v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
        (static_cast<std::uint32_t>(bytes[2]) << 16) |
        (static_cast<std::uint32_t>(bytes[3]) << 24);
    return true;
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::vector<std::uint32_t> shape_dims(const Parameter& p) {
    const Shape& s = p.value.shape;
    if (p.rank == 1) return {static_cast<std::uint32_t>(s.n)};
    return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

}  // namespace

void save_parameters(const std::string& path, std::span<const Parameter> params) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write " + path);
    out.write(kWeightsMagic, 6);
    for (const Parameter& p : params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const auto dims = shape_dims(p);
        put_u32(out, static_cast<std::uint32_t>(dims.size()));
        for (std::uint32_t d : dims) put_u32(out, d);
        for (float v : p.value.data) put_f32(out, v);
    }
    require(out.good(), "write failed for " + path);
}

std::vector<LoadedParam> load_parameters(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot read " + path);
    char magic[6];
    if (!in.read(magic, 6) || std::memcmp(magic, kWeightsMagic, 6) != 0)
        throw std::runtime_error(path + ": bad weights header, MNETW1 expected");
    std::vector<LoadedParam> out;
    std::uint32_t name_len = 0;
    while (get_u32(in, name_len)) {
        LoadedParam p;
        if (name_len == 0 || name_len > 4096)
            throw std::runtime_error(path + ": corrupt parameter record");
        p.name.resize(name_len);
        if (!in.read(p.name.data(), name_len))
            throw std::runtime_error(path + ": truncated parameter name");
        std::uint32_t rank = 0;
        if (!get_u32(in, rank) || rank == 0 || rank > 4)
            throw std::runtime_error(path + ": bad rank for parameter '" + p.name + "'");
        std::uint64_t count = 1;
        p.dims.resize(rank);
        for (std::uint32_t& d : p.dims) {
            if (!get_u32(in, d) || d == 0)
                throw std::runtime_error(path + ": bad shape for parameter '" + p.name + "'");
            count *= d;
        }
        if (count > (1u << 28))
            throw std::runtime_error(path + ": parameter '" + p.name + "' is implausibly large");
        p.data.resize(count);
        for (float& v : p.data) {
            std::uint32_t bits = 0;
            if (!get_u32(in, bits))
                throw std::runtime_error(path + ": truncated data for parameter '" + p.name +
                                         "'");
            v = std::bit_cast<float>(bits);
        }
        out.push_back(std::move(p));
    }
    return out;
}

void apply_parameters(LayerGraph& graph, const std::vector<LoadedParam>& loaded) {
    for (Parameter& p : graph.params()) {
        const LoadedParam* found = nullptr;
        for (const LoadedParam& lp : loaded)
            if (lp.name == p.name) {
                found = &lp;
                break;
            }
        require(found != nullptr, "weights: missing parameter '" + p.name + "'");
        std::uint64_t count = 1;
        for (std::uint32_t d : found->dims) count *= d;
        require(count == p.value.size() &&
                    static_cast<int>(found->dims.size()) == p.rank &&
                    found->dims[0] == static_cast<std::uint32_t>(p.value.shape.n),
                "weights: parameter '" + p.name + "' has unexpected shape");
        std::copy(found->data.begin(), found->data.end(), p.value.data.begin());
    }
}

}  // namespace polarseg
