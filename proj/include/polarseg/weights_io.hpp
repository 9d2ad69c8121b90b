#pragma once

// Versioned weight container: the magic string "MNETW1" followed by one
// record per parameter — u32 name length, UTF-8 name, u32 rank, rank u32
// shape entries, then the values as 32-bit little-endian floats. Round-trips
// bit-exactly.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polarseg/graph.hpp"

namespace polarseg {

inline constexpr char kWeightsMagic[] = "MNETW1";

void save_parameters(const std::string& path, std::span<const Parameter> params);

struct LoadedParam {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

// Throws (mentioning the expected "MNETW1" magic) on a bad header.
std::vector<LoadedParam> load_parameters(const std::string& path);

// Copies loaded values into the graph's same-named parameters; every graph
// parameter must be present with a matching shape.
void apply_parameters(LayerGraph& graph, const std::vector<LoadedParam>& loaded);

}  // namespace polarseg
