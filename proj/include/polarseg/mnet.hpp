#pragma once

// Assembles the segmentation network: a multi-scale input pyramid feeding a
// U-shape encoder/decoder, one side-output head per scale (1x1 projection,
// fixed nearest-neighbor upsampling realized as a frozen transposed conv,
// sigmoid), and a mean-fused final map.

#include <cstdint>
#include <vector>

#include "polarseg/graph.hpp"
#include "polarseg/image.hpp"

namespace polarseg {

struct MNetConfig {
    int depth = 4;          // number of scales; also the side-output count M
    int base_channels = 16; // channels at the top scale, doubling per scale
    int input_size = 400;   // square spatial size, divisible by 2^(depth-1)
    int in_channels = 3;
    int num_classes = 2;
    std::vector<float> side_alpha;     // fusion weights, defaults to 1/M each
    std::vector<float> class_weights;  // normalized to sum to 1, default uniform
    float fused_loss_weight = 0.0f;    // optional extra Dice term on the fused map

    // Fills defaults, normalizes class weights, throws naming any violated
    // invariant.
    void validate_and_normalize();
};

struct MNet {
    MNetConfig cfg;
    LayerGraph graph;
    int input_node = -1;
    std::vector<int> side_nodes;  // deepest head first
    int fused_node = -1;
};

MNet build_mnet(MNetConfig cfg);

// He fan-in kernels, zero biases; frozen parameters keep their built values.
void init_parameters(LayerGraph& graph, std::uint32_t seed);

// The pyramid the encoder consumes: depth tensors, each half the previous
// spatial size, produced by repeated 2x2 average pooling.
std::vector<Tensor> multi_scale_inputs(const Tensor& image, int depth);

struct MNetForward {
    LayerGraph::Forward fwd;
    std::vector<Tensor> side_maps;
    Tensor fused;
};

MNetForward mnet_forward(const MNet& net, const Tensor& image);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t, int batch_index = 0);

}  // namespace polarseg
