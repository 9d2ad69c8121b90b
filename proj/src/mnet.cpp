#include "polarseg/mnet.hpp"

#include <cmath>
#include <random>
#include <string>

namespace polarseg {

void MNetConfig::validate_and_normalize() {
    require(depth >= 1, "MNetConfig: depth must be >= 1");
    require(base_channels >= 1, "MNetConfig: base_channels must be >= 1");
    require(in_channels >= 1, "MNetConfig: in_channels must be >= 1");
    require(num_classes >= 1, "MNetConfig: num_classes must be >= 1");
    const int factor = 1 << (depth - 1);
    require(input_size >= factor && input_size % factor == 0,
            "MNetConfig: input_size " + std::to_string(input_size) +
                " is not divisible by 2^(depth-1) = " + std::to_string(factor));
    if (side_alpha.empty()) side_alpha.assign(depth, 1.0f / static_cast<float>(depth));
    require(static_cast<int>(side_alpha.size()) == depth,
            "MNetConfig: side_alpha length " + std::to_string(side_alpha.size()) +
                " does not match the side-output count " + std::to_string(depth));
    if (class_weights.empty())
        class_weights.assign(num_classes, 1.0f / static_cast<float>(num_classes));
    require(static_cast<int>(class_weights.size()) == num_classes,
            "MNetConfig: class_weights length " + std::to_string(class_weights.size()) +
                " does not match num_classes " + std::to_string(num_classes));
    float sum = 0.0f;
    for (float w : class_weights) {
        require(w >= 0.0f, "MNetConfig: class weights must be non-negative");
        sum += w;
    }
    require(sum > 0.0f, "MNetConfig: class weights sum to zero");
    for (float& w : class_weights) w /= sum;
    // pin the normalized sum to exactly 1
    float head = 0.0f;
    for (std::size_t k = 0; k + 1 < class_weights.size(); ++k) head += class_weights[k];
    class_weights.back() = 1.0f - head;
}

namespace {

std::string scale_name(const char* prefix, int s) { return std::string(prefix) + std::to_string(s); }

}  // namespace

MNet build_mnet(MNetConfig cfg) {
    cfg.validate_and_normalize();
    MNet net;
    net.cfg = cfg;
    LayerGraph& g = net.graph;

    const int D = cfg.depth;
    const int K = cfg.num_classes;
    auto width = [&](int s) { return cfg.base_channels << (s - 1); };

    net.input_node = g.add_input("image");

    // image pyramid nodes, img[s] at 1/2^(s-1) resolution
    std::vector<int> img(D + 1);
    img[1] = net.input_node;
    for (int s = 2; s <= D; ++s)
        img[s] = g.add_avg_pool(scale_name("pyramid", s), img[s - 1], 2);

    auto conv_block = [&](const std::string& name, int input, int ci, int co, int ksize) {
        const int k = g.add_parameter(name + ".kernel", Shape{co, ci, ksize, ksize}, 4);
        const int b = g.add_parameter(name + ".bias", Shape{co, 1, 1, 1}, 1);
        const int c = g.add_conv(name, input, k, b, 1, Padding::Same);
        return g.add_relu(name + ".relu", c);
    };

    // encoder
    std::vector<int> enc(D + 1);
    {
        int x = conv_block("enc1.conv1", net.input_node, cfg.in_channels, width(1), 3);
        enc[1] = conv_block("enc1.conv2", x, width(1), width(1), 3);
    }
    for (int s = 2; s <= D; ++s) {
        const int pooled = g.add_avg_pool(scale_name("enc", s) + ".pool", enc[s - 1], 2);
        const int msi =
            conv_block(scale_name("msi", s) + ".conv", img[s], cfg.in_channels, width(s - 1), 3);
        const int cat = g.add_concat(scale_name("enc", s) + ".concat", pooled, msi);
        int x = conv_block(scale_name("enc", s) + ".conv1", cat, width(s), width(s), 3);
        enc[s] = conv_block(scale_name("enc", s) + ".conv2", x, width(s), width(s), 3);
    }

    // decoder
    std::vector<int> dec(D + 1, -1);
    dec[D] = enc[D];
    for (int s = D - 1; s >= 1; --s) {
        const std::string name = scale_name("dec", s);
        const int up_k =
            g.add_parameter(name + ".up.kernel", Shape{width(s + 1), width(s), 2, 2}, 4);
        const int up = g.add_tconv(name + ".up", dec[s + 1], up_k, 2);
        const int cat = g.add_concat(name + ".concat", up, enc[s]);
        int x = conv_block(name + ".conv1", cat, 2 * width(s), width(s), 3);
        dec[s] = conv_block(name + ".conv2", x, width(s), width(s), 3);
    }

    // side-output heads, deepest first; head m sits at scale D - m + 1
    for (int m = 1; m <= D; ++m) {
        const int s = D - m + 1;
        const int src = (s == D) ? enc[D] : dec[s];
        const std::string name = "side" + std::to_string(m);
        const int pk = g.add_parameter(name + ".proj.kernel", Shape{K, width(s), 1, 1}, 4);
        const int pb = g.add_parameter(name + ".proj.bias", Shape{K, 1, 1, 1}, 1);
        int x = g.add_conv(name + ".proj", src, pk, pb, 1, Padding::Same);
        const int factor = 1 << (s - 1);
        if (factor > 1) {
            // frozen transposed conv stamping each pixel into a factor^2 block
            // == nearest-neighbor upsampling
            const int uk = g.add_parameter(name + ".up.kernel", Shape{K, K, factor, factor}, 4,
                                           /*trainable=*/false);
            Tensor& kv = g.params()[uk].value;
            for (int c = 0; c < K; ++c)
                for (int y = 0; y < factor; ++y)
                    for (int xx = 0; xx < factor; ++xx) kv.at(c, c, y, xx) = 1.0f;
            x = g.add_tconv(name + ".up", x, uk, factor);
        }
        net.side_nodes.push_back(g.add_sigmoid(name + ".sigmoid", x));
    }

    net.fused_node = g.add_mean_fuse("fused", net.side_nodes);
    return net;
}

void init_parameters(LayerGraph& graph, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (Parameter& p : graph.params()) {
        if (!p.trainable) continue;
        if (p.rank == 1) {
            std::fill(p.value.data.begin(), p.value.data.end(), 0.0f);
            continue;
        }
        const Shape& s = p.value.shape;
        const float fan_in = static_cast<float>(s.c) * s.h * s.w;
        const float std_dev = std::sqrt(2.0f / fan_in);
        for (float& v : p.value.data) v = normal(rng) * std_dev;
    }
}

std::vector<Tensor> multi_scale_inputs(const Tensor& image, int depth) {
    require(depth >= 1, "multi_scale_inputs: depth must be >= 1");
    const int factor = 1 << (depth - 1);
    require(image.shape.h % factor == 0 && image.shape.w % factor == 0,
            "multi_scale_inputs: spatial size " + std::to_string(image.shape.h) + "x" +
                std::to_string(image.shape.w) + " is not divisible by 2^(depth-1) = " +
                std::to_string(factor));
    std::vector<Tensor> pyramid;
    pyramid.reserve(depth);
    pyramid.push_back(image);
    for (int s = 1; s < depth; ++s) pyramid.push_back(ops::avg_pool2d(pyramid.back(), 2));
    return pyramid;
}

MNetForward mnet_forward(const MNet& net, const Tensor& image) {
    require(image.shape.c == net.cfg.in_channels && image.shape.h == net.cfg.input_size &&
                image.shape.w == net.cfg.input_size,
            "mnet_forward: input " + to_string(image.shape) + " does not match config (" +
                std::to_string(net.cfg.in_channels) + " channels, size " +
                std::to_string(net.cfg.input_size) + ")");
    MNetForward out;
    out.fwd = net.graph.forward(image);
    out.side_maps.reserve(net.side_nodes.size());
    for (int id : net.side_nodes) out.side_maps.push_back(out.fwd.acts[id]);
    out.fused = out.fwd.acts[net.fused_node];
    return out;
}

Tensor image_to_tensor(const Image& img) {
    Tensor t(Shape{1, img.channels, img.height, img.width});
    std::copy(img.pix.begin(), img.pix.end(), t.data.begin());
    return t;
}

Image tensor_to_image(const Tensor& t, int batch_index) {
    require(batch_index >= 0 && batch_index < t.shape.n, "tensor_to_image: batch out of range");
    Image img(t.shape.c, t.shape.h, t.shape.w);
    const float* src = t.plane(batch_index, 0);
    std::copy(src, src + img.pix.size(), img.pix.begin());
    return img;
}

}  // namespace polarseg
