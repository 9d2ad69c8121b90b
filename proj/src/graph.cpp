#include "polarseg/graph.hpp"

#include <span>

namespace polarseg {

int LayerGraph::add_parameter(std::string name, Shape shape, int rank, bool trainable) {
    require(find_param(name) < 0, "duplicate parameter name '" + name + "'");
    Parameter p;
    p.name = std::move(name);
    p.value = Tensor(shape);
    p.rank = rank;
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

int LayerGraph::push_node(OpNode n) {
    for (int in : n.inputs)
        require(in >= 0 && in < static_cast<int>(nodes_.size()),
                "graph node '" + n.name + "' references a later node");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int LayerGraph::add_input(std::string name) {
    require(nodes_.empty(), "graph already has an input node");
    OpNode n;
    n.kind = OpKind::Input;
    n.name = std::move(name);
    return push_node(std::move(n));
}

int LayerGraph::add_conv(std::string name, int input, int kernel, int bias, int stride,
                         Padding pad) {
    OpNode n;
    n.kind = OpKind::Conv;
    n.name = std::move(name);
    n.inputs = {input};
    n.kernel = kernel;
    n.bias = bias;
    n.stride = stride;
    n.pad = pad;
    return push_node(std::move(n));
}

int LayerGraph::add_tconv(std::string name, int input, int kernel, int stride) {
    OpNode n;
    n.kind = OpKind::TConv;
    n.name = std::move(name);
    n.inputs = {input};
    n.kernel = kernel;
    n.stride = stride;
    return push_node(std::move(n));
}

int LayerGraph::add_relu(std::string name, int input) {
    OpNode n;
    n.kind = OpKind::Relu;
    n.name = std::move(name);
    n.inputs = {input};
    return push_node(std::move(n));
}

int LayerGraph::add_sigmoid(std::string name, int input) {
    OpNode n;
    n.kind = OpKind::Sigmoid;
    n.name = std::move(name);
    n.inputs = {input};
    return push_node(std::move(n));
}

int LayerGraph::add_avg_pool(std::string name, int input, int window) {
    OpNode n;
    n.kind = OpKind::AvgPool;
    n.name = std::move(name);
    n.inputs = {input};
    n.window = window;
    return push_node(std::move(n));
}

int LayerGraph::add_concat(std::string name, int a, int b) {
    OpNode n;
    n.kind = OpKind::Concat;
    n.name = std::move(name);
    n.inputs = {a, b};
    return push_node(std::move(n));
}

int LayerGraph::add_mean_fuse(std::string name, std::vector<int> inputs) {
    OpNode n;
    n.kind = OpKind::MeanFuse;
    n.name = std::move(name);
    n.inputs = std::move(inputs);
    return push_node(std::move(n));
}

int LayerGraph::find_param(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return static_cast<int>(i);
    return -1;
}

LayerGraph::Forward LayerGraph::forward(const Tensor& image) const {
    require(!nodes_.empty() && nodes_[0].kind == OpKind::Input, "graph has no input node");
    Forward fwd;
    fwd.acts.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const OpNode& n = nodes_[i];
        switch (n.kind) {
            case OpKind::Input:
                fwd.acts[i] = image;
                break;
            case OpKind::Conv: {
                const Parameter& k = params_[n.kernel];
                std::span<const float> bias;
                if (n.bias >= 0)
                    bias = std::span<const float>(params_[n.bias].value.data);
                fwd.acts[i] = ops::conv2d(fwd.acts[n.inputs[0]], k.value, bias, n.stride, n.pad);
                break;
            }
            case OpKind::TConv:
                fwd.acts[i] =
                    ops::transposed_conv2d(fwd.acts[n.inputs[0]], params_[n.kernel].value,
                                           n.stride);
                break;
            case OpKind::Relu:
                fwd.acts[i] = ops::relu(fwd.acts[n.inputs[0]]);
                break;
            case OpKind::Sigmoid:
                fwd.acts[i] = ops::sigmoid(fwd.acts[n.inputs[0]]);
                break;
            case OpKind::AvgPool:
                fwd.acts[i] = ops::avg_pool2d(fwd.acts[n.inputs[0]], n.window);
                break;
            case OpKind::Concat:
                fwd.acts[i] =
                    ops::concat_channels(fwd.acts[n.inputs[0]], fwd.acts[n.inputs[1]]);
                break;
            case OpKind::MeanFuse: {
                std::vector<const Tensor*> maps;
                maps.reserve(n.inputs.size());
                for (int in : n.inputs) maps.push_back(&fwd.acts[in]);
                fwd.acts[i] = ops::mean_fuse(maps);
                break;
            }
        }
    }
    return fwd;
}

std::vector<Tensor> LayerGraph::make_param_grads() const {
    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (const Parameter& p : params_) grads.emplace_back(p.value.shape);
    return grads;
}

void LayerGraph::backward(const Forward& fwd, const std::vector<std::pair<int, Tensor>>& seeds,
                          std::vector<Tensor>& param_grads) const {
    require(param_grads.size() == params_.size(),
            "backward: param_grads not aligned with parameters");
    std::vector<Tensor> node_grad(nodes_.size());
    std::vector<bool> live(nodes_.size(), false);
    auto grad_of = [&](int id) -> Tensor& {
        if (!live[id]) {
            node_grad[id] = Tensor(fwd.acts[id].shape);
            live[id] = true;
        }
        return node_grad[id];
    };
    for (const auto& [id, g] : seeds) {
        require(id >= 0 && id < static_cast<int>(nodes_.size()), "backward: bad seed node");
        require(g.shape == fwd.acts[id].shape,
                "backward: seed gradient shape " + to_string(g.shape) +
                    " does not match activation " + to_string(fwd.acts[id].shape));
        Tensor& dst = grad_of(id);
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
    }

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        if (!live[i]) continue;
        const OpNode& n = nodes_[i];
        const Tensor& gout = node_grad[i];
        switch (n.kind) {
            case OpKind::Input:
                break;  // the image takes no gradient
            case OpKind::Conv: {
                const int in = n.inputs[0];
                const bool need_gx = nodes_[in].kind != OpKind::Input;
                Tensor* gx = need_gx ? &grad_of(in) : nullptr;
                Tensor* gk = &param_grads[n.kernel];
                std::vector<float>* gb = n.bias >= 0 ? &param_grads[n.bias].data : nullptr;
                ops::conv2d_backward(gout, fwd.acts[in], params_[n.kernel].value, n.stride,
                                     n.pad, gx, gk, gb);
                break;
            }
            case OpKind::TConv: {
                const int in = n.inputs[0];
                ops::transposed_conv2d_backward(gout, fwd.acts[in], params_[n.kernel].value,
                                                n.stride, &grad_of(in),
                                                params_[n.kernel].trainable
                                                    ? &param_grads[n.kernel]
                                                    : nullptr);
                break;
            }
            case OpKind::Relu:
                ops::relu_backward(gout, fwd.acts[n.inputs[0]], &grad_of(n.inputs[0]));
                break;
            case OpKind::Sigmoid:
                ops::sigmoid_backward(gout, fwd.acts[i], &grad_of(n.inputs[0]));
                break;
            case OpKind::AvgPool:
                ops::avg_pool2d_backward(gout, n.window, &grad_of(n.inputs[0]));
                break;
            case OpKind::Concat:
                ops::concat_channels_backward(gout, fwd.acts[n.inputs[0]].shape.c,
                                              &grad_of(n.inputs[0]), &grad_of(n.inputs[1]));
                break;
            case OpKind::MeanFuse: {
                std::vector<Tensor*> gmaps;
                gmaps.reserve(n.inputs.size());
                for (int in : n.inputs) gmaps.push_back(&grad_of(in));
                ops::mean_fuse_backward(gout, n.inputs.size(), gmaps);
                break;
            }
        }
    }
}

std::size_t LayerGraph::parameter_count(bool trainable_only) const {
    std::size_t total = 0;
    for (const Parameter& p : params_)
        if (!trainable_only || p.trainable) total += p.value.size();
    return total;
}

}  // namespace polarseg
