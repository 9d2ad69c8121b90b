#pragma once

// A small static DAG of parameterized operations. Nodes are stored in
// topological order (builders enforce it), forward caches one activation per
// node, and backward walks the order in reverse, accumulating parameter
// gradients into caller-owned buffers. A built graph is immutable during
// forward, so concurrent forward passes over one graph are safe.

#include <string>
#include <utility>
#include <vector>

#include "polarseg/ops.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class OpKind { Input, Conv, TConv, Relu, Sigmoid, AvgPool, Concat, MeanFuse };

struct OpNode {
    OpKind kind = OpKind::Input;
    std::string name;
    std::vector<int> inputs;  // node ids, all smaller than this node's id
    int kernel = -1;          // parameter id, Conv/TConv
    int bias = -1;            // parameter id, Conv only
    int stride = 1;
    int window = 2;           // AvgPool
    Padding pad = Padding::Same;
};

struct Parameter {
    std::string name;
    Tensor value;        // biases live in shape (co,1,1,1)
    int rank = 4;        // serialized rank: 4 for kernels, 1 for biases
    bool trainable = true;
};

class LayerGraph {
public:
    struct Forward {
        std::vector<Tensor> acts;  // one activation per node
    };

    int add_parameter(std::string name, Shape shape, int rank, bool trainable = true);
    int add_input(std::string name);
    int add_conv(std::string name, int input, int kernel, int bias, int stride, Padding pad);
    int add_tconv(std::string name, int input, int kernel, int stride);
    int add_relu(std::string name, int input);
    int add_sigmoid(std::string name, int input);
    int add_avg_pool(std::string name, int input, int window);
    int add_concat(std::string name, int a, int b);
    int add_mean_fuse(std::string name, std::vector<int> inputs);

    Forward forward(const Tensor& image) const;

    // Seeds are (node id, d(loss)/d(activation)) pairs. Parameter gradients
    // accumulate into param_grads, which must be shaped like the parameters
    // (see make_param_grads).
    void backward(const Forward& fwd, const std::vector<std::pair<int, Tensor>>& seeds,
                  std::vector<Tensor>& param_grads) const;

    std::vector<Tensor> make_param_grads() const;

    std::size_t parameter_count(bool trainable_only = true) const;

    const std::vector<OpNode>& node_list() const { return nodes_; }
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    int find_param(const std::string& name) const;  // -1 when absent

private:
    int push_node(OpNode n);

    std::vector<OpNode> nodes_;
    std::vector<Parameter> params_;
};

}  // namespace polarseg
