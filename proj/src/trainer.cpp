#include "polarseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "polarseg/weights_io.hpp"

namespace polarseg {

void TrainConfig::validate() const {
    require(lr0 > 0.0f, "TrainConfig: lr0 must be positive");
    require(momentum >= 0.0f && momentum < 1.0f, "TrainConfig: momentum must be in [0,1)");
    require(iterations >= 1, "TrainConfig: iterations must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(decay_power >= 0.0f, "TrainConfig: decay_power must be >= 0");
    require(lr_floor >= 0.0f && lr_floor <= 1.0f, "TrainConfig: lr_floor must be in [0,1]");
}

OptState make_opt_state(const LayerGraph& graph) {
    OptState st;
    st.velocity.reserve(graph.params().size());
    for (const Parameter& p : graph.params()) st.velocity.emplace_back(p.value.shape);
    return st;
}

void sgd_momentum_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads,
                       OptState& state, float lr, float momentum) {
    require(params.size() == grads.size() && params.size() == state.velocity.size(),
            "sgd_momentum_step: parameter/gradient/state misalignment");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (!p.trainable) continue;
        const Tensor& g = grads[i];
        require(g.shape == p.value.shape, "sgd_momentum_step: gradient shape mismatch for '" +
                                              p.name + "'");
        Tensor& v = state.velocity[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            if (!std::isfinite(g.data[j]))
                throw std::runtime_error("sgd_momentum_step: non-finite gradient in parameter '" +
                                         p.name + "'");
            v.data[j] = momentum * v.data[j] - lr * g.data[j];
            p.value.data[j] += v.data[j];
        }
    }
}

float lr_schedule(long step, long total_steps, const TrainConfig& cfg) {
    require(step >= 0, "lr_schedule: negative step");
    if (total_steps <= 0) return cfg.lr0;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    const double decayed = std::pow(1.0 - frac, static_cast<double>(cfg.decay_power));
    return cfg.lr0 * static_cast<float>(std::max(static_cast<double>(cfg.lr_floor), decayed));
}

long steps_per_epoch(std::size_t num_samples, int batch_size) {
    return static_cast<long>((num_samples + batch_size - 1) / batch_size);
}

namespace {

// Stateless per-epoch permutation so a resumed run shuffles identically.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint32_t seed, long epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::seed_seq seq{seed, static_cast<std::uint32_t>(epoch),
                      static_cast<std::uint32_t>(0x9e3779b9u)};
    std::mt19937 rng(seq);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

Tensor stack_batch(const std::vector<TrainSample>& data, const std::vector<std::size_t>& idx,
                   bool target) {
    const Tensor& first = target ? data[idx[0]].target : data[idx[0]].input;
    Shape s = first.shape;
    s.n = static_cast<int>(idx.size());
    Tensor out(s);
    const std::size_t item = first.size();
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const Tensor& src = target ? data[idx[b]].target : data[idx[b]].input;
        require(src.shape == first.shape, "train: inconsistent sample shapes");
        std::copy(src.data.begin(), src.data.end(), out.data.begin() + b * item);
    }
    return out;
}

}  // namespace

TrainLog train(MNet& net, const std::vector<TrainSample>& data, const TrainConfig& cfg,
               OptState& state, long start_step, long stop_step) {
    cfg.validate();
    require(!data.empty(), "train: empty dataset");
    require(state.velocity.size() == net.graph.params().size(),
            "train: optimizer state does not match the model");

    const long spe = steps_per_epoch(data.size(), cfg.batch_size);
    const long total_steps = spe * cfg.iterations;
    const long stop = stop_step < 0 ? total_steps : std::min(stop_step, total_steps);
    require(start_step >= 0 && start_step <= stop, "train: bad step range");

    TrainLog log;
    log.first_step = start_step;

    long cached_epoch = -1;
    std::vector<std::size_t> perm;
    std::vector<Tensor> param_grads = net.graph.make_param_grads();
    std::vector<Tensor> side_grads;

    for (long step = start_step; step < stop; ++step) {
        const long epoch = step / spe;
        const long pos = step % spe;
        if (epoch != cached_epoch) {
            perm = epoch_permutation(data.size(), cfg.seed, epoch);
            cached_epoch = epoch;
        }
        std::vector<std::size_t> batch;
        for (long i = pos * cfg.batch_size;
             i < std::min<long>(static_cast<long>(data.size()), (pos + 1) * cfg.batch_size); ++i)
            batch.push_back(perm[static_cast<std::size_t>(i)]);

        const Tensor input = stack_batch(data, batch, false);
        const Tensor target = stack_batch(data, batch, true);

        LayerGraph::Forward fwd = net.graph.forward(input);
        std::vector<Tensor> side_maps;
        side_maps.reserve(net.side_nodes.size());
        for (int id : net.side_nodes) side_maps.push_back(fwd.acts[id]);
        const Tensor& fused = fwd.acts[net.fused_node];

        LossReport report =
            side_output_objective(side_maps, &fused, target, net.cfg.side_alpha,
                                  net.cfg.class_weights, &side_grads);

        std::vector<std::pair<int, Tensor>> seeds;
        for (std::size_t m = 0; m < side_maps.size(); ++m)
            seeds.emplace_back(net.side_nodes[m], std::move(side_grads[m]));
        if (net.cfg.fused_loss_weight > 0.0f) {
            Tensor gf = dice_multilabel_grad(fused, target, net.cfg.class_weights);
            for (float& v : gf.data) v *= net.cfg.fused_loss_weight;
            report.total += net.cfg.fused_loss_weight *
                            dice_multilabel_loss(fused, target, net.cfg.class_weights);
            seeds.emplace_back(net.fused_node, std::move(gf));
        }

        for (Tensor& g : param_grads) std::fill(g.data.begin(), g.data.end(), 0.0f);
        net.graph.backward(fwd, seeds, param_grads);

        sgd_momentum_step(net.graph.params(), param_grads, state,
                          lr_schedule(step, total_steps, cfg), cfg.momentum);
        log.per_step.push_back(std::move(report));
    }
    return log;
}

namespace {

nlohmann::json mnet_cfg_to_json(const MNetConfig& cfg) {
    return nlohmann::json{{"depth", cfg.depth},
                          {"base_channels", cfg.base_channels},
                          {"input_size", cfg.input_size},
                          {"in_channels", cfg.in_channels},
                          {"num_classes", cfg.num_classes},
                          {"side_alpha", cfg.side_alpha},
                          {"class_weights", cfg.class_weights},
                          {"fused_loss_weight", cfg.fused_loss_weight}};
}

MNetConfig mnet_cfg_from_json(const nlohmann::json& j) {
    MNetConfig cfg;
    cfg.depth = j.at("depth").get<int>();
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.input_size = j.at("input_size").get<int>();
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.side_alpha = j.at("side_alpha").get<std::vector<float>>();
    cfg.class_weights = j.at("class_weights").get<std::vector<float>>();
    cfg.fused_loss_weight = j.at("fused_loss_weight").get<float>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& prefix, const MNet& net, const OptState& state,
                     const TrainConfig& cfg, long step) {
    save_parameters(prefix + ".weights.bin", net.graph.params());
    std::vector<Parameter> vel;
    vel.reserve(state.velocity.size());
    for (std::size_t i = 0; i < state.velocity.size(); ++i) {
        Parameter p;
        p.name = net.graph.params()[i].name;
        p.rank = net.graph.params()[i].rank;
        p.trainable = net.graph.params()[i].trainable;
        p.value = state.velocity[i];
        vel.push_back(std::move(p));
    }
    save_parameters(prefix + ".velocity.bin", vel);

    nlohmann::json meta{{"format", "polarseg-checkpoint-v1"},
                        {"step", step},
                        {"model", mnet_cfg_to_json(net.cfg)},
                        {"train",
                         {{"lr0", cfg.lr0},
                          {"momentum", cfg.momentum},
                          {"iterations", cfg.iterations},
                          {"batch_size", cfg.batch_size},
                          {"decay_power", cfg.decay_power},
                          {"lr_floor", cfg.lr_floor},
                          {"seed", cfg.seed}}}};
    std::ofstream out(prefix + ".meta.json");
    require(out.good(), "cannot write " + prefix + ".meta.json");
    out << meta.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& prefix) {
    std::ifstream in(prefix + ".meta.json");
    require(in.good(), "cannot read " + prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    require(meta.value("format", "") == "polarseg-checkpoint-v1",
            prefix + ".meta.json: unknown checkpoint format");

    LoadedCheckpoint ck;
    ck.step = meta.at("step").get<long>();
    ck.net = build_mnet(mnet_cfg_from_json(meta.at("model")));
    const auto& t = meta.at("train");
    ck.train_cfg.lr0 = t.at("lr0").get<float>();
    ck.train_cfg.momentum = t.at("momentum").get<float>();
    ck.train_cfg.iterations = t.at("iterations").get<int>();
    ck.train_cfg.batch_size = t.at("batch_size").get<int>();
    ck.train_cfg.decay_power = t.at("decay_power").get<float>();
    ck.train_cfg.lr_floor = t.at("lr_floor").get<float>();
    ck.train_cfg.seed = t.at("seed").get<std::uint32_t>();

    apply_parameters(ck.net.graph, load_parameters(prefix + ".weights.bin"));
    ck.state = make_opt_state(ck.net.graph);
    const auto vel = load_parameters(prefix + ".velocity.bin");
    for (std::size_t i = 0; i < ck.net.graph.params().size(); ++i) {
        const std::string& name = ck.net.graph.params()[i].name;
        const LoadedParam* found = nullptr;
        for (const LoadedParam& lp : vel)
            if (lp.name == name) {
                found = &lp;
                break;
            }
        require(found && found->data.size() == ck.state.velocity[i].size(),
                "checkpoint: velocity record missing or misshaped for '" + name + "'");
        std::copy(found->data.begin(), found->data.end(), ck.state.velocity[i].data.begin());
    }
    return ck;
}

}  // namespace polarseg
