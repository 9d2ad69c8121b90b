#include "polarseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace polarseg {

RunConfig default_run_config() {
    RunConfig rc;
    rc.model.depth = 3;
    rc.model.base_channels = 8;
    rc.model.input_size = 128;
    return rc;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int r = std::stoi(v, &used);
        require(used == v.size(), "");
        return r;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        require(used == v.size(), "");
        return r;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<float> to_float_list(const std::string& key, const std::string& v) {
    std::vector<float> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<float>(to_double(key, item)));
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string fmt_list(const std::vector<float>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt(v[i]);
    }
    return out;
}

}  // namespace

void set_config_key(RunConfig& rc, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "model.depth") rc.model.depth = to_int(key, v);
    else if (key == "model.base_channels") rc.model.base_channels = to_int(key, v);
    else if (key == "model.input_size") rc.model.input_size = to_int(key, v);
    else if (key == "model.in_channels") rc.model.in_channels = to_int(key, v);
    else if (key == "model.num_classes") rc.model.num_classes = to_int(key, v);
    else if (key == "model.side_alpha") rc.model.side_alpha = to_float_list(key, v);
    else if (key == "model.class_weights") rc.model.class_weights = to_float_list(key, v);
    else if (key == "model.fused_loss_weight")
        rc.model.fused_loss_weight = static_cast<float>(to_double(key, v));
    else if (key == "train.lr0") rc.train.lr0 = static_cast<float>(to_double(key, v));
    else if (key == "train.momentum") rc.train.momentum = static_cast<float>(to_double(key, v));
    else if (key == "train.iterations") rc.train.iterations = to_int(key, v);
    else if (key == "train.batch_size") rc.train.batch_size = to_int(key, v);
    else if (key == "train.decay_power")
        rc.train.decay_power = static_cast<float>(to_double(key, v));
    else if (key == "train.lr_floor") rc.train.lr_floor = static_cast<float>(to_double(key, v));
    else if (key == "train.seed") rc.train.seed = static_cast<std::uint32_t>(to_int(key, v));
    else if (key == "polar.enabled") rc.polar_enabled = to_bool(key, v);
    else if (key == "polar.radius") rc.polar_radius = to_double(key, v);
    else if (key == "polar.angular_bins") rc.polar_angular_bins = to_int(key, v);
    else if (key == "polar.radial_bins") rc.polar_radial_bins = to_int(key, v);
    else if (key == "segment.threshold") rc.threshold = static_cast<float>(to_double(key, v));
    else if (key == "synth.size") rc.synth.size = to_int(key, v);
    else if (key == "synth.count") rc.synth_count = to_int(key, v);
    else if (key == "synth.seed") rc.synth.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "synth.noise_sigma") rc.synth.noise_sigma = to_double(key, v);
    else if (key == "synth.disc_a_min") rc.synth.disc_a_min = to_double(key, v);
    else if (key == "synth.disc_a_max") rc.synth.disc_a_max = to_double(key, v);
    else if (key == "synth.axis_ratio_min") rc.synth.axis_ratio_min = to_double(key, v);
    else if (key == "synth.cdr_min") rc.synth.cdr_min = to_double(key, v);
    else if (key == "synth.cdr_max") rc.synth.cdr_max = to_double(key, v);
    else if (key == "synth.center_jitter") rc.synth.center_jitter = to_double(key, v);
    else if (key == "synth.cup_offset_max") rc.synth.cup_offset_max = to_double(key, v);
    else if (key == "synth.vessel_min") rc.synth.vessel_min = to_int(key, v);
    else if (key == "synth.vessel_max") rc.synth.vessel_max = to_int(key, v);
    else if (key == "screen.cutoff") rc.screen_cutoff = to_double(key, v);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    require(in.good(), "cannot read config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        require(eq != std::string::npos,
                path + ":" + std::to_string(lineno) + ": expected key=value");
        set_config_key(base, trim(t.substr(0, eq)), t.substr(eq + 1));
    }
    return base;
}

std::string format_config(const RunConfig& rc) {
    std::ostringstream out;
    out << "model.depth=" << rc.model.depth << "\n";
    out << "model.base_channels=" << rc.model.base_channels << "\n";
    out << "model.input_size=" << rc.model.input_size << "\n";
    out << "model.in_channels=" << rc.model.in_channels << "\n";
    out << "model.num_classes=" << rc.model.num_classes << "\n";
    out << "model.side_alpha=" << fmt_list(rc.model.side_alpha) << "\n";
    out << "model.class_weights=" << fmt_list(rc.model.class_weights) << "\n";
    out << "model.fused_loss_weight=" << fmt(rc.model.fused_loss_weight) << "\n";
    out << "train.lr0=" << fmt(rc.train.lr0) << "\n";
    out << "train.momentum=" << fmt(rc.train.momentum) << "\n";
    out << "train.iterations=" << rc.train.iterations << "\n";
    out << "train.batch_size=" << rc.train.batch_size << "\n";
    out << "train.decay_power=" << fmt(rc.train.decay_power) << "\n";
    out << "train.lr_floor=" << fmt(rc.train.lr_floor) << "\n";
    out << "train.seed=" << rc.train.seed << "\n";
    out << "polar.enabled=" << (rc.polar_enabled ? 1 : 0) << "\n";
    out << "polar.radius=" << fmt(rc.polar_radius) << "\n";
    out << "polar.angular_bins=" << rc.polar_angular_bins << "\n";
    out << "polar.radial_bins=" << rc.polar_radial_bins << "\n";
    out << "segment.threshold=" << fmt(rc.threshold) << "\n";
    out << "synth.size=" << rc.synth.size << "\n";
    out << "synth.count=" << rc.synth_count << "\n";
    out << "synth.seed=" << rc.synth.seed << "\n";
    out << "synth.noise_sigma=" << fmt(rc.synth.noise_sigma) << "\n";
    out << "synth.disc_a_min=" << fmt(rc.synth.disc_a_min) << "\n";
    out << "synth.disc_a_max=" << fmt(rc.synth.disc_a_max) << "\n";
    out << "synth.axis_ratio_min=" << fmt(rc.synth.axis_ratio_min) << "\n";
    out << "synth.cdr_min=" << fmt(rc.synth.cdr_min) << "\n";
    out << "synth.cdr_max=" << fmt(rc.synth.cdr_max) << "\n";
    out << "synth.center_jitter=" << fmt(rc.synth.center_jitter) << "\n";
    out << "synth.cup_offset_max=" << fmt(rc.synth.cup_offset_max) << "\n";
    out << "synth.vessel_min=" << rc.synth.vessel_min << "\n";
    out << "synth.vessel_max=" << rc.synth.vessel_max << "\n";
    out << "screen.cutoff=" << fmt(rc.screen_cutoff) << "\n";
    return out.str();
}

void write_config_file(const std::string& path, const RunConfig& rc) {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    out << format_config(rc);
}

}  // namespace polarseg
