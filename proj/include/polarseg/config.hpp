#pragma once

// Flat key=value run configuration merging model, training, polar and
// synthesis settings. Unknown keys are rejected; every command writes its
// fully resolved configuration next to its outputs so a run can be repeated
// exactly.

#include <string>

#include "polarseg/mnet.hpp"
#include "polarseg/synth.hpp"
#include "polarseg/trainer.hpp"

namespace polarseg {

struct RunConfig {
    MNetConfig model;
    TrainConfig train;
    bool polar_enabled = true;
    double polar_radius = 56.0;
    int polar_angular_bins = 128;
    int polar_radial_bins = 128;
    float threshold = 0.5f;
    SynthSpec synth;
    int synth_count = 200;
    double screen_cutoff = 0.6;
};

// Desk-scale defaults (depth 3, 8 base channels, 128 px inputs).
RunConfig default_run_config();

// Throws for unknown keys or unparseable values.
void set_config_key(RunConfig& rc, const std::string& key, const std::string& value);

// Applies the file on top of base; '#' starts a comment line.
RunConfig load_config_file(const std::string& path, RunConfig base);

std::string format_config(const RunConfig& rc);
void write_config_file(const std::string& path, const RunConfig& rc);

}  // namespace polarseg
