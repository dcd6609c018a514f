#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mg/orchestrator.hpp"
#include "mg/sim.hpp"

namespace mg {

struct InterchangeConfig {
    bool enabled = false;
    int base_port = 44380;
    double status_interval = 1.0; // s, sim time
    double i_max = 50.0;
    double v_max = 120.0;
};

struct NodeInit {
    double capacity_ah = 100.0;
    double ocv = 100.0;
    double internal_r = 0.05;
    double soc_min = 0.1;
    double soc_max = 0.95;
    double converter_rating = 5000.0;
    std::vector<double> soc_init; // one value, or one per node
    int count = 4;
};

struct ScenarioConfig {
    SimConfig sim;
    struct {
        int series = 3;
        int parallel = 10;
        double rated_power = 5000.0;
        double rated_voltage = 69.0;
    } pv;
    NodeInit nodes;
    struct {
        bool enabled = false;
        double capacitance = 100.0;
        double esr = 0.01;
        double v_init = 100.0;
        double i_max = 100.0;
        double kp = 10.0;
        double ki = 100.0;
        double deadband = 1.0;
    } supercap;
    FlexLoadConfig flex{FlexMode::Disabled, 0.0, 5000.0};
    std::filesystem::path load_profile; // empty = none
    std::filesystem::path env_profile;
    std::vector<InjectionCommand> injections;
    InterchangeConfig interchange;

    void validate() const;
};

// INI-style scenario file: [section] headers, key = value lines, strict
// unknown-key rejection. Relative profile paths resolve against the
// scenario file's directory.
ScenarioConfig parse_scenario(const std::filesystem::path& file);

// Applies one "section.key=value" override on top of a parsed scenario.
void apply_override(ScenarioConfig& cfg, const std::string& key,
                    const std::string& value);

World build_world(const ScenarioConfig& cfg);

OrchestratorPolicy orchestrator_policy(const ScenarioConfig& cfg);

} // namespace mg
