#pragma once

#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mg/components.hpp"
#include "mg/control.hpp"
#include "mg/profiles.hpp"
#include "mg/trace.hpp"

namespace mg {

struct SimConfig {
    enum class Mode { Energy, Transient };

    Mode mode = Mode::Energy;
    double dt = 1.0;          // s
    double duration = 0;      // s
    bool realtime_pacing = false;
    long seed = 0;
    double v_grid_setpoint = 100.0; // V
    double bus_capacitance = 0.01558; // F, transient mode
    double droop_v_per_w = 0.05;      // V per W of unabsorbed residual
    double settle_window = 5.0;       // s, transient recovery budget

    void validate() const;
};

struct BessNode {
    int id = 0;
    BatteryParams params{};
    BatteryState state{};
    ConverterRating converter{};
    ConverterMode mode = ConverterMode::idle();
    PiState pi{};
};

struct InjectionCommand {
    std::string path;
    double value = 0;
    double apply_at = 0; // s
};

struct World {
    SimConfig sim;
    PvArrayConfig pv;
    std::vector<BessNode> nodes;

    bool supercap_enabled = false;
    SupercapParams sc_params{100.0, 0.01, 100.0};
    SupercapState sc_state{};
    ScRegulatorConfig sc_cfg{};
    PiState sc_pi{};

    FlexLoadConfig flex{};

    std::optional<LoadProfile> load_profile;
    std::optional<EnvProfile> env_profile;

    // runtime-mutable parameters (injection targets)
    std::optional<double> irradiance_override;
    std::optional<double> temperature_override; // K
    std::optional<double> nonflex_power_override;
    double nonflex_current = 0; // A, used when no load profile/override

    // transient-mode state
    MpptState mppt{};
    // A constant-power load P at bus voltage V looks like a negative
    // conductance P/V^2 (0.5 S at 5 kW / 100 V), so the voltage loop's
    // proportional gain must comfortably exceed that to hold the bus.
    PiConfig cv_pi{5.0, 100.0, -50.0, 50.0};
    int mppt_every_steps = 1;
    int mppt_counter = 0;

    double v_grid = 100.0;
    bool islanding_fault = false;
    double t = 0;
    std::vector<std::string> events;

    double irradiance() const;    // W/m^2 at current t
    double temperature_k() const; // K at current t
    double nonflex_power(double v_bus) const;
};

// Builds derived state (MPPT bounds, supercap init, CV seed on node 0).
void finish_world_setup(World& w);

std::vector<std::string> injection_paths(int node_count);

// Throws std::invalid_argument for unknown paths (listing valid ones) or
// out-of-range values.
void apply_injection(World& w, const InjectionCommand& cmd);
void check_injection(const InjectionCommand& cmd, int node_count);

// Re-seats the CV role when the holder runs out of headroom in the
// direction the residual demands. Sets or clears the islanding fault.
void designate_cv(World& w, double residual_w);

StepRecord step_energy(World& w, double dt);
StepRecord step_transient(World& w, double dt);

// Quantities the dispatch would see this step, before any node acts.
struct BalancePreview {
    double p_pv = 0;
    double p_nonflex = 0;
    double p_flex = 0;
    double surplus() const { return p_pv - p_nonflex - p_flex; }
};
BalancePreview balance_preview(const World& w);

class InjectionQueue {
  public:
    void push(InjectionCommand cmd);
    std::vector<InjectionCommand> drain();

  private:
    std::mutex mu_;
    std::deque<InjectionCommand> q_;
};

struct RunHooks {
    // Called at every step boundary after injections, before stepping.
    std::function<void(World&, const BalancePreview&)> on_step_begin;
    // Called after each step with the fresh record.
    std::function<void(const StepRecord&, const World&)> on_record;
    std::function<bool()> cancelled;
    InjectionQueue* live_injections = nullptr;
};

struct RunResult {
    Trace trace;
    std::vector<std::string> events;
};

// Fixed-step loop; identical inputs produce bit-identical traces.
// Real-time pacing only sleeps, it never changes the numbers.
RunResult run(World world, std::vector<InjectionCommand> injections,
              const RunHooks& hooks = {});

} // namespace mg
