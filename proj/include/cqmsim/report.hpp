#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "analysis.hpp"
#include "config.hpp"

// JSON report documents.  The config echo mirrors the INI keys one-to-one so
// a report alone is enough to rerun the experiment; numbers survive a
// serialize/parse round trip exactly.

namespace cqmsim {

using Json = nlohmann::json;

inline Json config_to_json(const RunConfig& cfg) {
    Json j;
    j["source"] = {{"pulse_period_ns", cfg.source.pulse_period_ns},
                   {"p_pair_per_pulse", cfg.source.p_pair_per_pulse},
                   {"sa_success_prob", cfg.source.sa_success_prob},
                   {"psi_phase_rad", cfg.source.psi_phase_rad},
                   {"depolarization", cfg.source.depolarization}};
    j["cqm"] = {{"cycle_time_ns", cfg.cqm.cycle_time_ns},
                {"eta_cycle", cfg.cqm.eta_cycle},
                {"flip_fidelity", cfg.cqm.flip_fidelity},
                {"delta_per_cycle_rad", cfg.cqm.delta_per_cycle_rad},
                {"pc_rise_ns", cfg.cqm.pc_rise_ns},
                {"pc_fall_ns", cfg.cqm.pc_fall_ns},
                {"tap_reflectivity", cfg.cqm.tap_reflectivity},
                {"injection_flip", cfg.cqm.injection_flip}};
    j["delays"] = {
        {"herald_compensation_ns", cfg.delays.herald_compensation.delay_ns},
        {"herald_compensation_transmission", cfg.delays.herald_compensation.transmission},
        {"herald_compensation_phase_rad", cfg.delays.herald_compensation.birefringent_phase_rad},
        {"passive_memory_ns", cfg.delays.passive_memory.delay_ns},
        {"passive_memory_transmission", cfg.delays.passive_memory.transmission},
        {"passive_memory_phase_rad", cfg.delays.passive_memory.birefringent_phase_rad}};
    j["detectors"] = {{"efficiency_d1", cfg.detectors.d1.efficiency},
                      {"efficiency_d2", cfg.detectors.d2.efficiency},
                      {"efficiency_daux", cfg.detectors.daux.efficiency},
                      {"dark_count_prob_per_window", cfg.detectors.d1.dark_count_prob_per_window}};
    j["run"] = {{"mode", cfg.mode == RunMode::Heralded ? "heralded" : "periodic"},
                {"n_cycles", cfg.n_cycles},
                {"num_pulses", cfg.num_pulses},
                {"seed", cfg.seed},
                {"theta1_deg", cfg.theta1.angle_deg},
                {"theta2_deg", cfg.theta2.angle_deg},
                {"herald_latency_ns", cfg.herald_latency_ns},
                {"divider_k", cfg.divider_k},
                {"acceptance_window_ns", cfg.acceptance_window_ns},
                {"coincidence_window_ns", cfg.coincidence_window_ns}};
    return j;
}

inline RunConfig config_from_json(const Json& j) {
    RunConfig cfg;
    const Json& s = j.at("source");
    cfg.source.pulse_period_ns = s.at("pulse_period_ns");
    cfg.source.p_pair_per_pulse = s.at("p_pair_per_pulse");
    cfg.source.sa_success_prob = s.at("sa_success_prob");
    cfg.source.psi_phase_rad = s.at("psi_phase_rad");
    cfg.source.depolarization = s.at("depolarization");
    const Json& q = j.at("cqm");
    cfg.cqm.cycle_time_ns = q.at("cycle_time_ns");
    cfg.cqm.eta_cycle = q.at("eta_cycle");
    cfg.cqm.flip_fidelity = q.at("flip_fidelity");
    cfg.cqm.delta_per_cycle_rad = q.at("delta_per_cycle_rad");
    cfg.cqm.pc_rise_ns = q.at("pc_rise_ns");
    cfg.cqm.pc_fall_ns = q.at("pc_fall_ns");
    cfg.cqm.tap_reflectivity = q.at("tap_reflectivity");
    cfg.cqm.injection_flip = q.at("injection_flip");
    const Json& d = j.at("delays");
    cfg.delays.herald_compensation.delay_ns = d.at("herald_compensation_ns");
    cfg.delays.herald_compensation.transmission = d.at("herald_compensation_transmission");
    cfg.delays.herald_compensation.birefringent_phase_rad = d.at("herald_compensation_phase_rad");
    cfg.delays.passive_memory.delay_ns = d.at("passive_memory_ns");
    cfg.delays.passive_memory.transmission = d.at("passive_memory_transmission");
    cfg.delays.passive_memory.birefringent_phase_rad = d.at("passive_memory_phase_rad");
    const Json& det = j.at("detectors");
    cfg.detectors.d1.efficiency = det.at("efficiency_d1");
    cfg.detectors.d2.efficiency = det.at("efficiency_d2");
    cfg.detectors.daux.efficiency = det.at("efficiency_daux");
    double dark = det.at("dark_count_prob_per_window");
    cfg.detectors.d1.dark_count_prob_per_window = dark;
    cfg.detectors.d2.dark_count_prob_per_window = dark;
    cfg.detectors.daux.dark_count_prob_per_window = dark;
    const Json& r = j.at("run");
    cfg.mode = r.at("mode") == "periodic" ? RunMode::Periodic : RunMode::Heralded;
    cfg.n_cycles = r.at("n_cycles");
    cfg.num_pulses = r.at("num_pulses");
    cfg.seed = r.at("seed");
    cfg.theta1 = PolarizerSetting(r.at("theta1_deg").get<double>());
    cfg.theta2 = PolarizerSetting(r.at("theta2_deg").get<double>());
    cfg.herald_latency_ns = r.at("herald_latency_ns");
    cfg.divider_k = r.at("divider_k");
    cfg.acceptance_window_ns = r.at("acceptance_window_ns");
    cfg.coincidence_window_ns = r.at("coincidence_window_ns");
    return cfg;
}

inline Json fit_to_json(const FringeFit& fit) {
    return {{"offset", fit.offset},
            {"amplitude", fit.amplitude},
            {"phase_deg", fit.phase_deg},
            {"sigma_phase_deg", std::sqrt(std::max(fit.covariance(2, 2), 0.0))},
            {"weighted_rss", fit.weighted_rss},
            {"degenerate_phase", fit.degenerate_phase},
            {"n_points", fit.n_points}};
}

inline Json visibility_to_json(const VisibilityResult& v) {
    return {{"v", v.v}, {"sigma", v.sigma}};
}

inline Json bell_to_json(const BellResult& b) {
    return {{"s", b.s}, {"sigma_s", b.sigma_s}, {"violated", b.violated}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline Json read_json(const std::filesystem::path& path) {
    return Json::parse(read_text_file(path));
}

}  // namespace cqmsim
