#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "report.hpp"

// Canned experiments: polarizer-sweep calibration, the Bell-test storage run,
// the loss-vs-dwell scaling scan, and a dry schedule feasibility check.  Each
// writes per-curve CSVs, an aggregated plot-ready CSV, oracle prediction
// tables, a JSON report with pass/fail thresholds, and the resolved config.

namespace cqmsim {

enum class PresetName { CalibrateSweep, StoreEntanglement, LossVsN, ScheduleCheck };

inline std::optional<PresetName> parse_preset_name(const std::string& s) {
    if (s == "calibrate-sweep") return PresetName::CalibrateSweep;
    if (s == "store-entanglement") return PresetName::StoreEntanglement;
    if (s == "loss-vs-n") return PresetName::LossVsN;
    if (s == "schedule-check") return PresetName::ScheduleCheck;
    return std::nullopt;
}

struct ExperimentPreset {
    PresetName kind = PresetName::CalibrateSweep;
    std::string name;
    RunConfig base;
    std::vector<double> theta1_grid;
    std::vector<double> theta2_values;
    std::vector<int> n_values;
    std::uint64_t pulses_per_point = 0;
    double coincidence_target = 0.0;  // loss-vs-n sizes its exposure from the oracle
    double trials_scale = 1.0;
};

// Smallest power-of-two clock division whose trigger period clears one full
// stay plus both Pockels edges.
inline std::uint64_t choose_divider(int n_cycles, const CqmParams& cqm,
                                    double pulse_period_ns) {
    double busy = static_cast<double>(n_cycles) * cqm.cycle_time_ns + cqm.pc_rise_ns +
                  cqm.pc_fall_ns;
    std::uint64_t k = 1;
    while (static_cast<double>(k) * pulse_period_ns <= busy) k <<= 1;
    return k;
}

// `base_overridden` marks a user-supplied device config: presets then keep its
// rates and imperfections and only impose experiment structure (mode, dwell
// list, polarizer grids).  Exposure is always owned by the preset and scales
// with trials_scale.
inline ExperimentPreset make_preset(PresetName kind, const RunConfig& base = RunConfig{},
                                    bool base_overridden = false, double trials_scale = 1.0) {
    if (trials_scale <= 0.0)
        throw std::invalid_argument("make_preset: trials_scale must be positive");
    ExperimentPreset p;
    p.kind = kind;
    p.base = base;
    p.trials_scale = trials_scale;
    auto scaled = [&](double nominal, std::uint64_t floor_pulses) {
        return std::max<std::uint64_t>(
            floor_pulses, static_cast<std::uint64_t>(std::llround(nominal * trials_scale)));
    };
    std::vector<double> grid;
    for (int i = 0; i < 18; ++i) grid.push_back(10.0 * i);

    switch (kind) {
        case PresetName::CalibrateSweep:
            p.name = "calibrate-sweep";
            p.base.mode = RunMode::Heralded;
            p.theta1_grid = grid;
            p.theta2_values = {0.0, 45.0};
            p.n_values = {4, 6};
            if (!base_overridden) p.base.source.p_pair_per_pulse = 0.04;
            p.pulses_per_point = scaled(400000.0, 2000);
            break;
        case PresetName::StoreEntanglement:
            p.name = "store-entanglement";
            p.base.mode = RunMode::Periodic;
            p.theta1_grid = grid;
            p.theta2_values = {0.0, 45.0};
            p.n_values = {4, 6};
            if (!base_overridden) {
                p.base.source.p_pair_per_pulse = 0.2;
                p.base.source.depolarization = 0.0625;  // both fringe visibilities ~0.94
            }
            p.pulses_per_point = scaled(4'000'000.0, 4000);
            break;
        case PresetName::LossVsN:
            p.name = "loss-vs-n";
            p.base.mode = RunMode::Heralded;
            p.n_values = {2, 4, 6, 8, 10};
            p.base.theta1 = PolarizerSetting(0.0);
            p.base.theta2 = PolarizerSetting(0.0);  // released fringe peaks at theta1 = theta2
            if (!base_overridden) p.base.source.p_pair_per_pulse = 0.03;
            p.coincidence_target = std::max(50.0, 12500.0 * trials_scale);
            break;
        case PresetName::ScheduleCheck:
            p.name = "schedule-check";
            break;
    }
    return p;
}

inline std::string channel_label(CoincidenceChannel c) {
    return c == CoincidenceChannel::BeforeStorage ? "before_storage" : "after_storage";
}

inline constexpr const char* kCurveCsvHeader = "theta1_deg,coincidences,exposure_pulses,channel";
inline constexpr const char* kPointsCsvHeader =
    "n_cycles,theta2_deg,channel,theta1_deg,coincidences,exposure_pulses";

inline std::string curve_to_csv(const CoincidenceCurve& curve) {
    std::string out = std::string(kCurveCsvHeader) + "\n";
    for (const auto& p : curve.points)
        out += format_double(p.theta1_deg) + "," + std::to_string(p.coincidences) + "," +
               std::to_string(p.exposure_pulses) + "," + channel_label(curve.channel) + "\n";
    return out;
}

// Oracle predictions in the measured-curve schema: fractional expected counts,
// channel tagged with an _oracle suffix.
inline void emit_oracle_table(const RunConfig& config, const std::filesystem::path& path,
                              const std::vector<double>& theta1_grid_deg) {
    std::string out = std::string(kCurveCsvHeader) + "\n";
    for (auto channel : {CoincidenceChannel::BeforeStorage, CoincidenceChannel::AfterStorage}) {
        ExpectedCurve curve = expected_curve(config, config.theta2, channel, theta1_grid_deg);
        for (const auto& [theta, prob] : curve.points)
            out += format_double(theta) + "," +
                   format_double(prob * static_cast<double>(config.num_pulses)) + "," +
                   std::to_string(config.num_pulses) + "," + channel_label(channel) +
                   "_oracle\n";
    }
    write_text_file(path, out);
}

struct PresetOutcome {
    Json report;
    bool passed = false;
};

namespace detail {

struct ThresholdSink {
    Json list = Json::array();
    bool all_ok = true;

    void range(const std::string& name, double value, double lo, double hi) {
        bool ok = value >= lo && value <= hi;
        list.push_back({{"name", name}, {"value", value}, {"min", lo}, {"max", hi}, {"ok", ok}});
        all_ok &= ok;
    }
    void flag(const std::string& name, bool ok, const std::string& detail_msg) {
        list.push_back({{"name", name}, {"detail", detail_msg}, {"ok", ok}});
        all_ok &= ok;
    }
};

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    return out + "\"";
}

inline std::string angle_tag(double deg) {
    std::string s = format_double(deg);
    for (auto& c : s)
        if (c == '.' || c == '-') c = 'p';
    return s;
}

inline void append_long_rows(std::string& out, int n_cycles, const CoincidenceCurve& curve) {
    for (const auto& p : curve.points)
        out += std::to_string(n_cycles) + "," + format_double(curve.theta2_deg) + "," +
               channel_label(curve.channel) + "," + format_double(p.theta1_deg) + "," +
               std::to_string(p.coincidences) + "," + std::to_string(p.exposure_pulses) + "\n";
}

}  // namespace detail

inline PresetOutcome run_preset(const ExperimentPreset& preset,
                                const std::filesystem::path& out_dir, unsigned threads = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    Json report;
    report["preset"] = preset.name;
    report["seed"] = preset.base.seed;
    report["trials_scale"] = preset.trials_scale;
    report["config"] = config_to_json(preset.base);
    Json results;
    detail::ThresholdSink checks;
    std::string long_csv = std::string(kPointsCsvHeader) + "\n";

    auto sweep_and_record = [&](const RunConfig& cfg, const std::string& tag)
        -> std::pair<CoincidenceCurve, CoincidenceCurve> {
        SweepResult sweep = sweep_theta1(cfg, preset.theta1_grid, threads);
        write_text_file(out_dir / ("curve_" + tag + "_before.csv"), curve_to_csv(sweep.before));
        write_text_file(out_dir / ("curve_" + tag + "_after.csv"), curve_to_csv(sweep.after));
        emit_oracle_table(cfg, out_dir / ("oracle_" + tag + ".csv"), preset.theta1_grid);
        detail::append_long_rows(long_csv, cfg.n_cycles, sweep.before);
        detail::append_long_rows(long_csv, cfg.n_cycles, sweep.after);
        return {sweep.before, sweep.after};
    };

    if (preset.kind == PresetName::CalibrateSweep) {
        for (int n : preset.n_values) {
            for (double t2 : preset.theta2_values) {
                RunConfig cfg = preset.base;
                cfg.n_cycles = n;
                cfg.theta2 = PolarizerSetting(t2);
                cfg.num_pulses = preset.pulses_per_point;
                std::string tag =
                    "n" + std::to_string(n) + "_theta2_" + detail::angle_tag(t2);
                auto [before, after] = sweep_and_record(cfg, tag);
                try {
                    FringeFit fb = fit_fringe(before);
                    FringeFit fa = fit_fringe(after);
                    FringeShift shift = fringe_shift(fb, fa);
                    VisibilityResult vb = visibility(fb);
                    VisibilityResult va = visibility(fa);
                    results[tag] = {{"before_fit", fit_to_json(fb)},
                                    {"after_fit", fit_to_json(fa)},
                                    {"fringe_shift_deg", shift.shift_deg},
                                    {"fringe_shift_sigma_deg", shift.sigma_deg},
                                    {"visibility_before", visibility_to_json(vb)},
                                    {"visibility_after", visibility_to_json(va)}};
                    checks.range("fringe_shift_" + tag, shift.shift_deg, 87.0, 93.0);
                    checks.range("visibility_after_" + tag, va.v, 0.98, 1.05);
                } catch (const std::exception& e) {
                    checks.flag("fit_" + tag, false, e.what());
                }
            }
        }
    } else if (preset.kind == PresetName::StoreEntanglement) {
        for (int n : preset.n_values) {
            RunConfig ncfg = preset.base;
            ncfg.n_cycles = n;
            ncfg.divider_k =
                choose_divider(n, preset.base.cqm, preset.base.source.pulse_period_ns);
            ncfg.num_pulses = preset.pulses_per_point;
            std::string ntag = "n" + std::to_string(n);
            Json per_n;
            per_n["divider_k"] = ncfg.divider_k;
            try {
                VisibilityResult v_before[2], v_after[2];  // [0] = H/V, [1] = diagonal
                for (int bi = 0; bi < 2; ++bi) {
                    RunConfig cfg = ncfg;
                    cfg.theta2 = PolarizerSetting(preset.theta2_values[bi]);
                    std::string tag =
                        ntag + "_theta2_" + detail::angle_tag(cfg.theta2.angle_deg);
                    auto [before, after] = sweep_and_record(cfg, tag);
                    v_before[bi] = visibility(fit_fringe(before));
                    v_after[bi] = visibility(fit_fringe(after));
                    per_n["visibility_before_theta2_" + detail::angle_tag(cfg.theta2.angle_deg)] =
                        visibility_to_json(v_before[bi]);
                    per_n["visibility_after_theta2_" + detail::angle_tag(cfg.theta2.angle_deg)] =
                        visibility_to_json(v_after[bi]);
                }
                BellResult s_before = chsh_from_visibilities(v_before[0], v_before[1]);
                BellResult s_after = chsh_from_visibilities(v_after[0], v_after[1]);
                per_n["s_before"] = bell_to_json(s_before);
                per_n["s_after"] = bell_to_json(s_after);
                checks.range("s_before_" + ntag, s_before.s, 2.54, 2.74);
                checks.range("s_after_" + ntag, s_after.s, 2.56, 2.76);
                double nsig = s_after.sigma_s > 0.0 ? (s_after.s - 2.0) / s_after.sigma_s : 0.0;
                checks.flag("bell_violated_" + ntag, s_after.violated && nsig >= 5.0,
                            "S exceeds 2 by " + format_double(nsig) + " sigma");
            } catch (const std::exception& e) {
                checks.flag("fit_" + ntag, false, e.what());
            }
            results[ntag] = per_n;
        }
    } else if (preset.kind == PresetName::LossVsN) {
        std::vector<RatePoint> pts;
        Json rates = Json::array();
        std::string rates_csv = "n_cycles,coincidences,exposure_pulses,rate,sigma_rate\n";
        for (int n : preset.n_values) {
            RunConfig cfg = preset.base;
            cfg.n_cycles = n;
            double per_pulse = expected_coincidence_per_pulse(cfg, cfg.theta1, cfg.theta2,
                                                              CoincidenceChannel::AfterStorage);
            double wanted = preset.coincidence_target / std::max(per_pulse, 1e-12);
            cfg.num_pulses = static_cast<std::uint64_t>(
                std::clamp(wanted, 10000.0, 5e8));
            RunRecord rec = run(cfg, threads);
            std::uint64_t c = rec.primary_counts().coincidences_12;
            double rate = static_cast<double>(c) / static_cast<double>(cfg.num_pulses);
            double sigma = std::sqrt(static_cast<double>(std::max<std::uint64_t>(c, 1))) /
                           static_cast<double>(cfg.num_pulses);
            pts.push_back({static_cast<double>(n), rate, sigma});
            rates.push_back({{"n_cycles", n},
                             {"coincidences", c},
                             {"exposure_pulses", cfg.num_pulses},
                             {"rate_per_pulse", rate},
                             {"sigma_rate", sigma}});
            rates_csv += std::to_string(n) + "," + std::to_string(c) + "," +
                         std::to_string(cfg.num_pulses) + "," + format_double(rate) + "," +
                         format_double(sigma) + "\n";
        }
        write_text_file(out_dir / "rates.csv", rates_csv);
        results["rates"] = rates;
        double expected_loss = 1.0 - preset.base.cqm.eta_cycle * preset.base.cqm.flip_fidelity;
        results["expected_loss_per_cycle"] = expected_loss;
        try {
            LossFit fit = fit_loss(pts);
            results["loss_fit"] = {{"loss_per_cycle", fit.loss_per_cycle},
                                   {"sigma", fit.sigma},
                                   {"log_intercept", fit.log_intercept}};
            checks.range("loss_per_cycle", fit.loss_per_cycle, expected_loss - 0.02,
                         expected_loss + 0.02);
        } catch (const std::exception& e) {
            checks.flag("loss_fit", false, e.what());
        }
    } else {  // ScheduleCheck
        std::string table = "n_cycles,trigger_period_ns,ok,violation\n";
        auto probe = [&](int n, double period) {
            ScheduleCheck chk = validate_pc_schedule(n, preset.base.cqm, period);
            table += std::to_string(n) + "," + format_double(period) + "," +
                     (chk.ok ? "true" : "false") + "," + detail::csv_quote(chk.violation) + "\n";
            return chk;
        };
        ScheduleCheck ok6 = probe(6, 640.0);
        ScheduleCheck bad20 = probe(20, 320.0);
        int max_n = 0;
        for (int n = 1; n <= 22; ++n)
            if (probe(n, 640.0).ok) max_n = n;
        write_text_file(out_dir / "schedule_table.csv", table);
        results["max_feasible_n_at_640ns"] = max_n;
        checks.flag("accepts_n6_640ns", ok6.ok, ok6.violation);
        checks.flag("rejects_n20_320ns", !bad20.ok, bad20.violation);
    }

    if (preset.kind == PresetName::CalibrateSweep || preset.kind == PresetName::StoreEntanglement)
        write_text_file(out_dir / "points.csv", long_csv);
    report["results"] = results;
    report["thresholds"] = checks.list;
    report["passed"] = checks.all_ok;
    write_json(out_dir / "report.json", report);
    write_text_file(out_dir / "config_resolved.ini", serialize_config(preset.base));
    return {report, checks.all_ok};
}

}  // namespace cqmsim
