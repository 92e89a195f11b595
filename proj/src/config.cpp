#include "dqm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dqm/errors.hpp"
#include "dqm/field.hpp"

namespace dqm {

namespace {

using nlohmann::json;

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string indexed(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

// Wraps one JSON object: typed reads with defaults kept in `out`, remembers
// which keys were consumed, and finish() rejects everything unconsumed so
// typos surface as errors instead of silently-ignored settings.
class section {
 public:
  section(const json& j, std::string path) : obj_(j), path_(std::move(path)) {
    if (!obj_.is_object()) throw config_error(path_, "expected an object");
  }

  const json* find(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw config_error(join_path(path_, key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw config_error(join_path(path_, key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer())
        throw config_error(join_path(path_, key), "expected an integer");
      out = v->get<int>();
    }
  }

  void read(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!(v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)))
        throw config_error(join_path(path_, key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void read(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw config_error(join_path(path_, key), "expected a number or null");
      }
    }
  }

  void read(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw config_error(join_path(path_, key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        if (!e.is_number())
          throw config_error(indexed(join_path(path_, key), i), "expected a number");
        out.push_back(e.get<double>());
      }
    }
  }

  void read(const char* key, std::array<double, 2>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2)
        throw config_error(join_path(path_, key), "expected an array of two numbers");
      for (std::size_t i = 0; i < 2; ++i) {
        if (!(*v)[i].is_number())
          throw config_error(indexed(join_path(path_, key), i), "expected a number");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  void read(const char* key, transition& out) {
    if (const json* v = find(key)) {
      if (!v->is_string())
        throw config_error(join_path(path_, key), "expected a transition name string");
      const std::string s = v->get<std::string>();
      if (s == "zero_to_minus_one") {
        out = transition::zero_to_minus_one;
      } else if (s == "zero_to_plus_one") {
        out = transition::zero_to_plus_one;
      } else {
        throw config_error(join_path(path_, key),
                           "unknown transition \"" + s +
                               "\" (expected zero_to_minus_one or zero_to_plus_one)");
      }
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw config_error(join_path(path_, it.key()), "unknown key");
    }
  }

  const json& raw() const { return obj_; }
  const std::string& path() const { return path_; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

ensemble_config parse_channel(const json& j, const std::string& path) {
  ensemble_config ch;
  section s(j, path);
  s.read("position_mm", ch.position_mm);
  s.read("contrast_per_line", ch.contrast_per_line);
  s.read("fwhm_hz", ch.fwhm_hz);
  s.read("hyperfine_splitting_hz", ch.hyperfine_splitting_hz);
  s.read("baseline_photocurrent_a", ch.baseline_photocurrent_a);
  s.read("t2_star_s", ch.t2_star_s);
  s.read("three_tone", ch.three_tone);
  s.read("transition", ch.mw_transition);
  s.read("mod_frequency_hz", ch.mod_frequency_hz);
  s.read("mod_deviation_hz", ch.mod_deviation_hz);
  s.read("mod_phase_rad", ch.mod_phase_rad);
  s.finish();
  return ch;
}

line_peak_config parse_line_peak(const json& j, const std::string& path) {
  line_peak_config p;
  section s(j, path);
  s.read("frequency_hz", p.frequency_hz);
  s.read("amplitude_t_rms", p.amplitude_t_rms);
  s.read("width_hz", p.width_hz);
  s.finish();
  return p;
}

servo_config parse_servo(const json& j, const std::string& path, const servo_config& base) {
  servo_config sv = base;
  section s(j, path);
  s.read("alpha_hz_per_v", sv.alpha_hz_per_v);
  s.read("target_bandwidth_hz", sv.target_bandwidth_hz);
  s.read("kp", sv.kp);
  s.read("ki", sv.ki);
  s.read("kd", sv.kd);
  s.read("output_min_v", sv.output_min_v);
  s.read("output_max_v", sv.output_max_v);
  s.read("lock_threshold_fraction", sv.lock_threshold_fraction);
  s.read("lock_settle_s", sv.lock_settle_s);
  s.finish();
  return sv;
}

json channel_to_json(const ensemble_config& ch) {
  json j;
  j["position_mm"] = ch.position_mm;
  j["contrast_per_line"] = ch.contrast_per_line;
  j["fwhm_hz"] = ch.fwhm_hz;
  j["hyperfine_splitting_hz"] = ch.hyperfine_splitting_hz;
  j["baseline_photocurrent_a"] = ch.baseline_photocurrent_a;
  j["t2_star_s"] = ch.t2_star_s;
  j["three_tone"] = ch.three_tone;
  j["transition"] = ch.mw_transition == transition::zero_to_minus_one
                        ? "zero_to_minus_one"
                        : "zero_to_plus_one";
  j["mod_frequency_hz"] = ch.mod_frequency_hz;
  j["mod_deviation_hz"] = ch.mod_deviation_hz;
  j["mod_phase_rad"] = ch.mod_phase_rad;
  return j;
}

json servo_to_json(const servo_config& sv) {
  json j;
  j["alpha_hz_per_v"] = sv.alpha_hz_per_v;
  j["target_bandwidth_hz"] = sv.target_bandwidth_hz;
  j["kp"] = sv.kp ? json(*sv.kp) : json(nullptr);
  j["ki"] = sv.ki ? json(*sv.ki) : json(nullptr);
  j["kd"] = sv.kd ? json(*sv.kd) : json(nullptr);
  j["output_min_v"] = sv.output_min_v;
  j["output_max_v"] = sv.output_max_v;
  j["lock_threshold_fraction"] = sv.lock_threshold_fraction;
  j["lock_settle_s"] = sv.lock_settle_s;
  return j;
}

}  // namespace

run_config default_run_config() {
  run_config cfg;

  ensemble_config ch1;
  ch1.position_mm = -1.8;
  ch1.mod_frequency_hz = 7.5e3;
  ensemble_config ch2;
  ch2.position_mm = +1.8;
  ch2.mod_frequency_hz = 10.0e3;
  cfg.channels = {ch1, ch2};

  cfg.bias = default_bias_config();

  // mains harmonics plus the two odd peaks this environment is known for;
  // amplitudes sized to stand well above the floor yet mostly vanish from the
  // sensitivity band once the default notch list is applied
  cfg.noise.line_peaks = {
      {50.0, 80e-12, 0.3},  {90.0, 40e-12, 0.5},  {100.0, 35e-12, 0.4},
      {150.0, 25e-12, 0.4}, {200.0, 45e-12, 0.5}, {250.0, 25e-12, 0.4},
  };

  cfg.servo = {servo_config{}};
  return cfg;
}

run_config parse_config(const std::string& json_text) {
  json root_json;
  try {
    root_json = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error("", std::string("not valid JSON: ") + e.what());
  }

  run_config cfg = default_run_config();
  section root(root_json, "");
  root.read("sample_rate_hz", cfg.sample_rate_hz);
  root.read("decimated_rate_hz", cfg.decimated_rate_hz);
  root.read("duration_s", cfg.duration_s);
  root.read("seed", cfg.seed);

  if (const json* v = root.find("constants")) {
    section s(*v, "constants");
    s.read("gamma_e_hz_per_t", cfg.constants.gamma_e_hz_per_t);
    s.read("zero_field_splitting_hz", cfg.constants.zero_field_splitting_hz);
    s.read("electron_charge_c", cfg.constants.electron_charge_c);
    s.finish();
  }

  if (const json* v = root.find("channels")) {
    if (!v->is_array()) throw config_error("channels", "expected an array");
    cfg.channels.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      cfg.channels.push_back(parse_channel((*v)[i], indexed("channels", i)));
  }

  if (const json* v = root.find("bias")) {
    section s(*v, "bias");
    s.read("magnet_center_t", cfg.bias.magnet_center_t);
    s.read("magnet_slope_t_per_m", cfg.bias.magnet_slope_t_per_m);
    s.read("magnet_curvature_t_per_m2", cfg.bias.magnet_curvature_t_per_m2);
    s.read("coil_radius_m", cfg.bias.coil_radius_m);
    s.read("coil_positions_m", cfg.bias.coil_positions_m);
    s.read("coil_turns", cfg.bias.coil_turns);
    s.read("coil_polarity", cfg.bias.coil_polarity);
    s.read("series_current_a", cfg.bias.series_current_a);
    s.read("calibration_t_per_a", cfg.bias.calibration_t_per_a);
    s.finish();
  }

  if (const json* v = root.find("noise")) {
    section s(*v, "noise");
    s.read("env_white_floor_t_per_rthz", cfg.noise.env_white_floor_t_per_rthz);
    s.read("env_pink_amplitude_t_per_rthz", cfg.noise.env_pink_amplitude_t_per_rthz);
    s.read("env_pink_corner_hz", cfg.noise.env_pink_corner_hz);
    s.read("env_pink_beta", cfg.noise.env_pink_beta);
    if (const json* peaks = s.find("line_peaks")) {
      if (!peaks->is_array()) throw config_error("noise.line_peaks", "expected an array");
      cfg.noise.line_peaks.clear();
      for (std::size_t i = 0; i < peaks->size(); ++i)
        cfg.noise.line_peaks.push_back(
            parse_line_peak((*peaks)[i], indexed("noise.line_peaks", i)));
    }
    s.read("common_mode_fraction", cfg.noise.common_mode_fraction);
    s.read("laser_rin_rel_per_rthz", cfg.noise.laser_rin_rel_per_rthz);
    s.read("shot_noise_enabled", cfg.noise.shot_noise_enabled);
    s.finish();
  }

  if (const json* v = root.find("lockin")) {
    section s(*v, "lockin");
    s.read("lpf_cutoff_hz", cfg.lockin.lpf_cutoff_hz);
    s.read("lpf_order", cfg.lockin.lpf_order);
    s.read("transimpedance_v_per_a", cfg.lockin.transimpedance_v_per_a);
    s.read("balanced_detection", cfg.lockin.balanced_detection);
    s.read("balanced_rin_suppression_db", cfg.lockin.balanced_rin_suppression_db);
    s.finish();
  }

  if (const json* v = root.find("servo")) {
    if (!v->is_array()) throw config_error("servo", "expected an array");
    if (v->empty()) throw config_error("servo", "needs at least one entry");
    cfg.servo.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      cfg.servo.push_back(parse_servo((*v)[i], indexed("servo", i), servo_config{}));
  }

  if (const json* v = root.find("analysis")) {
    section s(*v, "analysis");
    s.read("notch_hz", cfg.analysis.notch_hz);
    s.read("notch_q", cfg.analysis.notch_q);
    s.read("bandpass_low_hz", cfg.analysis.bandpass_low_hz);
    s.read("bandpass_high_hz", cfg.analysis.bandpass_high_hz);
    s.read("bandpass_order", cfg.analysis.bandpass_order);
    s.read("welch_segment_s", cfg.analysis.welch_segment_s);
    s.read("transient_discard_s", cfg.analysis.transient_discard_s);
    s.finish();
  }

  if (const json* v = root.find("scenario")) {
    section s(*v, "scenario");
    s.read("sweep_span_hz", cfg.scenario.sweep_span_hz);
    s.read("sweep_points", cfg.scenario.sweep_points);
    s.read("sweep_deviation_hz", cfg.scenario.sweep_deviation_hz);
    s.read("sweep_settle_s", cfg.scenario.sweep_settle_s);
    s.read("sweep_average_s", cfg.scenario.sweep_average_s);
    s.read("calibration_tone_hz", cfg.scenario.calibration_tone_hz);
    s.read("calibration_current_amplitudes_a", cfg.scenario.calibration_current_amplitudes_a);
    s.read("calibration_settle_s", cfg.scenario.calibration_settle_s);
    s.read("calibration_measure_s", cfg.scenario.calibration_measure_s);
    s.read("bandwidth_frequencies_hz", cfg.scenario.bandwidth_frequencies_hz);
    s.read("bandwidth_amplitude_t", cfg.scenario.bandwidth_amplitude_t);
    s.read("bandwidth_settle_s", cfg.scenario.bandwidth_settle_s);
    s.read("bandwidth_min_measure_s", cfg.scenario.bandwidth_min_measure_s);
    s.finish();
  }

  root.finish();
  validate(cfg);
  return cfg;
}

run_config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("", "cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const run_config& cfg) {
  json j;
  j["sample_rate_hz"] = cfg.sample_rate_hz;
  j["decimated_rate_hz"] = cfg.decimated_rate_hz;
  j["duration_s"] = cfg.duration_s;
  j["seed"] = cfg.seed;

  j["constants"]["gamma_e_hz_per_t"] = cfg.constants.gamma_e_hz_per_t;
  j["constants"]["zero_field_splitting_hz"] = cfg.constants.zero_field_splitting_hz;
  j["constants"]["electron_charge_c"] = cfg.constants.electron_charge_c;

  j["channels"] = json::array();
  for (const auto& ch : cfg.channels) j["channels"].push_back(channel_to_json(ch));

  json& b = j["bias"];
  b["magnet_center_t"] = cfg.bias.magnet_center_t;
  b["magnet_slope_t_per_m"] = cfg.bias.magnet_slope_t_per_m;
  b["magnet_curvature_t_per_m2"] = cfg.bias.magnet_curvature_t_per_m2;
  b["coil_radius_m"] = cfg.bias.coil_radius_m;
  b["coil_positions_m"] = cfg.bias.coil_positions_m;
  b["coil_turns"] = cfg.bias.coil_turns;
  b["coil_polarity"] = cfg.bias.coil_polarity;
  b["series_current_a"] = cfg.bias.series_current_a;
  b["calibration_t_per_a"] = cfg.bias.calibration_t_per_a;

  json& n = j["noise"];
  n["env_white_floor_t_per_rthz"] = cfg.noise.env_white_floor_t_per_rthz;
  n["env_pink_amplitude_t_per_rthz"] = cfg.noise.env_pink_amplitude_t_per_rthz;
  n["env_pink_corner_hz"] = cfg.noise.env_pink_corner_hz;
  n["env_pink_beta"] = cfg.noise.env_pink_beta;
  n["line_peaks"] = json::array();
  for (const auto& p : cfg.noise.line_peaks) {
    json pj;
    pj["frequency_hz"] = p.frequency_hz;
    pj["amplitude_t_rms"] = p.amplitude_t_rms;
    pj["width_hz"] = p.width_hz;
    n["line_peaks"].push_back(pj);
  }
  n["common_mode_fraction"] = cfg.noise.common_mode_fraction;
  n["laser_rin_rel_per_rthz"] = cfg.noise.laser_rin_rel_per_rthz;
  n["shot_noise_enabled"] = cfg.noise.shot_noise_enabled;

  json& l = j["lockin"];
  l["lpf_cutoff_hz"] = cfg.lockin.lpf_cutoff_hz;
  l["lpf_order"] = cfg.lockin.lpf_order;
  l["transimpedance_v_per_a"] = cfg.lockin.transimpedance_v_per_a;
  l["balanced_detection"] = cfg.lockin.balanced_detection;
  l["balanced_rin_suppression_db"] = cfg.lockin.balanced_rin_suppression_db;

  j["servo"] = json::array();
  for (const auto& sv : cfg.servo) j["servo"].push_back(servo_to_json(sv));

  json& a = j["analysis"];
  a["notch_hz"] = cfg.analysis.notch_hz;
  a["notch_q"] = cfg.analysis.notch_q;
  a["bandpass_low_hz"] = cfg.analysis.bandpass_low_hz;
  a["bandpass_high_hz"] = cfg.analysis.bandpass_high_hz;
  a["bandpass_order"] = cfg.analysis.bandpass_order;
  a["welch_segment_s"] = cfg.analysis.welch_segment_s;
  a["transient_discard_s"] = cfg.analysis.transient_discard_s;

  json& sc = j["scenario"];
  sc["sweep_span_hz"] = cfg.scenario.sweep_span_hz;
  sc["sweep_points"] = cfg.scenario.sweep_points;
  sc["sweep_deviation_hz"] = cfg.scenario.sweep_deviation_hz;
  sc["sweep_settle_s"] = cfg.scenario.sweep_settle_s;
  sc["sweep_average_s"] = cfg.scenario.sweep_average_s;
  sc["calibration_tone_hz"] = cfg.scenario.calibration_tone_hz;
  sc["calibration_current_amplitudes_a"] = cfg.scenario.calibration_current_amplitudes_a;
  sc["calibration_settle_s"] = cfg.scenario.calibration_settle_s;
  sc["calibration_measure_s"] = cfg.scenario.calibration_measure_s;
  sc["bandwidth_frequencies_hz"] = cfg.scenario.bandwidth_frequencies_hz;
  sc["bandwidth_amplitude_t"] = cfg.scenario.bandwidth_amplitude_t;
  sc["bandwidth_settle_s"] = cfg.scenario.bandwidth_settle_s;
  sc["bandwidth_min_measure_s"] = cfg.scenario.bandwidth_min_measure_s;

  return j.dump(2) + "\n";
}

namespace {

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw config_error(path, message);
}

}  // namespace

void validate(const run_config& cfg) {
  require(cfg.sample_rate_hz > 0, "sample_rate_hz", "must be positive");
  require(cfg.decimated_rate_hz > 0, "decimated_rate_hz", "must be positive");
  require(cfg.duration_s > 0, "duration_s", "must be positive");

  require(cfg.constants.gamma_e_hz_per_t > 0, "constants.gamma_e_hz_per_t", "must be positive");
  require(cfg.constants.zero_field_splitting_hz > 0, "constants.zero_field_splitting_hz",
          "must be positive");
  require(cfg.constants.electron_charge_c > 0, "constants.electron_charge_c",
          "must be positive");

  require(!cfg.channels.empty(), "channels", "needs at least one channel");
  require(cfg.channels.size() <= 2, "channels",
          "at most two channels (one compensation coil each)");

  const double ratio = cfg.sample_rate_hz / cfg.decimated_rate_hz;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0, "decimated_rate_hz",
          "must divide sample_rate_hz");
  require(cfg.decimated_rate_hz >= 2.0 * cfg.lockin.lpf_cutoff_hz, "decimated_rate_hz",
          "must be at least twice the lock-in LPF cutoff");

  double max_mod = 0.0;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const auto& ch = cfg.channels[i];
    const std::string p = indexed("channels", i);
    require(ch.contrast_per_line > 0 && ch.contrast_per_line < 1,
            join_path(p, "contrast_per_line"), "must be in (0, 1)");
    require(ch.fwhm_hz > 0, join_path(p, "fwhm_hz"), "must be positive");
    require(ch.baseline_photocurrent_a > 0, join_path(p, "baseline_photocurrent_a"),
            "must be positive");
    require(ch.hyperfine_splitting_hz >= 0, join_path(p, "hyperfine_splitting_hz"),
            "must be non-negative");
    if (ch.t2_star_s > 0) {
      require(ch.fwhm_hz >= 1.0 / (pi * ch.t2_star_s) * (1.0 - 1e-12),
              join_path(p, "fwhm_hz"),
              "below the 1/(pi*t2_star_s) dephasing floor; broadening only adds width");
    }
    require(std::abs(ch.position_mm) <= 5.0, join_path(p, "position_mm"),
            "outside the modeled +/-5 mm range");
    require(ch.mod_frequency_hz > 0, join_path(p, "mod_frequency_hz"), "must be positive");
    require(ch.mod_deviation_hz >= 0, join_path(p, "mod_deviation_hz"),
            "must be non-negative");
    max_mod = std::max(max_mod, ch.mod_frequency_hz);
    for (std::size_t k = 0; k < i; ++k) {
      require(cfg.channels[k].mod_frequency_hz != ch.mod_frequency_hz,
              join_path(p, "mod_frequency_hz"),
              "modulation frequencies must be pairwise distinct");
    }
    require(cfg.lockin.lpf_cutoff_hz < ch.mod_frequency_hz, "lockin.lpf_cutoff_hz",
            "must be below every modulation frequency");
  }
  require(cfg.sample_rate_hz >= 10.0 * max_mod, "sample_rate_hz",
          "must be at least 10x the highest modulation frequency");

  require(cfg.bias.coil_radius_m > 0, "bias.coil_radius_m", "must be positive");
  if (cfg.channels.size() == 2) {
    require(cfg.bias.calibration_t_per_a[0] * cfg.bias.calibration_t_per_a[1] < 0,
            "bias.calibration_t_per_a",
            "the two coil constants must have opposite signs (series coil pair)");
  }

  const auto& nz = cfg.noise;
  require(nz.env_white_floor_t_per_rthz >= 0, "noise.env_white_floor_t_per_rthz",
          "must be non-negative");
  require(nz.env_pink_amplitude_t_per_rthz >= 0, "noise.env_pink_amplitude_t_per_rthz",
          "must be non-negative");
  require(nz.env_pink_corner_hz > 0, "noise.env_pink_corner_hz", "must be positive");
  require(nz.env_pink_beta > 0 && nz.env_pink_beta <= 2.0, "noise.env_pink_beta",
          "must be in (0, 2]");
  require(nz.common_mode_fraction >= 0 && nz.common_mode_fraction <= 1,
          "noise.common_mode_fraction", "must be in [0, 1]");
  require(nz.laser_rin_rel_per_rthz >= 0, "noise.laser_rin_rel_per_rthz",
          "must be non-negative");
  for (std::size_t i = 0; i < nz.line_peaks.size(); ++i) {
    const auto& pk = nz.line_peaks[i];
    const std::string p = indexed("noise.line_peaks", i);
    require(pk.frequency_hz > 0, join_path(p, "frequency_hz"), "must be positive");
    require(pk.frequency_hz < 0.5 * cfg.sample_rate_hz, join_path(p, "frequency_hz"),
            "must be below the sample-rate Nyquist frequency");
    require(pk.amplitude_t_rms >= 0, join_path(p, "amplitude_t_rms"), "must be non-negative");
    require(pk.width_hz >= 0, join_path(p, "width_hz"), "must be non-negative");
  }

  require(cfg.lockin.lpf_cutoff_hz > 0, "lockin.lpf_cutoff_hz", "must be positive");
  require(cfg.lockin.lpf_order >= 1 && cfg.lockin.lpf_order <= 16, "lockin.lpf_order",
          "must be in [1, 16]");
  require(cfg.lockin.transimpedance_v_per_a > 0, "lockin.transimpedance_v_per_a",
          "must be positive");
  require(cfg.lockin.balanced_rin_suppression_db >= 0, "lockin.balanced_rin_suppression_db",
          "must be non-negative");

  require(cfg.servo.size() == 1 || cfg.servo.size() == cfg.channels.size(), "servo",
          "needs one entry per channel or a single broadcast entry");
  for (std::size_t i = 0; i < cfg.servo.size(); ++i) {
    const auto& sv = cfg.servo[i];
    const std::string p = indexed("servo", i);
    require(sv.alpha_hz_per_v != 0, join_path(p, "alpha_hz_per_v"), "must be nonzero");
    require(sv.target_bandwidth_hz > 0, join_path(p, "target_bandwidth_hz"),
            "must be positive");
    require(sv.target_bandwidth_hz <= cfg.decimated_rate_hz / 4.0,
            join_path(p, "target_bandwidth_hz"),
            "must be at most a quarter of the decimated rate");
    require(sv.output_min_v < sv.output_max_v, join_path(p, "output_min_v"),
            "output limits must be ordered");
    const int gains_set = int(sv.kp.has_value()) + int(sv.ki.has_value()) + int(sv.kd.has_value());
    require(gains_set == 0 || gains_set == 3, join_path(p, "kp"),
            "set all of kp/ki/kd for manual gains, or none for auto-tuning");
    if (sv.kp) require(*sv.kp >= 0, join_path(p, "kp"), "must be non-negative");
    if (sv.ki) require(*sv.ki >= 0, join_path(p, "ki"), "must be non-negative");
    if (sv.kd) require(*sv.kd >= 0, join_path(p, "kd"), "must be non-negative");
    require(sv.lock_threshold_fraction > 0 && sv.lock_threshold_fraction <= 1,
            join_path(p, "lock_threshold_fraction"), "must be in (0, 1]");
    require(sv.lock_settle_s >= 0, join_path(p, "lock_settle_s"), "must be non-negative");
  }

  const auto& an = cfg.analysis;
  const double dec_nyquist = 0.5 * cfg.decimated_rate_hz;
  for (std::size_t i = 0; i < an.notch_hz.size(); ++i) {
    require(an.notch_hz[i] > 0 && an.notch_hz[i] < dec_nyquist, indexed("analysis.notch_hz", i),
            "must lie inside (0, decimated Nyquist)");
  }
  require(an.notch_q > 0, "analysis.notch_q", "must be positive");
  require(an.bandpass_low_hz > 0 && an.bandpass_low_hz < an.bandpass_high_hz,
          "analysis.bandpass_low_hz", "must be positive and below bandpass_high_hz");
  require(an.bandpass_high_hz < dec_nyquist, "analysis.bandpass_high_hz",
          "must be below the decimated Nyquist frequency");
  require(an.bandpass_order >= 1 && an.bandpass_order <= 16, "analysis.bandpass_order",
          "must be in [1, 16]");
  require(an.welch_segment_s > 0, "analysis.welch_segment_s", "must be positive");
  require(an.transient_discard_s >= 0, "analysis.transient_discard_s", "must be non-negative");

  const auto& sc = cfg.scenario;
  require(sc.sweep_span_hz > 0, "scenario.sweep_span_hz", "must be positive");
  require(sc.sweep_points >= 10, "scenario.sweep_points", "needs at least 10 points");
  require(sc.sweep_deviation_hz > 0, "scenario.sweep_deviation_hz", "must be positive");
  require(sc.sweep_settle_s > 0 && sc.sweep_average_s > 0, "scenario.sweep_settle_s",
          "sweep settle and average windows must be positive");
  require(sc.calibration_tone_hz > 0 && sc.calibration_tone_hz < dec_nyquist,
          "scenario.calibration_tone_hz", "must lie inside (0, decimated Nyquist)");
  require(!sc.calibration_current_amplitudes_a.empty(),
          "scenario.calibration_current_amplitudes_a", "needs at least one amplitude");
  for (std::size_t i = 0; i < sc.calibration_current_amplitudes_a.size(); ++i) {
    require(sc.calibration_current_amplitudes_a[i] >= 0,
            indexed("scenario.calibration_current_amplitudes_a", i), "must be non-negative");
  }
  require(sc.calibration_settle_s >= 0 && sc.calibration_measure_s > 0,
          "scenario.calibration_measure_s", "measure window must be positive");
  require(!sc.bandwidth_frequencies_hz.empty(), "scenario.bandwidth_frequencies_hz",
          "needs at least one frequency");
  for (std::size_t i = 0; i < sc.bandwidth_frequencies_hz.size(); ++i) {
    const std::string p = indexed("scenario.bandwidth_frequencies_hz", i);
    require(sc.bandwidth_frequencies_hz[i] > 0 && sc.bandwidth_frequencies_hz[i] < dec_nyquist,
            p, "must lie inside (0, decimated Nyquist)");
    if (i > 0) {
      require(sc.bandwidth_frequencies_hz[i] > sc.bandwidth_frequencies_hz[i - 1], p,
              "must be strictly increasing");
    }
  }
  require(sc.bandwidth_amplitude_t > 0, "scenario.bandwidth_amplitude_t", "must be positive");
  require(sc.bandwidth_settle_s >= 0 && sc.bandwidth_min_measure_s > 0,
          "scenario.bandwidth_min_measure_s", "measure window must be positive");
}

}  // namespace dqm
