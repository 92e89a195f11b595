#include <string>

#include <doctest.h>

#include "dqm/config.hpp"
#include "dqm/errors.hpp"

using namespace dqm;

namespace {

// patch one or more keys into an otherwise default document
std::string doc(const std::string& body) { return "{" + body + "}"; }

std::string path_of(const std::string& body) {
  try {
    parse_config(doc(body));
  } catch (const config_error& e) {
    return e.path();
  }
  return "(no error)";
}

}  // namespace

TEST_CASE("the default configuration round-trips exactly") {
  const run_config def = default_run_config();
  CHECK(parse_config(serialize_config(def)) == def);
  CHECK_NOTHROW(validate(def));
}

TEST_CASE("an empty document means the default configuration") {
  CHECK(parse_config("{}") == default_run_config());
}

TEST_CASE("scalar overrides land in the right fields") {
  const auto cfg = parse_config(doc(R"("seed": 99, "duration_s": 2.5,
      "noise": {"common_mode_fraction": 0.25},
      "lockin": {"lpf_order": 6})"));
  CHECK(cfg.seed == 99);
  CHECK(cfg.duration_s == 2.5);
  CHECK(cfg.noise.common_mode_fraction == 0.25);
  CHECK(cfg.lockin.lpf_order == 6);
  // untouched sections keep their defaults
  CHECK(cfg.bias == default_run_config().bias);
}

TEST_CASE("arrays replace wholesale rather than merging") {
  const auto cfg = parse_config(doc(
      R"("channels": [{"mod_frequency_hz": 9e3, "position_mm": 0.5}])"));
  REQUIRE(cfg.channel_count() == 1);
  CHECK(cfg.channels[0].mod_frequency_hz == 9e3);
  CHECK(cfg.channels[0].position_mm == 0.5);
  // unspecified entry fields take the generic channel defaults, not ch1's
  CHECK(cfg.channels[0].contrast_per_line == ensemble_config{}.contrast_per_line);

  const auto peaks = parse_config(doc(
      R"("noise": {"line_peaks": [{"frequency_hz": 60.0, "amplitude_t_rms": 1e-12}]})"));
  REQUIRE(peaks.noise.line_peaks.size() == 1);
  CHECK(peaks.noise.line_peaks[0].frequency_hz == 60.0);
}

TEST_CASE("transitions parse from their names") {
  const auto cfg = parse_config(doc(
      R"("channels": [{"transition": "zero_to_plus_one"}])"));
  CHECK(cfg.channels[0].mw_transition == transition::zero_to_plus_one);
  CHECK(path_of(R"("channels": [{"transition": "sideways"}])") ==
        "channels[0].transition");
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  CHECK(path_of(R"("bogus": 1)") == "bogus");
  CHECK(path_of(R"("noise": {"bogus": 1})") == "noise.bogus");
  CHECK(path_of(R"("channels": [{"bogus": 1}])") == "channels[0].bogus");
  CHECK(path_of(R"("servo": [{"bogus": 1}])") == "servo[0].bogus");
}

TEST_CASE("type mismatches are rejected with their dotted path") {
  CHECK(path_of(R"("sample_rate_hz": "fast")") == "sample_rate_hz");
  CHECK(path_of(R"("noise": {"shot_noise_enabled": 3})") == "noise.shot_noise_enabled");
  CHECK(path_of(R"("channels": "none")") == "channels");
  CHECK(path_of(R"("seed": -4)") == "seed");
}

TEST_CASE("malformed json is a config error") {
  CHECK_THROWS_AS(parse_config("{"), config_error);
  CHECK_THROWS_AS(parse_config(""), config_error);
}

TEST_CASE("missing config files are config errors") {
  CHECK_THROWS_AS(load_config_file("/nonexistent/nowhere.json"), config_error);
}

TEST_CASE("validation rejects physically inconsistent setups") {
  // decimated rate must divide the sample rate
  CHECK(path_of(R"("decimated_rate_hz": 3000.0)") == "decimated_rate_hz");
  // contrast is strictly inside (0, 1) at config level
  CHECK(path_of(R"("channels": [{"contrast_per_line": 0.0}])") ==
        "channels[0].contrast_per_line");
  // linewidth cannot undercut the dephasing floor 1/(pi*T2*) ~ 69 kHz
  CHECK(path_of(R"("channels": [{"fwhm_hz": 50e3}])") == "channels[0].fwhm_hz");
  // duplicate modulation frequencies defeat the frequency-division idea
  CHECK(path_of(R"("channels": [{"mod_frequency_hz": 7.5e3},
                                {"mod_frequency_hz": 7.5e3}])") ==
        "channels[1].mod_frequency_hz");
  // series coil pair: constants must have opposite signs
  CHECK(path_of(R"("bias": {"calibration_t_per_a": [0.6e-3, 0.65e-3]})") ==
        "bias.calibration_t_per_a");
  // line peaks above the Nyquist frequency cannot be synthesized
  CHECK(path_of(
            R"("noise": {"line_peaks": [{"frequency_hz": 60e3}]})") ==
        "noise.line_peaks[0].frequency_hz");
  // servo list must be broadcast or one per channel
  CHECK(path_of(R"("servo": [{}, {}, {}])") == "servo");
  // loop target above a quarter of the decimated rate is not trackable
  CHECK(path_of(R"("servo": [{"target_bandwidth_hz": 2e3}])") ==
        "servo[0].target_bandwidth_hz");
  CHECK(path_of(R"("duration_s": 0.0)") == "duration_s");
  CHECK(path_of(R"("channels": [])") == "channels");
}

TEST_CASE("explicit gains must come as a complete set") {
  CHECK(path_of(R"("servo": [{"ki": 1e6}])") != "(no error)");
  CHECK_NOTHROW(parse_config(doc(R"("servo": [{"kp": 0.0, "ki": 1e6, "kd": 0.0}])")));
}

TEST_CASE("broadcast servo entry applies to both channels") {
  const auto cfg = default_run_config();
  REQUIRE(cfg.servo.size() == 1);
  CHECK(&cfg.servo_for(0) == &cfg.servo_for(1));
  CHECK(cfg.servo_for(1).target_bandwidth_hz == cfg.servo.front().target_bandwidth_hz);
}

TEST_CASE("serialization writes every key explicitly") {
  const std::string text = serialize_config(default_run_config());
  for (const char* key :
       {"\"sample_rate_hz\"", "\"decimated_rate_hz\"", "\"duration_s\"", "\"seed\"",
        "\"constants\"", "\"channels\"", "\"bias\"", "\"noise\"", "\"lockin\"",
        "\"servo\"", "\"analysis\"", "\"scenario\"", "\"mod_deviation_hz\"",
        "\"line_peaks\"", "\"calibration_t_per_a\"", "\"transient_discard_s\"",
        "\"bandwidth_frequencies_hz\""}) {
    CHECK_MESSAGE(text.find(key) != std::string::npos, key);
  }
  CHECK(text.back() == '\n');
}
