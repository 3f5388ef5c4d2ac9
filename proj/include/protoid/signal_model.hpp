#pragma once

// Synthetic baseband recordings of Wi-Fi, Wi-Fi beacon and Bluetooth traffic.
//
// Only burst timing and envelope statistics are modelled. Wi-Fi and beacon
// bursts are a sum of equal-amplitude random-phase tones on a DFT grid, which
// gives the high peak-to-average ratio of OFDM. Bluetooth bursts are
// constant-envelope with a continuous-phase frequency walk.

#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace protoid {

using SampleIndex = std::int64_t;
using Sample = std::complex<float>;

inline constexpr double kDefaultSampleRateHz = 20e6;

enum class ProtocolLabel : int { Wifi = 0, WifiBeacon = 1, Bluetooth = 2 };
inline constexpr int kNumLabels = 3;

enum class FrameKind { Beacon, Rts, Cts, Data, Ack, BtData, BtAck };

enum class Scenario { BeaconOnly, WifiExchange, Bluetooth, Mixed };

std::string_view to_string(ProtocolLabel label);
std::string_view to_string(FrameKind kind);
std::string_view to_string(Scenario scenario);
ProtocolLabel label_from_code(int code);
ProtocolLabel parse_label(std::string_view text);
FrameKind parse_frame_kind(std::string_view text);
Scenario parse_scenario(std::string_view text);

inline int code(ProtocolLabel label) { return static_cast<int>(label); }

struct IqRecording {
    std::vector<Sample> samples;
    double sample_rate_hz = kDefaultSampleRateHz;
    std::map<std::string, std::string> meta;

    SampleIndex size() const { return static_cast<SampleIndex>(samples.size()); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct TruthBurst {
    SampleIndex start_sample = 0;
    SampleIndex end_sample = 0; // exclusive
    ProtocolLabel label = ProtocolLabel::Wifi;
    FrameKind kind = FrameKind::Data;

    SampleIndex width() const { return end_sample - start_sample; }
    friend bool operator==(const TruthBurst&, const TruthBurst&) = default;
};

using BurstTruth = std::vector<TruthBurst>;

struct RangeUs {
    double min = 0.0;
    double max = 0.0;
};

struct GeneratorConfig {
    Scenario scenario = Scenario::BeaconOnly;
    double duration_s = 1.0;
    std::uint64_t seed = 0;
    double amplitude = 1.0;
    // Per-burst attenuation drawn uniformly from [0, amplitude_jitter_db] dB.
    double amplitude_jitter_db = 0.0;
    double lead_in_us = 100.0;

    // Beacon
    double beacon_interval_us = 102400.0;
    double beacon_airtime_us = 2184.0;

    // Wi-Fi RTS/CTS/Data/ACK exchange
    double sifs_us = 10.0;
    double difs_us = 50.0;
    double rts_us = 50.0;
    double cts_us = 40.0;
    double wifi_ack_us = 40.0;
    RangeUs wifi_data_frame_us_range{100.0, 3000.0};
    int wifi_subcarrier_count = 64;
    int control_subcarrier_count = 64;

    // Bluetooth 5-slot data / 1-slot ACK
    RangeUs bt_data_us_range{2500.0, 2870.0};
    RangeUs bt_ack_delay_us_range{200.0, 600.0};
    RangeUs bt_ack_us_range{126.0, 366.0};
    double bt_idle_us = 1250.0;
    double bt_freq_dev_hz = 160e3;
    double bt_symbol_rate_hz = 1e6;

    /// Throws ConfigError on any violated invariant.
    void validate(double sample_rate_hz) const;
};

struct GeneratedSignal {
    IqRecording recording;
    BurstTruth truth;
};

GeneratedSignal generate_beacon(const GeneratorConfig& config,
                                double sample_rate_hz = kDefaultSampleRateHz);
GeneratedSignal generate_wifi_exchange(const GeneratorConfig& config,
                                       double sample_rate_hz = kDefaultSampleRateHz);
GeneratedSignal generate_bluetooth(const GeneratorConfig& config,
                                   double sample_rate_hz = kDefaultSampleRateHz);
GeneratedSignal generate_mixed(const GeneratorConfig& config,
                               double sample_rate_hz = kDefaultSampleRateHz);

/// Dispatches on config.scenario.
GeneratedSignal generate(const GeneratorConfig& config,
                         double sample_rate_hz = kDefaultSampleRateHz);

/// Fraction of bursts that temporally overlap at least one other burst.
double overlap_fraction(const BurstTruth& truth);

/// Stable 64-bit hash of the configuration (hex string), recorded in metadata.
std::string config_hash(const GeneratorConfig& config, double sample_rate_hz);

/// Sentinel meaning "do not add noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds complex white Gaussian noise so that the mean power of the burst region
/// (samples with nonzero power) over the noise power equals snr_db.
IqRecording add_awgn(const IqRecording& rec, double snr_db, std::uint64_t seed);

/// Mean |x|^2 over samples with nonzero power; 0 if there are none.
double burst_region_power(const IqRecording& rec);

} // namespace protoid
