#include "protoid/signal_model.hpp"

#include "protoid/error.hpp"
#include "hash_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <span>

namespace protoid {

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames{"Wifi", "WifiBeacon", "Bluetooth"};
constexpr std::array<std::string_view, 7> kKindNames{"Beacon", "RTS", "CTS", "Data",
                                                     "Ack",    "BtData", "BtAck"};
constexpr std::array<std::string_view, 4> kScenarioNames{"BeaconOnly", "WifiExchange",
                                                         "Bluetooth", "Mixed"};

// Independent random streams so Mixed can reproduce the single-scenario streams.
// Timing, waveform content and amplitude draw from separate streams, so jitter
// settings never move a burst.
enum class Stream : std::uint64_t { Beacon = 1, Wifi = 2, Bluetooth = 3 };

struct BurstRng {
    std::mt19937_64 wave;
    std::mt19937_64 amp;
};

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

BurstRng make_burst_rng(std::uint64_t seed, Stream stream) {
    const auto base = static_cast<std::uint64_t>(stream);
    return {make_stream(seed, Stream(base + 16)), make_stream(seed, Stream(base + 32))};
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

class Timeline {
public:
    Timeline(double sample_rate_hz, SampleIndex total) : rate_(sample_rate_hz), total_(total) {}

    SampleIndex samples(double us) const { return std::llround(us * rate_ * 1e-6); }

    // Uniform draw in [range.min, range.max] us, quantised to samples and kept inside the range.
    SampleIndex draw(const RangeUs& range, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> dist(range.min, range.max);
        const double us = range.min == range.max ? range.min : dist(rng);
        const auto lo = static_cast<SampleIndex>(std::ceil(range.min * rate_ * 1e-6 - 1e-9));
        const auto hi = static_cast<SampleIndex>(std::floor(range.max * rate_ * 1e-6 + 1e-9));
        return std::clamp(samples(us), lo, std::max(lo, hi));
    }

    SampleIndex total() const { return total_; }
    bool fits(SampleIndex end) const { return end <= total_; }

private:
    double rate_;
    SampleIndex total_;
};

float burst_amplitude(const GeneratorConfig& config, std::mt19937_64& rng) {
    if (config.amplitude_jitter_db <= 0.0) return static_cast<float>(config.amplitude);
    std::uniform_real_distribution<double> att(0.0, config.amplitude_jitter_db);
    return static_cast<float>(config.amplitude * std::pow(10.0, -att(rng) / 20.0));
}

// Sum of `tones` equal-power random-phase subcarriers centred on a `grid`-point DFT grid.
// The waveform is periodic in `grid` samples, so one period is computed and tiled.
void render_multitone(std::span<Sample> out, int tones, int grid, float amplitude,
                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> phases(static_cast<std::size_t>(tones));
    for (auto& p : phases) p = phase(rng);

    const int first_bin = -tones / 2;
    const double scale = amplitude / std::sqrt(static_cast<double>(tones));
    std::vector<Sample> period(static_cast<std::size_t>(grid));
    for (int n = 0; n < grid; ++n) {
        std::complex<double> acc{0.0, 0.0};
        for (int t = 0; t < tones; ++t) {
            const double arg = 2.0 * std::numbers::pi * (first_bin + t) * n / grid + phases[t];
            acc += std::polar(1.0, arg);
        }
        period[n] = Sample(static_cast<float>(acc.real() * scale),
                           static_cast<float>(acc.imag() * scale));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = period[i % period.size()];
}

// Constant envelope, continuous phase, +-freq_dev per random symbol.
void render_gfsk(std::span<Sample> out, const GeneratorConfig& config, double sample_rate_hz,
                 float amplitude, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase0(0.0, 2.0 * std::numbers::pi);
    std::bernoulli_distribution bit(0.5);
    const double samples_per_symbol = sample_rate_hz / config.bt_symbol_rate_hz;
    const double step = 2.0 * std::numbers::pi * config.bt_freq_dev_hz / sample_rate_hz;
    double phase = phase0(rng);
    double next_symbol = 0.0;
    double sign = 1.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (static_cast<double>(i) >= next_symbol) {
            sign = bit(rng) ? 1.0 : -1.0;
            next_symbol += samples_per_symbol;
        }
        out[i] = std::polar(amplitude, static_cast<float>(phase));
        phase = std::fmod(phase + sign * step, 2.0 * std::numbers::pi);
    }
}

IqRecording blank_recording(const GeneratorConfig& config, double sample_rate_hz) {
    IqRecording rec;
    rec.sample_rate_hz = sample_rate_hz;
    rec.samples.assign(static_cast<std::size_t>(std::llround(config.duration_s * sample_rate_hz)),
                       Sample{0.0f, 0.0f});
    rec.meta["generator"] = "protoid";
    rec.meta["scenario"] = std::string(to_string(config.scenario));
    rec.meta["seed"] = std::to_string(config.seed);
    rec.meta["config_hash"] = config_hash(config, sample_rate_hz);
    return rec;
}

std::span<Sample> span_of(IqRecording& rec, SampleIndex start, SampleIndex end) {
    return std::span<Sample>(rec.samples).subspan(static_cast<std::size_t>(start),
                                                  static_cast<std::size_t>(end - start));
}

void emit_ofdm(IqRecording& rec, BurstTruth& truth, const GeneratorConfig& config,
               SampleIndex start, SampleIndex width, ProtocolLabel label, FrameKind kind,
               BurstRng& rng) {
    const bool control = kind == FrameKind::Rts || kind == FrameKind::Cts || kind == FrameKind::Ack;
    const int tones = control ? config.control_subcarrier_count : config.wifi_subcarrier_count;
    const float amp = burst_amplitude(config, rng.amp);
    render_multitone(span_of(rec, start, start + width), tones, config.wifi_subcarrier_count, amp,
                     rng.wave);
    truth.push_back({start, start + width, label, kind});
}

void emit_bluetooth(IqRecording& rec, BurstTruth& truth, const GeneratorConfig& config,
                    SampleIndex start, SampleIndex width, FrameKind kind, BurstRng& rng) {
    const float amp = burst_amplitude(config, rng.amp);
    render_gfsk(span_of(rec, start, start + width), config, rec.sample_rate_hz, amp, rng.wave);
    truth.push_back({start, start + width, ProtocolLabel::Bluetooth, kind});
}

void require_scenario(const GeneratorConfig& config, Scenario expected) {
    if (config.scenario != expected) {
        throw ConfigError("generator called with scenario " +
                          std::string(to_string(config.scenario)) + ", expected " +
                          std::string(to_string(expected)));
    }
}

GeneratedSignal beacon_stream(const GeneratorConfig& config, double sample_rate_hz) {
    GeneratedSignal out{blank_recording(config, sample_rate_hz), {}};
    const Timeline tl(sample_rate_hz, out.recording.size());
    auto rng = make_burst_rng(config.seed, Stream::Beacon);
    const SampleIndex lead = tl.samples(config.lead_in_us);
    const SampleIndex interval = tl.samples(config.beacon_interval_us);
    const SampleIndex airtime = tl.samples(config.beacon_airtime_us);
    for (SampleIndex start = lead; tl.fits(start + airtime); start += interval) {
        emit_ofdm(out.recording, out.truth, config, start, airtime, ProtocolLabel::WifiBeacon,
                  FrameKind::Beacon, rng);
    }
    return out;
}

GeneratedSignal bluetooth_stream(const GeneratorConfig& config, double sample_rate_hz) {
    GeneratedSignal out{blank_recording(config, sample_rate_hz), {}};
    const Timeline tl(sample_rate_hz, out.recording.size());
    auto rng = make_stream(config.seed, Stream::Bluetooth);
    auto burst = make_burst_rng(config.seed, Stream::Bluetooth);
    const SampleIndex idle = tl.samples(config.bt_idle_us);
    SampleIndex cursor = tl.samples(config.lead_in_us);
    std::size_t cycles = 0;
    while (true) {
        const SampleIndex data = tl.draw(config.bt_data_us_range, rng);
        const SampleIndex delay = tl.draw(config.bt_ack_delay_us_range, rng);
        const SampleIndex ack = tl.draw(config.bt_ack_us_range, rng);
        const SampleIndex ack_start = cursor + data + delay;
        if (!tl.fits(ack_start + ack)) break;
        emit_bluetooth(out.recording, out.truth, config, cursor, data, FrameKind::BtData, burst);
        emit_bluetooth(out.recording, out.truth, config, ack_start, ack, FrameKind::BtAck, burst);
        cursor = ack_start + ack + idle;
        ++cycles;
    }
    out.recording.meta["bluetooth_cycles"] = std::to_string(cycles);
    return out;
}

void finish_meta(GeneratedSignal& sig) {
    sig.recording.meta["burst_count"] = std::to_string(sig.truth.size());
    if (sig.truth.size() <= 1) sig.recording.meta["short_recording"] = "true";
}

} // namespace

std::string_view to_string(ProtocolLabel label) { return kLabelNames.at(code(label)); }
std::string_view to_string(FrameKind kind) { return kKindNames.at(static_cast<int>(kind)); }
std::string_view to_string(Scenario scenario) {
    return kScenarioNames.at(static_cast<int>(scenario));
}

ProtocolLabel label_from_code(int value) {
    if (value < 0 || value >= kNumLabels) {
        throw DataError("invalid protocol label code " + std::to_string(value));
    }
    return static_cast<ProtocolLabel>(value);
}

ProtocolLabel parse_label(std::string_view text) {
    const std::string t = lower(text);
    if (t == "wifi" || t == "0") return ProtocolLabel::Wifi;
    if (t == "wifibeacon" || t == "beacon" || t == "1") return ProtocolLabel::WifiBeacon;
    if (t == "bluetooth" || t == "bt" || t == "2") return ProtocolLabel::Bluetooth;
    throw ConfigError("unknown protocol label '" + std::string(text) + "'");
}

FrameKind parse_frame_kind(std::string_view text) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == text) return static_cast<FrameKind>(i);
    }
    throw DataError("unknown frame kind '" + std::string(text) + "'");
}

Scenario parse_scenario(std::string_view text) {
    const std::string t = lower(text);
    if (t == "beacon" || t == "beacononly") return Scenario::BeaconOnly;
    if (t == "wifi" || t == "wifiexchange") return Scenario::WifiExchange;
    if (t == "bluetooth" || t == "bt") return Scenario::Bluetooth;
    if (t == "mixed") return Scenario::Mixed;
    throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

void GeneratorConfig::validate(double sample_rate_hz) const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string(name) + " must be positive and finite");
        }
    };
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string(name) + " must be non-negative and finite");
        }
    };
    auto range = [&](const RangeUs& r, const char* name) {
        non_negative(r.min, name);
        non_negative(r.max, name);
        if (r.min > r.max) throw ConfigError(std::string(name) + ": min must not exceed max");
    };
    positive(sample_rate_hz, "sample_rate_hz");
    positive(duration_s, "duration_s");
    if (duration_s * sample_rate_hz > 4e9) {
        throw ConfigError("duration_s * sample_rate_hz exceeds the supported recording size");
    }
    positive(amplitude, "amplitude");
    non_negative(amplitude_jitter_db, "amplitude_jitter_db");
    non_negative(lead_in_us, "lead_in_us");
    positive(beacon_interval_us, "beacon_interval_us");
    positive(beacon_airtime_us, "beacon_airtime_us");
    if (beacon_airtime_us >= beacon_interval_us) {
        throw ConfigError("beacon_airtime_us must be shorter than beacon_interval_us");
    }
    non_negative(sifs_us, "sifs_us");
    non_negative(difs_us, "difs_us");
    positive(rts_us, "rts_us");
    positive(cts_us, "cts_us");
    positive(wifi_ack_us, "wifi_ack_us");
    range(wifi_data_frame_us_range, "wifi_data_frame_us_range");
    positive(wifi_data_frame_us_range.min, "wifi_data_frame_us_range.min");
    if (wifi_subcarrier_count < 1) throw ConfigError("wifi_subcarrier_count must be >= 1");
    if (control_subcarrier_count < 1 || control_subcarrier_count > wifi_subcarrier_count) {
        throw ConfigError("control_subcarrier_count must be in [1, wifi_subcarrier_count]");
    }
    range(bt_data_us_range, "bt_data_us_range");
    positive(bt_data_us_range.min, "bt_data_us_range.min");
    range(bt_ack_delay_us_range, "bt_ack_delay_us_range");
    range(bt_ack_us_range, "bt_ack_us_range");
    positive(bt_ack_us_range.min, "bt_ack_us_range.min");
    non_negative(bt_idle_us, "bt_idle_us");
    non_negative(bt_freq_dev_hz, "bt_freq_dev_hz");
    positive(bt_symbol_rate_hz, "bt_symbol_rate_hz");
}

std::string config_hash(const GeneratorConfig& c, double sample_rate_hz) {
    const nlohmann::ordered_json j{
        {"sample_rate_hz", sample_rate_hz},
        {"scenario", to_string(c.scenario)},
        {"duration_s", c.duration_s},
        {"seed", c.seed},
        {"amplitude", c.amplitude},
        {"amplitude_jitter_db", c.amplitude_jitter_db},
        {"lead_in_us", c.lead_in_us},
        {"beacon", {c.beacon_interval_us, c.beacon_airtime_us}},
        {"wifi",
         {c.sifs_us, c.difs_us, c.rts_us, c.cts_us, c.wifi_ack_us, c.wifi_data_frame_us_range.min,
          c.wifi_data_frame_us_range.max, c.wifi_subcarrier_count, c.control_subcarrier_count}},
        {"bluetooth",
         {c.bt_data_us_range.min, c.bt_data_us_range.max, c.bt_ack_delay_us_range.min,
          c.bt_ack_delay_us_range.max, c.bt_ack_us_range.min, c.bt_ack_us_range.max, c.bt_idle_us,
          c.bt_freq_dev_hz, c.bt_symbol_rate_hz}},
    };
    return detail::fnv1a_hex(j.dump());
}

GeneratedSignal generate_beacon(const GeneratorConfig& config, double sample_rate_hz) {
    require_scenario(config, Scenario::BeaconOnly);
    config.validate(sample_rate_hz);
    auto out = beacon_stream(config, sample_rate_hz);
    finish_meta(out);
    return out;
}

GeneratedSignal generate_wifi_exchange(const GeneratorConfig& config, double sample_rate_hz) {
    require_scenario(config, Scenario::WifiExchange);
    config.validate(sample_rate_hz);
    GeneratedSignal out{blank_recording(config, sample_rate_hz), {}};
    auto& rec = out.recording;
    auto& truth = out.truth;
    const Timeline tl(sample_rate_hz, rec.size());
    auto beacon_rng = make_burst_rng(config.seed, Stream::Beacon);
    auto rng = make_stream(config.seed, Stream::Wifi);
    auto burst = make_burst_rng(config.seed, Stream::Wifi);

    const SampleIndex sifs = tl.samples(config.sifs_us);
    const SampleIndex difs = tl.samples(config.difs_us);
    const SampleIndex rts = tl.samples(config.rts_us);
    const SampleIndex cts = tl.samples(config.cts_us);
    const SampleIndex ack = tl.samples(config.wifi_ack_us);
    const SampleIndex interval = tl.samples(config.beacon_interval_us);
    const SampleIndex airtime = tl.samples(config.beacon_airtime_us);

    // The access point sends a beacon at every interval; an exchange that would end
    // less than DIFS before the next beacon is deferred until after it.
    SampleIndex next_beacon = tl.samples(config.lead_in_us);
    SampleIndex cursor = next_beacon;
    std::size_t cycles = 0;
    while (true) {
        const bool beacon_due = tl.fits(next_beacon + airtime);
        const SampleIndex data = tl.draw(config.wifi_data_frame_us_range, rng);
        const SampleIndex rts_start = cursor;
        const SampleIndex cts_start = rts_start + rts + sifs;
        const SampleIndex data_start = cts_start + cts + sifs;
        const SampleIndex ack_start = data_start + data + sifs;
        const SampleIndex cycle_end = ack_start + ack;
        if (beacon_due && cycle_end + difs > next_beacon) {
            emit_ofdm(rec, truth, config, next_beacon, airtime, ProtocolLabel::WifiBeacon,
                      FrameKind::Beacon, beacon_rng);
            cursor = next_beacon + airtime + difs;
            next_beacon += interval;
            continue;
        }
        if (!tl.fits(cycle_end)) break;
        emit_ofdm(rec, truth, config, rts_start, rts, ProtocolLabel::Wifi, FrameKind::Rts, burst);
        emit_ofdm(rec, truth, config, cts_start, cts, ProtocolLabel::Wifi, FrameKind::Cts, burst);
        emit_ofdm(rec, truth, config, data_start, data, ProtocolLabel::Wifi, FrameKind::Data, burst);
        emit_ofdm(rec, truth, config, ack_start, ack, ProtocolLabel::Wifi, FrameKind::Ack, burst);
        cursor = cycle_end + difs;
        ++cycles;
    }
    rec.meta["wifi_cycles"] = std::to_string(cycles);
    finish_meta(out);
    return out;
}

GeneratedSignal generate_bluetooth(const GeneratorConfig& config, double sample_rate_hz) {
    require_scenario(config, Scenario::Bluetooth);
    config.validate(sample_rate_hz);
    auto out = bluetooth_stream(config, sample_rate_hz);
    finish_meta(out);
    return out;
}

GeneratedSignal generate_mixed(const GeneratorConfig& config, double sample_rate_hz) {
    require_scenario(config, Scenario::Mixed);
    config.validate(sample_rate_hz);
    auto out = beacon_stream(config, sample_rate_hz);
    const auto bt = bluetooth_stream(config, sample_rate_hz);

    auto& samples = out.recording.samples;
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] += bt.recording.samples[i];

    const std::size_t beacons = out.truth.size();
    out.truth.insert(out.truth.end(), bt.truth.begin(), bt.truth.end());
    std::stable_sort(out.truth.begin(), out.truth.end(),
                     [](const TruthBurst& a, const TruthBurst& b) {
                         return a.start_sample < b.start_sample;
                     });

    auto& meta = out.recording.meta;
    meta["beacon_count"] = std::to_string(beacons);
    meta["bluetooth_cycles"] = bt.recording.meta.at("bluetooth_cycles");
    const double overlap = overlap_fraction(out.truth);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", overlap);
    meta["overlap_fraction"] = buf;
    meta["has_overlaps"] = overlap > 0.0 ? "true" : "false";
    finish_meta(out);
    return out;
}

GeneratedSignal generate(const GeneratorConfig& config, double sample_rate_hz) {
    switch (config.scenario) {
    case Scenario::BeaconOnly: return generate_beacon(config, sample_rate_hz);
    case Scenario::WifiExchange: return generate_wifi_exchange(config, sample_rate_hz);
    case Scenario::Bluetooth: return generate_bluetooth(config, sample_rate_hz);
    case Scenario::Mixed: return generate_mixed(config, sample_rate_hz);
    }
    throw ConfigError("unknown scenario");
}

double overlap_fraction(const BurstTruth& truth) {
    if (truth.empty()) return 0.0;
    std::vector<const TruthBurst*> sorted;
    sorted.reserve(truth.size());
    for (const auto& b : truth) sorted.push_back(&b);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->start_sample < b->start_sample;
    });
    std::vector<bool> overlapped(sorted.size(), false);
    // Sweep keeping the burst with the furthest end seen so far.
    std::size_t reach = 0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->start_sample < sorted[reach]->end_sample) {
            overlapped[i] = true;
            overlapped[reach] = true;
        }
        if (sorted[i]->end_sample > sorted[reach]->end_sample) reach = i;
    }
    const auto n = std::count(overlapped.begin(), overlapped.end(), true);
    return static_cast<double>(n) / static_cast<double>(sorted.size());
}

double burst_region_power(const IqRecording& rec) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : rec.samples) {
        const double p = std::norm(std::complex<double>(s));
        if (p > 0.0) {
            sum += p;
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

IqRecording add_awgn(const IqRecording& rec, double snr_db, std::uint64_t seed) {
    if (rec.samples.empty()) throw DataError("add_awgn: empty recording");
    if (std::isnan(snr_db)) throw ConfigError("add_awgn: snr_db is NaN");
    if (snr_db == kNoNoise) return rec;
    const double signal_power = burst_region_power(rec);
    if (signal_power <= 0.0) {
        throw DataError("add_awgn: recording has no burst-region power, SNR undefined");
    }
    const double noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));

    IqRecording out = rec;
    for (auto& s : out.samples) {
        const double i = gauss(rng);
        const double q = gauss(rng);
        s += Sample(static_cast<float>(i), static_cast<float>(q));
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", snr_db);
    out.meta["snr_db"] = buf;
    out.meta["noise_seed"] = std::to_string(seed);
    return out;
}

} // namespace protoid
