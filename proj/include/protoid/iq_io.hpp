#pragma once

// File formats for recordings and burst intervals.
//
//   <name>.iq         raw interleaved little-endian float32 I0,Q0,I1,Q1,...
//   <name>.meta.json  {"sample_rate_hz": ..., "scenario": ..., "seed": ..., "config_hash": ..., ...}
//   truth JSON        [{"start_sample", "end_sample", "label" (integer code), "kind"}, ...]
//   detections JSON   [{"start_sample", "end_sample", "peak_ratio"}, ...]

#include "protoid/burst_detect.hpp"
#include "protoid/signal_model.hpp"

#include <filesystem>
#include <string>

namespace protoid::io {

/// Sidecar path for an IQ file: "dir/name.iq" -> "dir/name.meta.json".
std::filesystem::path meta_path_for(const std::filesystem::path& iq_path);

void write_recording(const std::filesystem::path& iq_path, const IqRecording& rec);
IqRecording read_recording(const std::filesystem::path& iq_path);

std::string truth_to_json(const BurstTruth& truth);
BurstTruth truth_from_json(const std::string& text);
void write_truth(const std::filesystem::path& path, const BurstTruth& truth);
BurstTruth read_truth(const std::filesystem::path& path);

std::string detections_to_json(const std::vector<DetectedBurst>& bursts);
std::vector<DetectedBurst> detections_from_json(const std::string& text);
void write_detections(const std::filesystem::path& path, const std::vector<DetectedBurst>& bursts);
std::vector<DetectedBurst> read_detections(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace protoid::io
