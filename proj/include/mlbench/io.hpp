#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mlbench/bridge.hpp"
#include "mlbench/models.hpp"

namespace mlbench {

// Dataset as CSV: a "N,D" line, then one row per observation at full
// round-trip precision.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

// Latent state in named sections ([assignments], [theta], [U], [V], [Z],
// [A]) after "# key: value" lines for model, seed, spec_hash and exact.
void write_state(const std::filesystem::path& path, const ModelSpec& spec,
                 const ExactSample& sample);
// Raises "provenance missing" when the header lacks the exact-sample fields
// and "spec mismatch" when the recorded hash differs from spec's.
ExactSample read_state(const std::filesystem::path& path, const ModelSpec& spec);

std::string format_double(double v);

}  // namespace mlbench
