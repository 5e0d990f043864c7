#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "arspec/conditions.hpp"
#include "arspec/signal.hpp"

namespace arspec {

namespace fs = std::filesystem;

// %.17g: round-trips every double exactly.
std::string format_double(double v);

// Header `value`, one sample per line. Reading throws Io on unreadable files
// and InvalidSignal on malformed values.
void write_signal_csv(const fs::path& path, const TimeSeriesEpoch& ts);
TimeSeriesEpoch read_signal_csv(const fs::path& path, double fs);

// Columns omega,hz,value.
void write_curve_csv(const fs::path& path, const SpectralCurve& curve, double fs);
SpectralCurve read_curve_csv(const fs::path& path);

// Index columns file,subject,odor,condition,phase,fs; `file` is relative to
// the index's directory. Writing puts every epoch next to the index.
void write_trialset(const fs::path& index_path, const TrialSet& ts);
TrialSet read_trialset(const fs::path& index_path);

// Plain text writer that creates parent directories and throws Io on failure.
void write_text(const fs::path& path, const std::string& content);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

}  // namespace arspec
