#pragma once

// Command-line front end. `run` parses and executes one invocation and maps
// failures to a single "error[kind]: message" line and the exit code of the
// error kind.

#include <iosfwd>
#include <string>
#include <vector>

#include "sing/dsp.hpp"
#include "sing/losses.hpp"

namespace sing::cli {

/// Environment variable naming the default run directory of `train`.
inline constexpr const char* kRunDirEnv = "SING_RUN_DIR";

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// CSV dump of log(epsilon + |STFT|^2): a "# frame_size=..,hop=..,epsilon=.."
/// header line followed by one row per frame.
void write_spectrogram_csv(const dsp::LogPowerSpectrogram& s, const losses::SpectralParams& params,
                           std::ostream& out);

}  // namespace sing::cli
