// RIFF WAV reading/writing: 16-bit PCM and 32-bit IEEE float, any channel
// count. Samples are normalized to [-1, 1] floats, one channel per row.

#pragma once

#include <string>

#include "af/common.hpp"

namespace af {

struct AudioClip {
  ChannelMatrix samples;  // M x T
  double sample_rate = 16000.0;

  int channels() const { return static_cast<int>(samples.rows()); }
  long sample_count() const { return static_cast<long>(samples.cols()); }
  double duration() const { return sample_count() / sample_rate; }
};

AudioClip read_wav(const std::string& path);

// format: 16 -> PCM16, 32 -> IEEE float32 (default).
void write_wav(const std::string& path, const AudioClip& clip, int format = 32);

}  // namespace af
