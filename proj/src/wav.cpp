#include "af/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace af {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 24) & 0xFF);
}
void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("wav: cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ConfigError("wav: '" + path + "' is not a RIFF WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_size = read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_size > bytes.size())
      chunk_size = static_cast<std::uint32_t>(bytes.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw ConfigError("wav: malformed fmt chunk");
      format = read_u16(body);
      channels = read_u16(body + 2);
      sample_rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      if (format == kFormatExtensible && chunk_size >= 40)
        format = read_u16(body + 24);  // first two bytes of the sub-format GUID
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_size = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!data || channels == 0 || sample_rate == 0)
    throw ConfigError("wav: '" + path + "' missing fmt or data chunk");

  bool pcm16 = (format == kFormatPcm && bits == 16);
  bool f32 = (format == kFormatFloat && bits == 32);
  if (!pcm16 && !f32)
    throw ConfigError("wav: '" + path + "' unsupported encoding (need PCM16 or float32), format " +
                      std::to_string(format) + " bits " + std::to_string(bits));

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(channels, static_cast<Eigen::Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    const unsigned char* fr = data + t * frame_bytes;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = fr + c * bytes_per_sample;
      float v;
      if (pcm16) {
        std::int16_t raw = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        v = static_cast<float>(raw) / 32768.0f;
      } else {
        std::uint32_t raw = read_u32(s);
        std::memcpy(&v, &raw, 4);
      }
      clip.samples(c, static_cast<Eigen::Index>(t)) = v;
    }
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip, int format) {
  if (format != 16 && format != 32) throw ConfigError("wav: format must be 16 or 32");
  const int channels = clip.channels();
  const long frames = clip.sample_count();
  const std::uint16_t bits = static_cast<std::uint16_t>(format);
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(frames * channels * (bits / 8));

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format == 16 ? kFormatPcm : kFormatFloat);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, rate);
  put_u32(out, rate * channels * (bits / 8));
  put_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  for (long t = 0; t < frames; ++t) {
    for (int c = 0; c < channels; ++c) {
      float v = clip.samples(c, t);
      if (format == 16) {
        float clamped = std::max(-1.0f, std::min(1.0f, v));
        std::int16_t raw = static_cast<std::int16_t>(std::lrintf(clamped * 32767.0f));
        put_u16(out, static_cast<std::uint16_t>(raw));
      } else {
        std::uint32_t raw;
        std::memcpy(&raw, &v, 4);
        put_u32(out, raw);
      }
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("wav: cannot write '" + path + "'");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace af
