#include "af/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unsupported/Eigen/FFT>

#include "af/stft.hpp"

namespace af {

namespace {

constexpr int kKernelHalf = 16;  // windowed-sinc interpolation half-width

double sinc(double s) {
  if (s == 0.0) return 1.0;
  return std::sin(kPi * s) / (kPi * s);
}

double kernel_window(double s) {
  if (std::abs(s) >= kKernelHalf) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * s / kKernelHalf));
}

// 32-tap fractional-delay kernel for read position base + frac.
void fill_kernel(double frac, double* coeff) {
  for (int j = -kKernelHalf + 1; j <= kKernelHalf; ++j) {
    double s = j - frac;
    coeff[j + kKernelHalf - 1] = sinc(s) * kernel_window(s);
  }
}

double sample_at(const std::vector<double>& x, long idx) {
  if (idx < 0 || idx >= static_cast<long>(x.size())) return 0.0;
  return x[static_cast<std::size_t>(idx)];
}

}  // namespace

std::uint64_t GaussianRng::raw() {
  state_ += 0x9E3779B97f4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double GaussianRng::uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

double GaussianRng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * kPi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

double SourceSpec::azimuth_at(double t) const {
  if (trajectory.empty()) throw ConfigError("scene: source without trajectory");
  if (trajectory.size() == 1 || t <= trajectory.front().t) return trajectory.front().azimuth_deg;
  if (t >= trajectory.back().t) return trajectory.back().azimuth_deg;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (t <= trajectory[i].t) {
      const TrajectoryPoint& a = trajectory[i - 1];
      const TrajectoryPoint& b = trajectory[i];
      double f = (t - a.t) / (b.t - a.t);
      return a.azimuth_deg + f * (b.azimuth_deg - a.azimuth_deg);
    }
  }
  return trajectory.back().azimuth_deg;
}

double SourceSpec::distance_at(double t) const {
  if (trajectory.empty()) throw ConfigError("scene: source without trajectory");
  if (trajectory.size() == 1 || t <= trajectory.front().t) return trajectory.front().distance_m;
  if (t >= trajectory.back().t) return trajectory.back().distance_m;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (t <= trajectory[i].t) {
      const TrajectoryPoint& a = trajectory[i - 1];
      const TrajectoryPoint& b = trajectory[i];
      double f = (t - a.t) / (b.t - a.t);
      return a.distance_m + f * (b.distance_m - a.distance_m);
    }
  }
  return trajectory.back().distance_m;
}

void SceneScript::validate() const {
  if (!(duration > 0)) throw ConfigError("scene: duration must be positive");
  if (!(sample_rate > 0)) throw ConfigError("scene: sample rate must be positive");
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const SourceSpec& src = sources[s];
    std::string tag = "scene: source " + std::to_string(s);
    if (src.trajectory.empty()) throw ConfigError(tag + " has no trajectory");
    if (!(src.onset < src.offset)) throw ConfigError(tag + ": onset must precede offset");
    double prev_t = -1e300;
    for (const TrajectoryPoint& p : src.trajectory) {
      if (!(p.distance_m > 0)) throw ConfigError(tag + ": distances must be positive");
      if (p.t < prev_t) throw ConfigError(tag + ": trajectory times must be non-decreasing");
      prev_t = p.t;
    }
    if (src.reverb_taps < 0) throw ConfigError(tag + ": reverb_taps must be >= 0");
    if (src.signal == SourceSpec::Signal::WavFile && src.wav_path.empty())
      throw ConfigError(tag + ": wav source without a path");
  }
}

SceneScript parse_scene(const toml::Table& doc) {
  SceneScript script;
  script.duration = doc.get_double("duration", 10.0);
  script.sample_rate = doc.get_double("sample_rate", 16000.0);
  script.seed = static_cast<std::uint64_t>(doc.get_int("seed", 0));
  script.snr_db = doc.get_double("snr_db", std::numeric_limits<double>::infinity());

  if (doc.has_table_array("sources")) {
    for (const toml::Table& st : doc.table_array("sources")) {
      SourceSpec src;
      std::string sig = st.get_string("signal", "speech");
      if (sig == "white") {
        src.signal = SourceSpec::Signal::WhiteNoise;
      } else if (sig == "speech" || sig == "ar") {
        src.signal = SourceSpec::Signal::SpeechLike;
      } else if (sig.rfind("wav:", 0) == 0) {
        src.signal = SourceSpec::Signal::WavFile;
        src.wav_path = sig.substr(4);
      } else {
        throw ConfigError("scene: unknown signal type '" + sig + "'");
      }
      src.onset = st.get_double("onset", 0.0);
      src.offset = st.get_double("offset", script.duration);
      src.level_db = st.get_double("level_db", 0.0);
      if (st.has("trajectory")) {
        for (const toml::Value& row : st.at("trajectory").as_array()) {
          std::vector<double> v = row.as_double_array();
          if (v.size() != 3)
            throw ConfigError("scene: trajectory rows are [t, azimuth_deg, distance_m]");
          src.trajectory.push_back({v[0], v[1], v[2]});
        }
      } else {
        src.trajectory.push_back(
            {0.0, st.get_double("azimuth_deg", 0.0), st.get_double("distance_m", 2.0)});
      }
      src.reverb_taps = static_cast<int>(st.get_int("reverb_taps", 0));
      src.reverb_decay = st.get_double("reverb_decay", 0.6);
      src.reverb_level = st.get_double("reverb_level", 0.5);
      script.sources.push_back(std::move(src));
    }
  }
  script.validate();
  return script;
}

SceneScript load_scene(const std::string& path) {
  try {
    return parse_scene(toml::parse_file(path));
  } catch (const toml::ParseError& e) {
    throw ConfigError("scene '" + path + "': " + e.what());
  }
}

namespace {

// Dry source signal plus its amplitude envelope (0..1), both T samples.
struct DrySignal {
  std::vector<double> x;
  std::vector<float> envelope;
};

DrySignal generate_dry(const SourceSpec& src, double fs, long samples, GaussianRng& rng) {
  DrySignal out;
  out.x.assign(static_cast<std::size_t>(samples), 0.0);
  out.envelope.assign(static_cast<std::size_t>(samples), 0.0f);

  const long on_start = std::max<long>(0, static_cast<long>(src.onset * fs));
  const long on_end = std::min<long>(samples, static_cast<long>(src.offset * fs));
  if (on_start >= on_end) return out;

  // Amplitude envelope: rectangular for noise/wav sources, random on/off
  // bursts with raised-cosine ramps for speech-like ones.
  const long ramp = static_cast<long>(0.005 * fs);
  auto ramped = [&](long t, long seg_start, long seg_end) -> double {
    double v = 1.0;
    if (t - seg_start < ramp) v = std::min(v, 0.5 - 0.5 * std::cos(kPi * (t - seg_start) / ramp));
    if (seg_end - 1 - t < ramp)
      v = std::min(v, 0.5 - 0.5 * std::cos(kPi * (seg_end - 1 - t) / ramp));
    return v;
  };

  if (src.signal == SourceSpec::Signal::SpeechLike) {
    long t = on_start;
    while (t < on_end) {
      long burst = static_cast<long>((0.12 + 0.23 * rng.uniform()) * fs);
      long gap = static_cast<long>((0.08 + 0.17 * rng.uniform()) * fs);
      long seg_end = std::min(on_end, t + burst);
      for (long i = t; i < seg_end; ++i)
        out.envelope[static_cast<std::size_t>(i)] = static_cast<float>(ramped(i, t, seg_end));
      t = seg_end + gap;
    }
  } else {
    for (long i = on_start; i < on_end; ++i)
      out.envelope[static_cast<std::size_t>(i)] =
          static_cast<float>(ramped(i, on_start, on_end));
  }

  // Raw waveform.
  std::vector<double> raw(static_cast<std::size_t>(samples), 0.0);
  switch (src.signal) {
    case SourceSpec::Signal::WhiteNoise:
      for (long i = on_start; i < on_end; ++i) raw[static_cast<std::size_t>(i)] = rng.gaussian();
      break;
    case SourceSpec::Signal::SpeechLike: {
      // AR(2) resonance at a per-source random center frequency.
      double f0 = 300.0 + 2200.0 * rng.uniform();
      double radius = 0.9;
      double a1 = 2.0 * radius * std::cos(2.0 * kPi * f0 / fs);
      double a2 = -radius * radius;
      double y1 = 0.0, y2 = 0.0;
      for (long i = on_start; i < on_end; ++i) {
        double y = rng.gaussian() + a1 * y1 + a2 * y2;
        raw[static_cast<std::size_t>(i)] = y;
        y2 = y1;
        y1 = y;
      }
      break;
    }
    case SourceSpec::Signal::WavFile: {
      AudioClip clip = read_wav(src.wav_path);
      if (clip.sample_rate != fs)
        throw ConfigError("scene: wav '" + src.wav_path + "' sample rate " +
                          std::to_string(clip.sample_rate) + " does not match scene rate");
      long n = clip.sample_count();
      if (n < 1) throw ConfigError("scene: wav '" + src.wav_path + "' is empty");
      for (long i = on_start; i < on_end; ++i)
        raw[static_cast<std::size_t>(i)] = clip.samples(0, (i - on_start) % n);
      break;
    }
  }

  // Normalize active RMS to 0.1 * 10^(level/20).
  double sum2 = 0.0;
  long active = 0;
  for (long i = 0; i < samples; ++i) {
    double v = raw[static_cast<std::size_t>(i)] * out.envelope[static_cast<std::size_t>(i)];
    if (out.envelope[static_cast<std::size_t>(i)] > 0.5f) {
      sum2 += v * v;
      ++active;
    }
  }
  double rms = active > 0 ? std::sqrt(sum2 / active) : 0.0;
  double gain = rms > 0 ? 0.1 * std::pow(10.0, src.level_db / 20.0) / rms : 0.0;
  for (long i = 0; i < samples; ++i)
    out.x[static_cast<std::size_t>(i)] =
        raw[static_cast<std::size_t>(i)] * out.envelope[static_cast<std::size_t>(i)] * gain;
  return out;
}

bool is_static(const SourceSpec& src) {
  for (std::size_t i = 1; i < src.trajectory.size(); ++i) {
    if (src.trajectory[i].azimuth_deg != src.trajectory[0].azimuth_deg ||
        src.trajectory[i].distance_m != src.trajectory[0].distance_m)
      return false;
  }
  return true;
}

// Anechoic path: per-channel fractional delay by windowed-sinc
// interpolation, common 1/distance gain.
void render_anechoic(const SourceSpec& src, const std::vector<double>& x,
                     const ArrayGeometry& geometry, double fs,
                     std::vector<std::vector<double>>& mix) {
  const long samples = static_cast<long>(x.size());
  const int channels = geometry.mic_count();
  const double c = geometry.speed_of_sound;
  double coeff[2 * kKernelHalf];

  for (int m = 0; m < channels; ++m) {
    std::vector<double>& y = mix[static_cast<std::size_t>(m)];
    if (is_static(src)) {
      const double az = src.trajectory[0].azimuth_deg;
      const double dist = src.trajectory[0].distance_m;
      const Eigen::Vector3d u = azimuth_direction(az);
      const double delay_samples =
          (dist - u.dot(geometry.mic_positions.col(m))) / c * fs;
      const double gain = 1.0 / dist;
      const long base = static_cast<long>(std::floor(-delay_samples));
      const double frac = -delay_samples - base;  // read position t - delay
      fill_kernel(frac, coeff);
      for (long t = 0; t < samples; ++t) {
        double acc = 0.0;
        long lo = t + base - kKernelHalf + 1;
        for (int j = 0; j < 2 * kKernelHalf; ++j) acc += coeff[j] * sample_at(x, lo + j);
        y[static_cast<std::size_t>(t)] += gain * acc;
      }
    } else {
      for (long t = 0; t < samples; ++t) {
        double tsec = t / fs;
        double az = src.azimuth_at(tsec);
        double dist = src.distance_at(tsec);
        Eigen::Vector3d u = azimuth_direction(az);
        double delay_samples = (dist - u.dot(geometry.mic_positions.col(m))) / c * fs;
        double gain = 1.0 / dist;
        double pos = t - delay_samples;
        long base = static_cast<long>(std::floor(pos));
        fill_kernel(pos - base, coeff);
        double acc = 0.0;
        long lo = base - kKernelHalf + 1;
        for (int j = 0; j < 2 * kKernelHalf; ++j) acc += coeff[j] * sample_at(x, lo + j);
        y[static_cast<std::size_t>(t)] += gain * acc;
      }
    }
  }
}

// Reverberant path: per-frequency CTF taps applied to the dry STFT, then
// weighted overlap-add resynthesis. Tap 0 is the theoretical direct path.
void render_reverberant(const SourceSpec& src, const std::vector<double>& x,
                        const ArrayGeometry& geometry, double fs, int window, int hop,
                        GaussianRng& rng, std::vector<std::vector<double>>& mix) {
  const long samples = static_cast<long>(x.size());
  const int channels = geometry.mic_count();
  const int bins = window / 2 + 1;
  const double c = geometry.speed_of_sound;

  ChannelMatrix xm(1, samples);
  for (long t = 0; t < samples; ++t)
    xm(0, t) = static_cast<float>(x[static_cast<std::size_t>(t)]);
  AudioClip dry;
  dry.samples = std::move(xm);
  dry.sample_rate = fs;
  if (samples < window) return;
  std::vector<SpectrogramFrame> frames = stft_stream(dry, window, hop);
  const long nframes = static_cast<long>(frames.size());

  // Scripted echo taps, per (channel, tap >= 1, frequency).
  const double dist0 = src.trajectory[0].distance_m;
  std::vector<Eigen::MatrixXcd> echo(static_cast<std::size_t>(channels));
  for (int m = 0; m < channels; ++m) {
    echo[static_cast<std::size_t>(m)].resize(std::max(0, src.reverb_taps - 1), bins);
    for (int q = 1; q < src.reverb_taps; ++q) {
      double amp = (1.0 / dist0) * src.reverb_level * std::pow(src.reverb_decay, q - 1);
      for (int k = 0; k < bins; ++k)
        echo[static_cast<std::size_t>(m)](q - 1, k) =
            amp * Complex(rng.gaussian(), rng.gaussian()) * std::sqrt(0.5);
    }
  }

  Eigen::VectorXd win = hann_window(window);
  std::vector<double> denom(static_cast<std::size_t>(samples), 0.0);
  std::vector<std::vector<double>> chan(static_cast<std::size_t>(channels),
                                        std::vector<double>(static_cast<std::size_t>(samples)));

  Eigen::VectorXcd spectrum(window);
  Eigen::VectorXcd frame_time(window);
  Eigen::FFT<double> fft;
  std::vector<Complex> in_buf(static_cast<std::size_t>(window)),
      out_buf(static_cast<std::size_t>(window));

  for (int m = 0; m < channels; ++m) {
    for (long p = 0; p < nframes; ++p) {
      const double t_center = frames[static_cast<std::size_t>(p)].t;
      const double az = src.azimuth_at(t_center);
      const double dist = src.distance_at(t_center);
      const Eigen::Vector3d u = azimuth_direction(az);
      // Direct-path tap: inter-channel part of the delay only, unit-modulus
      // phase times the 1/distance gain.
      const double tau_m = -u.dot(geometry.mic_positions.col(m)) / c;

      spectrum.setZero();
      for (int k = 0; k < bins; ++k) {
        double fk = (bins == 1) ? 0.0 : k * fs / (2.0 * (bins - 1));
        Complex tap0 = std::polar(1.0 / dist, -2.0 * kPi * fk * tau_m);
        Complex y = tap0 * frames[static_cast<std::size_t>(p)].coeffs(0, k);
        for (int q = 1; q < src.reverb_taps && p - q >= 0; ++q)
          y += echo[static_cast<std::size_t>(m)](q - 1, k) *
               frames[static_cast<std::size_t>(p - q)].coeffs(0, k);
        spectrum(k) = y;
        if (k > 0 && k < window - k) spectrum(window - k) = std::conj(y);
      }

      for (int t = 0; t < window; ++t) in_buf[static_cast<std::size_t>(t)] = spectrum(t);
      fft.inv(out_buf, in_buf);

      long start = p * hop;
      for (int t = 0; t < window && start + t < samples; ++t) {
        chan[static_cast<std::size_t>(m)][static_cast<std::size_t>(start + t)] +=
            out_buf[static_cast<std::size_t>(t)].real() * win(t);
        if (m == 0) denom[static_cast<std::size_t>(start + t)] += win(t) * win(t);
      }
    }
  }

  for (int m = 0; m < channels; ++m)
    for (long t = 0; t < samples; ++t) {
      double d = denom[static_cast<std::size_t>(t)];
      if (d > 1e-6)
        mix[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] +=
            chan[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] / d;
    }
}

}  // namespace

std::pair<AudioClip, GroundTruth> render_scene(const SceneScript& script,
                                               const ArrayGeometry& geometry, int stft_window,
                                               int stft_hop) {
  script.validate();
  geometry.validate();
  const double fs = script.sample_rate;
  const long samples = static_cast<long>(std::llround(script.duration * fs));
  const int channels = geometry.mic_count();

  std::vector<std::vector<double>> mix(
      static_cast<std::size_t>(channels),
      std::vector<double>(static_cast<std::size_t>(samples), 0.0));
  std::vector<std::vector<float>> envelopes;

  for (std::size_t s = 0; s < script.sources.size(); ++s) {
    const SourceSpec& src = script.sources[s];
    GaussianRng rng(script.seed * 1000003ULL + 7919ULL * (s + 1));
    DrySignal dry = generate_dry(src, fs, samples, rng);
    envelopes.push_back(std::move(dry.envelope));
    if (src.reverb_taps > 0)
      render_reverberant(src, dry.x, geometry, fs, stft_window, stft_hop, rng, mix);
    else
      render_anechoic(src, dry.x, geometry, fs, mix);
  }

  // Diffuse noise at the scripted SNR relative to the mixed signal power.
  if (std::isfinite(script.snr_db)) {
    double p_sig = 0.0;
    for (int m = 0; m < channels; ++m)
      for (long t = 0; t < samples; ++t) {
        double v = mix[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)];
        p_sig += v * v;
      }
    p_sig /= static_cast<double>(channels) * static_cast<double>(samples);
    if (p_sig > 0.0) {
      double sigma = std::sqrt(p_sig / std::pow(10.0, script.snr_db / 10.0));
      GaussianRng noise_rng(script.seed * 1000003ULL + 17);
      for (int m = 0; m < channels; ++m)
        for (long t = 0; t < samples; ++t)
          mix[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] +=
              sigma * noise_rng.gaussian();
    }
  }

  // Common headroom scaling keeps inter-channel ratios intact.
  double peak = 0.0;
  for (int m = 0; m < channels; ++m)
    for (long t = 0; t < samples; ++t)
      peak = std::max(peak,
                      std::abs(mix[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)]));
  double scale = peak > 0.99 ? 0.99 / peak : 1.0;

  AudioClip clip;
  clip.sample_rate = fs;
  clip.samples.resize(channels, samples);
  for (int m = 0; m < channels; ++m)
    for (long t = 0; t < samples; ++t)
      clip.samples(m, t) = static_cast<float>(
          mix[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)] * scale);

  GroundTruth gt;
  if (samples >= stft_window) {
    long nframes = (samples - stft_window) / stft_hop + 1;
    for (long p = 0; p < nframes; ++p) {
      double t = (p * stft_hop + stft_window / 2.0) / fs;
      long tc = p * stft_hop + stft_window / 2;
      for (std::size_t s = 0; s < script.sources.size(); ++s) {
        const SourceSpec& src = script.sources[s];
        if (t < src.onset || t > src.offset) continue;
        GroundTruthEntry e;
        e.frame = p;
        e.t = t;
        e.source = static_cast<int>(s);
        e.azimuth_deg = wrap_degrees(src.azimuth_at(t));
        e.distance_m = src.distance_at(t);
        e.voiced = tc < samples && envelopes[s][static_cast<std::size_t>(tc)] > 0.5f;
        gt.entries.push_back(e);
      }
    }
  }
  return {std::move(clip), std::move(gt)};
}

std::vector<const GroundTruthEntry*> GroundTruth::at_frame(long frame) const {
  std::vector<const GroundTruthEntry*> out;
  for (const GroundTruthEntry& e : entries)
    if (e.frame == frame) out.push_back(&e);
  return out;
}

void GroundTruth::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("ground truth: cannot write '" + path + "'");
  out << "frame,t,source,azimuth_deg,distance_m,voiced\n";
  char buf[160];
  for (const GroundTruthEntry& e : entries) {
    std::snprintf(buf, sizeof(buf), "%ld,%.6f,%d,%.4f,%.4f,%d\n", e.frame, e.t, e.source,
                  e.azimuth_deg, e.distance_m, e.voiced ? 1 : 0);
    out << buf;
  }
}

double oracle_tdoa(const AudioClip& clip, int m, int n, double max_lag_s) {
  if (m < 0 || n < 0 || m >= clip.channels() || n >= clip.channels())
    throw std::out_of_range("oracle_tdoa: channel out of range");
  const long samples = clip.sample_count();
  if (samples < static_cast<long>(0.1 * clip.sample_rate))
    throw RuntimeFailure("oracle_tdoa: need at least 0.1 s of signal");

  const long max_lag = std::max<long>(1, static_cast<long>(max_lag_s * clip.sample_rate));
  double em = clip.samples.row(m).cast<double>().squaredNorm();
  double en = clip.samples.row(n).cast<double>().squaredNorm();
  if (em == 0.0 || en == 0.0) throw RuntimeFailure("oracle_tdoa: silent channel");

  // C(l) = sum_t y_m(t + l) y_n(t); the peak lag estimates T_m - T_n.
  Eigen::VectorXd corr(2 * max_lag + 1);
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    long t0 = std::max<long>(0, -lag);
    long t1 = std::min<long>(samples, samples - lag);
    double acc = 0.0;
    for (long t = t0; t < t1; ++t)
      acc += static_cast<double>(clip.samples(m, t + lag)) *
             static_cast<double>(clip.samples(n, t));
    corr(lag + max_lag) = acc;
  }

  Eigen::Index best = 0;
  corr.maxCoeff(&best);
  double refined = static_cast<double>(best);
  if (best > 0 && best < corr.size() - 1) {
    double y0 = corr(best - 1), y1 = corr(best), y2 = corr(best + 1);
    double denom = y0 - 2.0 * y1 + y2;
    if (denom < 0.0) refined += 0.5 * (y0 - y2) / denom;
  }
  return (refined - max_lag) / clip.sample_rate;
}

}  // namespace af
