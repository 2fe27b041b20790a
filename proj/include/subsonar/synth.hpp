#pragma once

// Transmit waveform, element-level time-series synthesis, and pulse
// compression.
//
// A ping is assembled as a sum of delayed, complex-scaled copies of the
// analytic transmit pulse. Each copy is deposited into an impulse buffer with
// a windowed-sinc fractional delay and the buffer is convolved with the pulse
// in the frequency domain; the real part is the received pressure (uPa).

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "subsonar/core.hpp"
#include "subsonar/fft.hpp"
#include "subsonar/propagation.hpp"
#include "subsonar/scatterfield.hpp"
#include "subsonar/scene.hpp"
#include "subsonar/targetmodel.hpp"

namespace subsonar {

// ---------------------------------------------------------------------------
// Waveform
// ---------------------------------------------------------------------------

struct Waveform {
  WaveformConfig config;
  double amplitude = 1.0;          // peak pressure at 1 m, uPa
  std::vector<cplx> analytic;      // unit-peak complex LFM, envelope * exp(i phase)

  [[nodiscard]] std::size_t size() const { return analytic.size(); }
  [[nodiscard]] double time_bandwidth() const { return config.duration * config.bandwidth(); }

  // Real transmitted samples scaled to the source level.
  [[nodiscard]] std::vector<double> samples() const {
    std::vector<double> out(analytic.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) out[i] = amplitude * analytic[i].real();
    return out;
  }
  // Unit-peak real replica used for pulse compression.
  [[nodiscard]] std::vector<double> replica() const {
    std::vector<double> out(analytic.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) out[i] = analytic[i].real();
    return out;
  }
  [[nodiscard]] double replica_energy() const {
    double e = 0.0;
    for (double v : replica()) e += v * v;
    return e;
  }
};

// Tukey envelope; `fraction` of the pulse is spent in the two cosine ramps.
inline double tukey(double t_over_T, double fraction) {
  if (fraction <= 0.0) return 1.0;
  const double half = 0.5 * fraction;
  if (t_over_T < half) return 0.5 * (1.0 - std::cos(pi * t_over_T / half));
  if (t_over_T > 1.0 - half) return 0.5 * (1.0 - std::cos(pi * (1.0 - t_over_T) / half));
  return 1.0;
}

inline Waveform make_waveform(const WaveformConfig& c) {
  if (!(c.sample_rate > 2.0 * std::max(c.f_start, c.f_stop)))
    throw ValidationError("waveform.sample_rate", "Nyquist violation: sample_rate must exceed 2 * f_stop");
  if (!(c.duration > 0.0)) throw ValidationError("waveform.duration", "must be > 0");
  Waveform w;
  w.config = c;
  w.amplitude = db_to_amplitude(c.source_level);
  const auto n = static_cast<std::size_t>(std::llround(c.duration * c.sample_rate));
  const double rate = (c.f_stop - c.f_start) / c.duration;
  w.analytic.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / c.sample_rate;
    const double phase = two_pi * (c.f_start * t + 0.5 * rate * t * t);
    w.analytic[i] = tukey(t / c.duration, c.taper) * std::polar(1.0, phase);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

enum class SampleKind : std::uint32_t { real = 0, complex = 1 };

struct PingRecord {
  std::uint64_t ping_index = 0;
  std::uint64_t location_index = 0;
  int tx_id = 0;
  Pose pose;
  double sample_rate = 0.0;
  double start_time = 0.0;
  std::size_t rx_count = 0;
  std::size_t sample_count = 0;
  SampleKind kind = SampleKind::real;
  std::uint64_t seed = 0;
  std::vector<float> data;  // receiver-major; complex samples interleaved (re, im)

  [[nodiscard]] std::size_t values_per_sample() const { return kind == SampleKind::complex ? 2 : 1; }
  [[nodiscard]] double time_of(std::size_t n) const { return start_time + static_cast<double>(n) / sample_rate; }

  [[nodiscard]] float real_at(std::size_t rx, std::size_t n) const {
    return data[(rx * sample_count + n) * values_per_sample()];
  }
  [[nodiscard]] std::complex<float> complex_at(std::size_t rx, std::size_t n) const {
    const std::size_t i = (rx * sample_count + n) * 2;
    return {data[i], data[i + 1]};
  }
  void allocate() { data.assign(rx_count * sample_count * values_per_sample(), 0.0f); }

  bool operator==(const PingRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Timing: delay span of the image volume, contribution gate, record window
// ---------------------------------------------------------------------------

struct DelayWindow {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] bool contains(double t) const { return t >= lo && t <= hi; }
};

inline double one_way_time(const Vec3& element, const Vec3& point, const Scenario& s) {
  return propagation_path(element, point, s.water.sound_speed, s.sediment.sound_speed).travel_time;
}

namespace detail {
inline double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Travel time grows with horizontal offset and with vertical separation, so
// the extremes over a box are at the clamped point and at a corner.
inline std::pair<double, double> box_time_range(const Vec3& e, const ImageConfig& im, const Scenario& s) {
  const Vec3 near{clampd(e.x, im.x_min, im.x_max), clampd(e.y, im.y_min, im.y_max), clampd(e.z, im.z_min, im.z_max)};
  double tmax = 0.0;
  for (double x : {im.x_min, im.x_max})
    for (double y : {im.y_min, im.y_max})
      for (double z : {im.z_min, im.z_max}) tmax = std::max(tmax, one_way_time(e, {x, y, z}, s));
  return {one_way_time(e, near, s), tmax};
}
}  // namespace detail

// Two-way delay span of the image volume over every transmit/receive pair of
// the survey (bounds, not attained values).
inline DelayWindow image_delay_span(const Scenario& s, const ImageConfig& im) {
  const auto array = s.array_geometry();
  DelayWindow w{std::numeric_limits<double>::max(), 0.0};
  for (const auto& ev : ping_poses(s)) {
    const auto& tx = array.projectors.at(static_cast<std::size_t>(ev.tx_id));
    const auto [tx_lo, tx_hi] = detail::box_time_range(element_position(ev.pose, tx.offset), im, s);
    for (const auto& rx : array.receivers) {
      const auto [rx_lo, rx_hi] = detail::box_time_range(element_position(ev.pose, rx.offset), im, s);
      w.lo = std::min(w.lo, tx_lo + rx_lo);
      w.hi = std::max(w.hi, tx_hi + rx_hi);
    }
  }
  return w;
}

struct SynthesisTiming {
  DelayWindow image;   // delays that map into the image volume
  DelayWindow gate;    // delays of contributions that are synthesised
  DelayWindow record;  // recorded interval (sample aligned start)
  std::size_t samples = 0;
};

inline SynthesisTiming synthesis_timing(const Scenario& s) {
  SynthesisTiming t;
  t.image = image_delay_span(s, s.image);
  const double T = s.waveform.duration;
  const double guard = s.synthesis.gate_guard.value_or(T);
  const double fs = s.waveform.sample_rate;
  const double nadir = 2.0 * s.geometry.sensor_altitude / s.water.sound_speed;
  const double start = std::max(0.0, std::min(nadir, t.image.lo) - T);
  t.record.lo = std::floor(start * fs) / fs;
  t.record.hi = t.image.hi + T;
  t.samples = static_cast<std::size_t>(std::ceil((t.record.hi - t.record.lo) * fs)) + 1;
  t.gate.lo = std::max(t.record.lo, t.image.lo - guard);
  t.gate.hi = std::min(t.record.hi, t.image.hi + guard);
  return t;
}

// Scatterer generation extent: every point whose earliest possible two-way
// delay (any pair, any ping) precedes the end of the gate.
inline Bounds survey_field_extent(const Scenario& s, const SynthesisTiming& timing) {
  const double cw = s.water.sound_speed, cs = s.sediment.sound_speed;
  const double h = s.geometry.sensor_altitude;
  const double half = 0.5 * timing.gate.hi;
  const double r_interface = std::sqrt(std::max(0.0, (cw * half) * (cw * half) - h * h));
  const double r_volume = std::max(0.0, half - h / cw) * std::max(cw, cs);
  const double reach = s.array_geometry().horizontal_radius() + std::max(r_interface, r_volume);
  const double x_last = static_cast<double>(s.track.ping_count - 1) * s.track.along_track_advance;
  Bounds b;
  b.lo = {-reach, -reach, 0.0};
  b.hi = {x_last + reach, reach, s.scatterers.volume_depth};
  return b;
}

// ---------------------------------------------------------------------------
// Contribution assembly
// ---------------------------------------------------------------------------

// Which components enter a synthesised ping.
struct SynthesisParts {
  bool scatterers = true;
  bool targets = true;
  bool coherent = true;  // also requires propagation.coherent_reflection
  bool noise = true;     // also requires noise.enabled
};

struct Contribution {
  double delay = 0.0;
  std::vector<cplx> amplitude;  // one per subband
};

inline std::vector<double> subband_centres(const WaveformConfig& w, int subbands) {
  std::vector<double> f(static_cast<std::size_t>(subbands));
  const double lo = std::min(w.f_start, w.f_stop), bw = w.bandwidth();
  for (int k = 0; k < subbands; ++k) f[static_cast<std::size_t>(k)] = lo + (k + 0.5) * bw / subbands;
  return f;
}

namespace detail {

struct ElementImages {
  std::vector<ImageSource> all;
  std::vector<ImageSource> seabed;  // those that can end at or below the seabed
};

inline ElementImages images_for(const Vec3& pos, const Scenario& s, int order) {
  ElementImages e;
  e.all = enumerate_image_sources(pos, s.geometry, order, s.propagation.surface_reflection);
  for (const auto& im : e.all)
    if (im.reaches_seabed()) e.seabed.push_back(im);
  return e;
}

struct LegSet {
  std::vector<std::vector<Leg>> per_band;  // [image][band] flattened as per image
};

// Legs from every usable image of one element to a point, per subband.
inline void legs_to_point(const ElementImages& images, const ElementShape& shape, const Vec3& point,
                          const Scenario& s, const std::vector<double>& freqs, Crossing crossing,
                          std::vector<std::vector<Leg>>& out) {
  const auto& use = point.z >= 0.0 ? images.seabed : images.all;
  out.resize(use.size());
  for (std::size_t i = 0; i < use.size(); ++i) {
    out[i].resize(freqs.size());
    for (std::size_t b = 0; b < freqs.size(); ++b) out[i][b] = compute_leg(use[i], shape, point, s, freqs[b], crossing);
  }
}

}  // namespace detail

class PingSynthesizer {
 public:
  PingSynthesizer(const Scenario& s, const ScattererField& field, SynthesisParts parts = {})
      : s_(s),
        field_(field),
        parts_(parts),
        array_(s.array_geometry()),
        waveform_(make_waveform(s.waveform)),
        timing_(synthesis_timing(s)),
        freqs_(subband_centres(s.waveform, s.synthesis.subbands)) {
    prepare_replica();
  }

  [[nodiscard]] const SynthesisTiming& timing() const { return timing_; }
  [[nodiscard]] const Waveform& waveform() const { return waveform_; }
  [[nodiscard]] const ArrayGeometry& array() const { return array_; }

  // Per-receiver contribution lists for one transmit event.
  [[nodiscard]] std::vector<std::vector<Contribution>> contributions(const TransmitEvent& ev) const {
    const std::size_t nrx = array_.receivers.size();
    std::vector<std::vector<Contribution>> out(nrx);
    const auto& tx = array_.projectors.at(static_cast<std::size_t>(ev.tx_id));
    const Vec3 tx_pos = element_position(ev.pose, tx.offset);
    const ElementShape tx_shape = ElementShape::of(tx);
    const int order = s_.propagation.multipath_order;
    const auto tx_images = detail::images_for(tx_pos, s_, order);
    std::vector<detail::ElementImages> rx_images;
    std::vector<Vec3> rx_pos;
    for (const auto& rx : array_.receivers) {
      rx_pos.push_back(element_position(ev.pose, rx.offset));
      rx_images.push_back(detail::images_for(rx_pos.back(), s_, order));
    }
    const double cmax = std::max(s_.water.sound_speed, s_.sediment.sound_speed);
    const double reach = array_.horizontal_radius();
    const std::size_t nb = freqs_.size();

    std::vector<std::vector<Leg>> tx_legs;
    std::vector<std::vector<Leg>> rx_legs;

    auto emit = [&](std::size_t r, const std::vector<Leg>& tl, const std::vector<Leg>& rl, auto&& scatter) {
      const double delay = tl[0].time + rl[0].time;
      if (!timing_.gate.contains(delay)) return;
      if (!tl[0].reachable || !rl[0].reachable) return;
      Contribution c;
      c.delay = delay;
      c.amplitude.resize(nb);
      for (std::size_t b = 0; b < nb; ++b) c.amplitude[b] = scatter(b, tl[b], rl[b]);
      out[r].push_back(std::move(c));
    };

    if (parts_.scatterers) {
      for (const auto& sc : field_.scatterers) {
        // Straight-line lower bound on the direct delay.
        const double rho = std::max(0.0, (sc.position - ev.pose.position).horizontal_norm() - reach);
        const double dz = sc.position.z - ev.pose.position.z;
        if (2.0 * std::sqrt(rho * rho + dz * dz) / cmax > timing_.gate.hi) continue;
        detail::legs_to_point(tx_images, tx_shape, sc.position, s_, freqs_, Crossing::water_to_sediment, tx_legs);
        for (std::size_t r = 0; r < array_.receivers.size(); ++r) {
          detail::legs_to_point(rx_images[r], ElementShape::of(array_.receivers[r]), sc.position, s_, freqs_,
                                Crossing::sediment_to_water, rx_legs);
          for (const auto& tl : tx_legs)
            for (const auto& rl : rx_legs)
              emit(r, tl, rl, [&](std::size_t b, const Leg& a, const Leg& c) {
                return combine_legs(sc, a, c, s_, freqs_[b]).amplitude;
              });
        }
      }
    }

    if (parts_.targets) {
      for (std::size_t ti = 0; ti < s_.targets.size(); ++ti) {
        const auto& t = s_.targets[ti];
        const double c_medium = t.position.z >= 0.0 ? s_.sediment.sound_speed : s_.water.sound_speed;
        for (std::size_t r = 0; r < array_.receivers.size(); ++r) {
          const auto& tx_use = t.position.z >= 0.0 ? tx_images.seabed : tx_images.all;
          const auto& rx_use = t.position.z >= 0.0 ? rx_images[r].seabed : rx_images[r].all;
          for (const auto& ti_im : tx_use)
            for (const auto& ri_im : rx_use) {
              // Directions at the centre fix the specular point; legs are then
              // traced to the echo centre.
              const Leg probe_t = compute_leg(ti_im, tx_shape, t.position, s_, freqs_[0], Crossing::water_to_sediment);
              const Leg probe_r = compute_leg(ri_im, ElementShape::of(array_.receivers[r]), t.position, s_, freqs_[0],
                                              Crossing::sediment_to_water);
              std::vector<Leg> tl(nb), rl(nb);
              std::vector<double> echo_amp(nb);
              Vec3 centre = t.position;
              for (std::size_t b = 0; b < nb; ++b) {
                const auto echo = target_echoes(t, -probe_t.arrival, -probe_r.arrival, freqs_[b], c_medium).front();
                centre = echo.centre;
                echo_amp[b] = echo.amplitude();
              }
              for (std::size_t b = 0; b < nb; ++b) {
                tl[b] = compute_leg(ti_im, tx_shape, centre, s_, freqs_[b], Crossing::water_to_sediment);
                rl[b] = compute_leg(ri_im, ElementShape::of(array_.receivers[r]), centre, s_, freqs_[b],
                                    Crossing::sediment_to_water);
              }
              const double delay = tl[0].time + rl[0].time;
              if (ti_im.order == 0 && ri_im.order == 0 && !timing_.record.contains(delay))
                throw NumericalError("record length: echo of target " + std::to_string(ti) + " at " +
                                     std::to_string(delay) + " s falls outside the record window");
              emit(r, tl, rl, [&](std::size_t b, const Leg& a, const Leg& c) {
                return db_to_amplitude(s_.waveform.source_level) * a.directivity * c.directivity * echo_amp[b] /
                       (a.length * c.length) * db_to_amplitude(-(a.absorption_db + c.absorption_db)) *
                       a.transmission * c.transmission * a.boundary * c.boundary;
              });
            }
        }
      }
    }

    if (parts_.coherent && s_.propagation.coherent_reflection) add_coherent(tx_pos, tx_shape, rx_pos, out);
    return out;
  }

  // Deterministic noise seed for one receiver series.
  [[nodiscard]] std::uint64_t noise_seed(const TransmitEvent& ev, std::size_t rx) const {
    return derive_seed(s_.rng_seed, kStreamPingNoise, (static_cast<std::uint64_t>(ev.event_index) << 16) + rx);
  }

  [[nodiscard]] PingRecord synthesize(const TransmitEvent& ev, std::size_t workers = 1) const {
    const auto contribs = contributions(ev);
    PingRecord rec;
    rec.ping_index = ev.event_index;
    rec.location_index = ev.location_index;
    rec.tx_id = ev.tx_id;
    rec.pose = ev.pose;
    rec.sample_rate = s_.waveform.sample_rate;
    rec.start_time = timing_.record.lo;
    rec.rx_count = array_.receivers.size();
    rec.sample_count = timing_.samples;
    rec.kind = SampleKind::real;
    rec.seed = derive_seed(s_.rng_seed, kStreamPingNoise, ev.event_index);
    rec.allocate();
    const bool noise = parts_.noise && s_.noise.enabled;
    const double noise_sigma =
        noise ? std::sqrt(db_to_power(ambient_noise_psd(s_.waveform.centre_frequency(), s_.noise.sea_state)) *
                          0.5 * s_.waveform.sample_rate)
              : 0.0;
    parallel_for(rec.rx_count, workers, [&](std::size_t r) {
      const auto series = render(contribs[r]);
      std::mt19937_64 rng(noise_seed(ev, r));
      std::normal_distribution<double> gauss(0.0, 1.0);
      float* dst = rec.data.data() + r * rec.sample_count;
      for (std::size_t n = 0; n < rec.sample_count; ++n) {
        double v = series[n];
        if (noise) v += noise_sigma * gauss(rng);
        dst[n] = static_cast<float>(v);
      }
    });
    return rec;
  }

  // Real pressure series for a list of contributions.
  [[nodiscard]] std::vector<double> render(const std::vector<Contribution>& list) const {
    const std::size_t nfft = nfft_;
    const std::size_t nb = freqs_.size();
    std::vector<AlignedBuffer> bands;
    bands.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      bands.emplace_back(nfft);
      std::fill(bands.back().data(), bands.back().data() + nfft, cplx{});
    }
    const double fs = s_.waveform.sample_rate;
    for (const auto& c : list) {
      const double pos = (c.delay - timing_.record.lo) * fs + static_cast<double>(kPad);
      auto i0 = static_cast<long long>(std::floor(pos));
      double frac = pos - static_cast<double>(i0);
      auto phase = static_cast<std::size_t>(std::llround(frac * kPhases));
      if (phase == kPhases) {
        phase = 0;
        ++i0;
      }
      const double* w = &kernel()[phase * kTaps];
      for (std::size_t j = 0; j < kTaps; ++j) {
        const long long idx = i0 + static_cast<long long>(j) - (kHalfTaps - 1);
        if (idx < 0 || idx >= static_cast<long long>(nfft)) continue;
        for (std::size_t b = 0; b < nb; ++b) bands[b][static_cast<std::size_t>(idx)] += w[j] * c.amplitude[b];
      }
    }
    AlignedBuffer total(nfft);
    std::fill(total.data(), total.data() + nfft, cplx{});
    for (std::size_t b = 0; b < nb; ++b) {
      fft_forward(bands[b]);
      for (std::size_t k = 0; k < nfft; ++k) total[k] += bands[b][k] * replica_bands_[b][k];
    }
    fft_inverse(total);
    std::vector<double> out(timing_.samples);
    const double scale = 1.0 / static_cast<double>(nfft);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = total[n + kPad].real() * scale;
    return out;
  }

 private:
  static constexpr std::size_t kHalfTaps = 8;
  static constexpr std::size_t kTaps = 2 * kHalfTaps;
  static constexpr std::size_t kPhases = 2048;
  static constexpr std::size_t kPad = kHalfTaps;

  // Kaiser-windowed sinc fractional-delay table: row p holds the taps for a
  // delay of p / kPhases samples; tap j sits at offset j - (kHalfTaps - 1).
  static const std::vector<double>& kernel() {
    static const std::vector<double> table = [] {
      std::vector<double> t((kPhases + 1) * kTaps);
      const double beta = 8.0;
      const double norm = std::cyl_bessel_i(0.0, beta);
      for (std::size_t p = 0; p <= kPhases; ++p) {
        const double frac = static_cast<double>(p) / kPhases;
        for (std::size_t j = 0; j < kTaps; ++j) {
          const double x = static_cast<double>(j) - static_cast<double>(kHalfTaps - 1) - frac;
          const double r = x / static_cast<double>(kHalfTaps);
          const double win = std::abs(r) < 1.0 ? std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / norm : 0.0;
          t[p * kTaps + j] = sinc(pi * x) * win;
        }
      }
      return t;
    }();
    return table;
  }

  void prepare_replica() {
    nfft_ = fft_good_size(timing_.samples + waveform_.size() + 2 * kTaps + kPad);
    AlignedBuffer rep(nfft_);
    std::fill(rep.data(), rep.data() + nfft_, cplx{});
    for (std::size_t i = 0; i < waveform_.size(); ++i) rep[i] = waveform_.analytic[i];
    fft_forward(rep);
    const std::size_t nb = freqs_.size();
    replica_bands_.assign(nb, std::vector<cplx>(nfft_, cplx{}));
    const double fs = s_.waveform.sample_rate;
    const double lo = std::min(s_.waveform.f_start, s_.waveform.f_stop);
    const double bw = s_.waveform.bandwidth();
    for (std::size_t k = 0; k < nfft_; ++k) {
      const double f = (k <= nfft_ / 2 ? static_cast<double>(k) : static_cast<double>(k) - nfft_) * fs / nfft_;
      std::size_t band = 0;
      if (nb > 1 && bw > 0.0) {
        const double u = std::clamp((f - lo) / bw, 0.0, 1.0 - 1e-12);
        band = static_cast<std::size_t>(u * static_cast<double>(nb));
      }
      replica_bands_[band][k] = rep[k];
    }
  }

  void add_coherent(const Vec3& tx_pos, const ElementShape& tx_shape, const std::vector<Vec3>& rx_pos,
                    std::vector<std::vector<Contribution>>& out) const {
    const int max_order = 2 * s_.propagation.multipath_order + 1;
    const auto images = enumerate_image_sources(tx_pos, s_.geometry, max_order, s_.propagation.surface_reflection);
    const double cw = s_.water.sound_speed;
    const double src = db_to_amplitude(s_.waveform.source_level);
    const std::size_t nb = freqs_.size();
    for (std::size_t r = 0; r < rx_pos.size(); ++r) {
      const ElementShape rx_shape = ElementShape::of(array_.receivers[r]);
      for (const auto& im : images) {
        if (im.bottom_bounces == 0) continue;
        const Vec3 d = rx_pos[r] - im.position;
        const double L = d.norm();
        const double delay = L / cw;
        if (!timing_.gate.contains(delay)) continue;
        const Vec3 dir = d / L;
        const double incidence = std::atan2(d.horizontal_norm(), std::abs(d.z));
        Contribution c;
        c.delay = delay;
        c.amplitude.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
          const double f = freqs_[b];
          const cplx flat = flat_reflection_coeff(s_.water, s_.sediment, incidence);
          const cplx bottom = eckart_coherent_coeff(flat, f, s_.geometry.interface_rms_roughness, incidence, cw);
          c.amplitude[b] = src * tx_shape.response(f, cw, dir) * rx_shape.response(f, cw, dir) *
                           im.boundary_factor(bottom) * db_to_amplitude(-s_.water.absorption * L) / L;
        }
        out[r].push_back(std::move(c));
      }
      if (s_.geometry.buried_layer) add_layer_reflection(tx_pos, tx_shape, rx_pos[r], rx_shape, out[r]);
    }
  }

  // Specular return from a flat buried boundary (direct paths only). Elements
  // share a height, so the reflection point is the horizontal midpoint.
  void add_layer_reflection(const Vec3& tx_pos, const ElementShape& tx_shape, const Vec3& rx_pos,
                            const ElementShape& rx_shape, std::vector<Contribution>& out) const {
    const auto& layer = *s_.geometry.buried_layer;
    const Vec3 mid{0.5 * (tx_pos.x + rx_pos.x), 0.5 * (tx_pos.y + rx_pos.y), layer.depth_below_interface};
    const double cw = s_.water.sound_speed, cs = s_.sediment.sound_speed;
    const RayPath a = refracted_path(tx_pos, mid, cw, cs);
    const RayPath b = refracted_path(rx_pos, mid, cw, cs);
    const double delay = a.travel_time + b.travel_time;
    if (!timing_.gate.contains(delay)) return;
    const double src = db_to_amplitude(s_.waveform.source_level);
    Contribution c;
    c.delay = delay;
    for (double f : freqs_) {
      const Vec3 da = (*a.crossing - tx_pos).normalized();
      const Vec3 db = (*b.crossing - rx_pos).normalized();
      const cplx t_down = transmission_coeff(s_.water, s_.sediment, a.incidence, Crossing::water_to_sediment);
      const cplx t_up = transmission_coeff(s_.water, s_.sediment, b.incidence, Crossing::sediment_to_water);
      const cplx refl = layer_reflection_coeff(s_.sediment, layer.lower_medium, a.refraction);
      const double loss = absorption_db(a, f, s_.water, s_.sediment) + absorption_db(b, f, s_.water, s_.sediment);
      c.amplitude.push_back(src * tx_shape.response(f, cw, da) * rx_shape.response(f, cw, db) * t_down * refl *
                            t_up * db_to_amplitude(-loss) / (a.length() + b.length()));
    }
    out.push_back(std::move(c));
  }

  const Scenario& s_;
  const ScattererField& field_;
  SynthesisParts parts_;
  ArrayGeometry array_;
  Waveform waveform_;
  SynthesisTiming timing_;
  std::vector<double> freqs_;
  std::size_t nfft_ = 0;
  std::vector<std::vector<cplx>> replica_bands_;
};

inline PingRecord synthesize_ping(const Scenario& s, const ScattererField& field, const TransmitEvent& ev,
                                  SynthesisParts parts = {}, std::size_t workers = 1) {
  return PingSynthesizer(s, field, parts).synthesize(ev, workers);
}

// ---------------------------------------------------------------------------
// Matched filter
// ---------------------------------------------------------------------------

// Correlates every receiver series with the unit-peak transmit replica
// Re(envelope * exp(i phase)) and returns the analytic output. Output sample n
// is the correlation lag that places the pulse start at time_of(n); a lone
// echo of amplitude A peaks near A * replica_energy().
inline PingRecord matched_filter(const PingRecord& rec, const Waveform& w) {
  if (rec.kind != SampleKind::real) throw NumericalError("matched_filter: input must be a raw (real) record");
  if (std::abs(rec.sample_rate - w.config.sample_rate) > 1e-9 * w.config.sample_rate)
    throw NumericalError("matched_filter: sample rate mismatch between record and waveform");
  const std::size_t n = rec.sample_count;
  const std::size_t nfft = fft_good_size(n + w.size());
  const auto replica = w.replica();
  AlignedBuffer rep(nfft);
  std::fill(rep.data(), rep.data() + nfft, cplx{});
  for (std::size_t i = 0; i < replica.size(); ++i) rep[i] = replica[i];
  fft_forward(rep);

  PingRecord out = rec;
  out.kind = SampleKind::complex;
  out.allocate();
  AlignedBuffer buf(nfft);
  for (std::size_t r = 0; r < rec.rx_count; ++r) {
    std::fill(buf.data(), buf.data() + nfft, cplx{});
    for (std::size_t i = 0; i < n; ++i) buf[i] = rec.real_at(r, i);
    fft_forward(buf);
    // Correlation, then one-sided spectrum for the analytic signal.
    for (std::size_t k = 0; k < nfft; ++k) {
      double gain = 0.0;
      if (k == 0 || (nfft % 2 == 0 && k == nfft / 2)) gain = 1.0;
      else if (k < (nfft + 1) / 2) gain = 2.0;
      buf[k] = buf[k] * std::conj(rep[k]) * gain;
    }
    fft_inverse(buf);
    const double scale = 1.0 / static_cast<double>(nfft);
    float* dst = out.data.data() + r * n * 2;
    for (std::size_t i = 0; i < n; ++i) {
      dst[2 * i] = static_cast<float>(buf[i].real() * scale);
      dst[2 * i + 1] = static_cast<float>(buf[i].imag() * scale);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Survey
// ---------------------------------------------------------------------------

struct Survey {
  ScattererField field;
  SynthesisTiming timing;
  std::vector<TransmitEvent> events;
};

inline Survey prepare_survey(const Scenario& s, std::size_t workers = 1) {
  Survey v;
  v.timing = synthesis_timing(s);
  v.events = ping_poses(s);
  const bool any = s.scatterers.interface_density > 0.0 || s.scatterers.volume_density > 0.0;
  v.field = any ? generate_field(s, survey_field_extent(s, v.timing), s.rng_seed, workers) : ScattererField{};
  return v;
}

// Emits records in event order. Events are synthesised in parallel batches;
// each record depends only on its event, so output is independent of
// `workers`.
inline void simulate_survey(const Scenario& s, const std::function<void(PingRecord&&)>& sink, std::size_t workers = 1,
                            SynthesisParts parts = {}) {
  if (workers == 0) workers = default_workers();
  const Survey v = prepare_survey(s, workers);
  const PingSynthesizer synth(s, v.field, parts);
  const std::size_t batch = std::max<std::size_t>(workers, 1);
  for (std::size_t first = 0; first < v.events.size(); first += batch) {
    const std::size_t count = std::min(batch, v.events.size() - first);
    std::vector<PingRecord> recs(count);
    parallel_for(count, workers, [&](std::size_t i) { recs[i] = synth.synthesize(v.events[first + i]); });
    for (auto& r : recs) sink(std::move(r));
  }
}

}  // namespace subsonar
