// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "sf/blob.hpp"
#include "sf/fft.hpp"

namespace sf::synth {

using std::numbers::pi;

void SynthSpec::validate() const {
  if (n_subjects <= 0 || epochs_per_subject <= 0)
    throw std::invalid_argument("SynthSpec: counts must be positive");
  if (seizure_fraction <= 0.0 || seizure_fraction >= 1.0)
    throw std::invalid_argument("SynthSpec: seizure_fraction must lie in (0, 1)");
  if (fs <= 0 || epoch_seconds <= 0)
    throw std::invalid_argument("SynthSpec: fs and epoch_seconds must be positive");
  if (spike_freq_lo < 2.0 || spike_freq_hi > 6.0 || spike_freq_lo > spike_freq_hi)
    throw std::invalid_argument("SynthSpec: spike-wave rate range is implausible");
}

std::string SynthSpec::to_json() const {
  nlohmann::json j;
  j["n_subjects"] = n_subjects;
  j["epochs_per_subject"] = epochs_per_subject;
  j["seizure_fraction"] = seizure_fraction;
  j["fs"] = fs;
  j["epoch_seconds"] = epoch_seconds;
  j["spike_freq"] = {spike_freq_lo, spike_freq_hi};
  j["snr_db"] = {snr_db_lo, snr_db_hi};
  j["seed"] = seed;
  return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SynthSpec s;
  s.n_subjects = j.value("n_subjects", s.n_subjects);
  s.epochs_per_subject = j.value("epochs_per_subject", s.epochs_per_subject);
  s.seizure_fraction = j.value("seizure_fraction", s.seizure_fraction);
  s.fs = j.value("fs", s.fs);
  s.epoch_seconds = j.value("epoch_seconds", s.epoch_seconds);
  if (j.contains("spike_freq")) {
    s.spike_freq_lo = j["spike_freq"][0];
    s.spike_freq_hi = j["spike_freq"][1];
  }
  if (j.contains("snr_db")) {
    s.snr_db_lo = j["snr_db"][0];
    s.snr_db_hi = j["snr_db"][1];
  }
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

const std::vector<std::string>& electrode_names() {
  static const std::vector<std::string> names = {
      "Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
      "F7", "F8", "T3", "T4", "T5", "T6", "Fz", "Cz", "Pz"};
  return names;
}

int label_of(const SynthSpec& spec, int epoch_index) {
  const int n_pos = static_cast<int>(
      std::lround(spec.seizure_fraction * spec.epochs_per_subject));
  return epoch_index < n_pos ? 1 : 0;
}

namespace {

// 1/f^beta noise of unit RMS via spectral shaping.
std::vector<double> pink_noise(std::int64_t n, double beta, Rng& rng) {
  std::vector<double> re(static_cast<std::size_t>(n), 0.0), im(re);
  for (std::int64_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(n);
    const double amp = 1.0 / std::pow(f, beta / 2.0);
    const double a = rng.normal() * amp, b = rng.normal() * amp;
    re[static_cast<std::size_t>(k)] = a;
    im[static_cast<std::size_t>(k)] = b;
    if (k < n - k) {
      re[static_cast<std::size_t>(n - k)] = a;
      im[static_cast<std::size_t>(n - k)] = -b;
    }
  }
  fft::fft1d(re.data(), im.data(), n, true);
  double rms = 0;
  for (double v : re) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  if (rms > 0)
    for (auto& v : re) v /= rms;
  return re;
}

struct SubjectProfile {
  double beta;      // background spectral exponent
  double alpha_hz;  // individual alpha peak
  std::vector<double> alpha_amp;  // per electrode
  double bg_rms;    // microvolts
};

SubjectProfile subject_profile(const SynthSpec& spec, int subject) {
  Rng rng = Rng::derive(spec.seed, {0x5u, static_cast<std::uint64_t>(subject)});
  SubjectProfile p;
  p.beta = rng.uniform(0.8, 1.4);
  p.alpha_hz = rng.uniform(8.0, 12.0);
  p.bg_rms = rng.uniform(8.0, 14.0);
  p.alpha_amp.resize(electrode_names().size());
  for (auto& a : p.alpha_amp) a = rng.uniform(0.15, 0.7);
  return p;
}

}  // namespace

enc::EegEpoch generate_epoch(const SynthSpec& spec, int subject, int epoch_index) {
  spec.validate();
  const auto& names = electrode_names();
  const std::int64_t T = spec.samples_per_epoch();
  const auto E = static_cast<std::int64_t>(names.size());
  const SubjectProfile prof = subject_profile(spec, subject);
  Rng rng = Rng::derive(spec.seed, {0xEu, static_cast<std::uint64_t>(subject),
                                    static_cast<std::uint64_t>(epoch_index)});

  enc::EegEpoch epoch;
  epoch.fs = spec.fs;
  epoch.n_samples = T;
  epoch.subject_id = "s" + std::to_string(subject);
  epoch.label = label_of(spec, epoch_index);
  epoch.channel_names = names;
  epoch.samples.assign(static_cast<std::size_t>(E * T), 0.0);

  // shared volume-conduction term, removed by bipolar derivations
  auto common = pink_noise(T, prof.beta, rng);
  for (std::int64_t e = 0; e < E; ++e) {
    auto noise = pink_noise(T, prof.beta, rng);
    const double alpha_phase = rng.uniform(0.0, 2.0 * pi);
    const double alpha_amp = prof.alpha_amp[static_cast<std::size_t>(e)] *
                             rng.uniform(0.7, 1.3) * prof.bg_rms;
    double* ch = epoch.channel(e);
    for (std::int64_t t = 0; t < T; ++t) {
      const double tt = static_cast<double>(t) / spec.fs;
      const double envelope = 0.75 + 0.25 * std::sin(2.0 * pi * 0.4 * tt);
      ch[t] = prof.bg_rms * (noise[static_cast<std::size_t>(t)] +
                             0.4 * common[static_cast<std::size_t>(t)]) +
              alpha_amp * envelope * std::sin(2.0 * pi * prof.alpha_hz * tt + alpha_phase);
    }
  }

  if (epoch.label == 1) {
    // spike-and-wave complexes on a contiguous electrode subset
    const double rate = rng.uniform(spec.spike_freq_lo, spec.spike_freq_hi);
    const double snr_db = rng.uniform(spec.snr_db_lo, spec.snr_db_hi);
    const double amp = prof.bg_rms * std::pow(10.0, snr_db / 20.0);
    const auto n_elec = 4 + static_cast<std::int64_t>(rng.uniform_int(5));  // 4..8
    const auto first = static_cast<std::int64_t>(rng.uniform_int(
        static_cast<std::uint64_t>(E - n_elec + 1)));
    const auto start = static_cast<std::int64_t>(rng.uniform(0.1, 0.4) * spec.fs);
    const auto dur = static_cast<std::int64_t>(rng.uniform(1.8, 3.0) * spec.fs);
    const std::int64_t stop = std::min(T, start + dur);
    const double period = spec.fs / rate;
    const auto spike_w = static_cast<std::int64_t>(rng.uniform(0.050, 0.080) * spec.fs);

    for (std::int64_t e = first; e < first + n_elec; ++e) {
      const double gain = rng.uniform(0.7, 1.0);
      double* ch = epoch.channel(e);
      for (double base = start; base + period <= stop; base += period) {
        const auto b = static_cast<std::int64_t>(base);
        for (std::int64_t i = 0; i < spike_w && b + i < stop; ++i) {
          const double tri =
              1.0 - std::fabs(static_cast<double>(i) - spike_w / 2.0) / (spike_w / 2.0);
          ch[b + i] += amp * gain * tri;
        }
        const auto wave_len = static_cast<std::int64_t>(period) - spike_w;
        for (std::int64_t i = 0; i < wave_len && b + spike_w + i < stop; ++i)
          ch[b + spike_w + i] -=
              0.6 * amp * gain * std::sin(pi * static_cast<double>(i) / wave_len);
      }
    }
  }
  return epoch;
}

void generate_corpus(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["spec"] = nlohmann::json::parse(spec.to_json());
  auto& files = manifest["files"] = nlohmann::json::array();
  for (int s = 0; s < spec.n_subjects; ++s) {
    for (int e = 0; e < spec.epochs_per_subject; ++e) {
      char name[64];
      std::snprintf(name, sizeof(name), "s%02d_e%03d.bin", s, e);
      enc::save_epoch(out_dir + "/" + name, generate_epoch(spec, s, e));
      files.push_back(name);
    }
  }
  blob::write_file_atomic(out_dir + "/corpus.json", manifest.dump(2));
}

std::vector<std::string> corpus_files(const std::string& dir) {
  std::ifstream f(dir + "/corpus.json");
  if (!f) throw std::runtime_error("corpus manifest missing in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(f);
  std::vector<std::string> out;
  for (const auto& name : manifest.at("files"))
    out.push_back(dir + "/" + name.get<std::string>());
  return out;
}

namespace {

// Log bandpower features per electrode over the classic EEG bands.
std::vector<double> bandpower_features(const enc::EegEpoch& epoch) {
  static const double bands[5][2] = {{0.5, 4}, {4, 8}, {8, 13}, {13, 30}, {30, 70}};
  const std::int64_t T = epoch.n_samples;
  std::vector<double> feats;
  feats.reserve(static_cast<std::size_t>(epoch.n_channels() * 5));
  std::vector<double> re(static_cast<std::size_t>(T)), im(re);
  for (std::int64_t c = 0; c < epoch.n_channels(); ++c) {
    std::copy_n(epoch.channel(c), T, re.begin());
    std::fill(im.begin(), im.end(), 0.0);
    fft::fft1d(re.data(), im.data(), T, false);
    for (const auto& band : bands) {
      const auto k0 = static_cast<std::int64_t>(band[0] / epoch.fs * T);
      const auto k1 = static_cast<std::int64_t>(band[1] / epoch.fs * T);
      double p = 0;
      for (std::int64_t k = std::max<std::int64_t>(k0, 1); k <= std::min(k1, T / 2); ++k)
        p += re[static_cast<std::size_t>(k)] * re[static_cast<std::size_t>(k)] +
             im[static_cast<std::size_t>(k)] * im[static_cast<std::size_t>(k)];
      feats.push_back(std::log(p + 1e-12));
    }
  }
  return feats;
}

double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  // concordant-pair fraction with half credit for ties
  double num = 0, den = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      den += 1.0;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  return den > 0 ? num / den : 0.5;
}

}  // namespace

AuditReport class_separability_audit(const std::string& corpus_dir, std::uint64_t seed) {
  const auto files = corpus_files(corpus_dir);
  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  std::vector<std::string> subjects;
  for (const auto& path : files) {
    auto epoch = enc::load_epoch(path);
    feats.push_back(bandpower_features(epoch));
    labels.push_back(epoch.label);
    subjects.push_back(epoch.subject_id);
  }
  AuditReport rep;
  if (feats.empty()) {
    rep.reason = "empty corpus";
    return rep;
  }
  const std::size_t dim = feats[0].size();

  // standardize
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (const auto& f : feats)
    for (std::size_t d = 0; d < dim; ++d) mu[d] += f[d];
  for (auto& m : mu) m /= static_cast<double>(feats.size());
  for (const auto& f : feats)
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (f[d] - mu[d]) * (f[d] - mu[d]);
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(feats.size())) + 1e-9;

  // subject-wise split: alternating subjects go to train/test
  std::vector<std::string> uniq;
  for (const auto& s : subjects)
    if (std::find(uniq.begin(), uniq.end(), s) == uniq.end()) uniq.push_back(s);
  auto in_train = [&](const std::string& s) {
    const auto pos = std::find(uniq.begin(), uniq.end(), s) - uniq.begin();
    return pos % 2 == 0;
  };

  std::vector<double> w(dim, 0.0);
  double bias = 0.0;
  Rng rng(seed);
  (void)rng;
  const double lr = 0.2, l2 = 1e-3;
  for (int it = 0; it < 400; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    double count = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (!in_train(subjects[i])) continue;
      double z = bias;
      for (std::size_t d = 0; d < dim; ++d)
        z += w[d] * (feats[i][d] - mu[d]) / sd[d];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - labels[i];
      for (std::size_t d = 0; d < dim; ++d)
        gw[d] += err * (feats[i][d] - mu[d]) / sd[d];
      gb += err;
      count += 1.0;
    }
    for (std::size_t d = 0; d < dim; ++d)
      w[d] -= lr * (gw[d] / count + l2 * w[d]);
    bias -= lr * gb / count;
  }

  std::vector<double> scores;
  std::vector<int> test_labels;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (in_train(subjects[i])) continue;
    double z = bias;
    for (std::size_t d = 0; d < dim; ++d)
      z += w[d] * (feats[i][d] - mu[d]) / sd[d];
    scores.push_back(z);
    test_labels.push_back(labels[i]);
  }
  rep.aucroc = auc_from_scores(scores, test_labels);
  if (rep.aucroc > 0.999) {
    rep.reason = "too easy: audit AUCROC above 0.999";
  } else if (rep.aucroc < 0.85) {
    rep.reason = "too hard: audit AUCROC below 0.85";
  } else {
    rep.accepted = true;
    rep.reason = "ok";
  }
  return rep;
}

}  // namespace sf::synth
