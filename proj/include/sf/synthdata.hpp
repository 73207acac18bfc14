// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <string>
#include <vector>

#include "sf/encoder.hpp"
#include "sf/rng.hpp"

namespace sf::synth {

// Deterministic multi-subject corpus: per-subject 1/f background with an
// individual alpha rhythm, plus spike-and-wave complexes injected into the
// positive epochs on a contiguous electrode subset.
struct SynthSpec {
  int n_subjects = 10;
  int epochs_per_subject = 40;
  double seizure_fraction = 0.5;
  double fs = 250.0;
  double epoch_seconds = 4.0;
  double spike_freq_lo = 2.5, spike_freq_hi = 4.0;
  // Spike amplitude over background RMS, in dB, drawn per epoch. The default
  // range is calibrated so the bandpower audit lands in its accepted band.
  double snr_db_lo = 10.0, snr_db_hi = 16.0;
  std::uint64_t seed = 1;

  std::int64_t samples_per_epoch() const {
    return static_cast<std::int64_t>(fs * epoch_seconds);
  }
  void validate() const;
  std::string to_json() const;
  static SynthSpec from_json(const std::string& text);
};

// The standard 19-electrode 10-20 set.
const std::vector<std::string>& electrode_names();

// Label assignment: the first round(epochs_per_subject * seizure_fraction)
// epochs of every subject are positive.
int label_of(const SynthSpec& spec, int epoch_index);

// Pure function of (spec, subject, epoch index).
enc::EegEpoch generate_epoch(const SynthSpec& spec, int subject, int epoch_index);

// Writes s<subject>_e<index>.bin epoch files plus corpus.json.
void generate_corpus(const SynthSpec& spec, const std::string& out_dir);

std::vector<std::string> corpus_files(const std::string& dir);

struct AuditReport {
  double aucroc = 0.0;
  bool accepted = false;
  std::string reason;
};

// Trains a logistic classifier on per-epoch log bandpower features with a
// subject-wise split; the corpus passes only if the held-out AUCROC lies in
// [0.85, 0.999] (hard but learnable).
AuditReport class_separability_audit(const std::string& corpus_dir, std::uint64_t seed = 7);

}  // namespace sf::synth
