// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <string>

#include "sf/tensor.hpp"

// Tensor blob file: one JSON header line {"shape":[...],"dtype":"f32"}
// terminated by '\n', followed by the raw little-endian payload in C order.
// f32 is the interchange default; f64 is used by --precision f64 checkpoints.

namespace sf::blob {

void save(const std::string& path, const Tensor<float>& t);
void save(const std::string& path, const Tensor<double>& t);

Tensor<float> load_f32(const std::string& path);
Tensor<double> load_f64(const std::string& path);

// Loads any dtype, casting to T.
template <typename T>
Tensor<T> load(const std::string& path);

std::string dtype_of(const std::string& path);

// Writes content to path atomically (tmp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace sf::blob
