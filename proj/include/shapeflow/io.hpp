// Copyright 2026 The shapeflow authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "shapeflow/geometry.hpp"

#include <string>

namespace shapeflow {

/// Writes `{stem}.json` (header: dimension, origin, cell_size, dims,
/// data_file) plus `{stem}.f64` (little-endian f64, row-major).
void write_grid_density(const GridDensity& density, const std::string& stem);
GridDensity read_grid_density(const std::string& json_path);

/// CSV with mandatory header `x1,..,xd,weight`.
void write_discrete_measure(const DiscreteMeasure& measure,
                            const std::string& path);
DiscreteMeasure read_discrete_measure(const std::string& path);

/// %.17g rendering used wherever the formats pin 17 significant digits.
std::string format_g17(double value);

}  // namespace shapeflow
