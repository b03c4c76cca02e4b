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

#include "shapeflow/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace shapeflow {

using json = nlohmann::ordered_json;

std::string format_g17(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_grid_density(const GridDensity& density, const std::string& stem) {
    const std::string data_name =
        std::filesystem::path(stem).filename().string() + ".f64";
    json header;
    header["dimension"] = density.dim();
    header["origin"] = std::vector<double>(
        density.origin.data(), density.origin.data() + density.origin.size());
    header["cell_size"] = density.cell_size;
    header["dims"] = std::vector<int>(density.dims.data(),
                                      density.dims.data() + density.dims.size());
    header["data_file"] = data_name;

    std::ofstream hf(stem + ".json");
    if (!hf) fail(ErrorCode::InvalidInput, "cannot write " + stem + ".json");
    hf << header.dump(2) << "\n";

    std::ofstream df(stem + ".f64", std::ios::binary);
    if (!df) fail(ErrorCode::InvalidInput, "cannot write " + stem + ".f64");
    static_assert(sizeof(double) == 8);
    df.write(reinterpret_cast<const char*>(density.values.data()),
             static_cast<std::streamsize>(density.values.size() * 8));
}

GridDensity read_grid_density(const std::string& json_path) {
    std::ifstream hf(json_path);
    if (!hf) fail(ErrorCode::InvalidInput, "cannot read " + json_path);
    json header;
    try {
        hf >> header;
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, json_path + ": " + e.what());
    }

    const int d = header.at("dimension").get<int>();
    if (d < 1 || d > 3)
        fail(ErrorCode::InvalidInput, json_path + ": dimension must be 1..3");
    Vec origin(d);
    const auto jorigin = header.at("origin");
    if (static_cast<int>(jorigin.size()) != d)
        fail(ErrorCode::InvalidInput, json_path + ": origin size mismatch");
    for (int k = 0; k < d; ++k) origin[k] = jorigin[k].get<double>();
    IVec dims(d);
    const auto jdims = header.at("dims");
    if (static_cast<int>(jdims.size()) != d)
        fail(ErrorCode::InvalidInput, json_path + ": dims size mismatch");
    for (int k = 0; k < d; ++k) dims[k] = jdims[k].get<int>();

    GridDensity density(origin, header.at("cell_size").get<double>(), dims);

    const auto data_path = std::filesystem::path(json_path).parent_path() /
                           header.at("data_file").get<std::string>();
    std::ifstream df(data_path, std::ios::binary);
    if (!df)
        fail(ErrorCode::InvalidInput, "cannot read " + data_path.string());
    df.read(reinterpret_cast<char*>(density.values.data()),
            static_cast<std::streamsize>(density.values.size() * 8));
    if (static_cast<std::size_t>(df.gcount()) != density.values.size() * 8)
        fail(ErrorCode::InvalidInput,
             data_path.string() + ": truncated data file");
    return density;
}

void write_discrete_measure(const DiscreteMeasure& measure,
                            const std::string& path) {
    std::ofstream f(path);
    if (!f) fail(ErrorCode::InvalidInput, "cannot write " + path);
    for (int k = 0; k < measure.dim(); ++k) f << "x" << (k + 1) << ",";
    f << "weight\n";
    for (int i = 0; i < measure.size(); ++i) {
        for (int k = 0; k < measure.dim(); ++k)
            f << format_g17(measure.points(i, k)) << ",";
        f << format_g17(measure.weights[i]) << "\n";
    }
}

DiscreteMeasure read_discrete_measure(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::InvalidInput, "cannot read " + path);
    std::string line;
    if (!std::getline(f, line))
        fail(ErrorCode::InvalidInput, path + ": empty file");

    // Header row is mandatory: x1,..,xd,weight.
    int d = 0;
    {
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() < 2 || cols.back() != "weight")
            fail(ErrorCode::InvalidInput,
                 path + ": expected header x1,..,xd,weight");
        d = static_cast<int>(cols.size()) - 1;
    }

    std::vector<double> flat;
    int rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        int got = 0;
        while (std::getline(ss, tok, ',')) {
            flat.push_back(std::stod(tok));
            ++got;
        }
        if (got != d + 1)
            fail(ErrorCode::InvalidInput, path + ": ragged row");
        ++rows;
    }
    DiscreteMeasure out;
    out.points.resize(rows, d);
    out.weights.resize(rows);
    for (int i = 0; i < rows; ++i) {
        for (int k = 0; k < d; ++k) out.points(i, k) = flat[i * (d + 1) + k];
        out.weights[i] = flat[i * (d + 1) + d];
    }
    out.validate();
    return out;
}

}  // namespace shapeflow
