// src/adapter.cc

// Copyright 2026  The plcadapt Authors
//
// See ../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "plcadapt/adapter.h"

#include <cmath>

#include "plcadapt/checkpoint.h"
#include "plcadapt/errors.h"
#include "plcadapt/rng.h"

namespace plcadapt {

namespace {

size_t conv_size(int cin, int cout, int k) {
  return static_cast<size_t>(cout) * cin * k * k + static_cast<size_t>(cout);
}

std::string conv_name(const std::string& prefix) { return prefix; }

// Visits every convolution as (name, in channels, out channels).
template <typename F>
void for_each_conv(const AdapterConfig& cfg, F&& f) {
  const int levels = cfg.n_levels;
  f(std::string("in"), 1, cfg.base_channels);
  int prev = cfg.base_channels;
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < cfg.convs_per_level; ++j) {
      f("enc" + std::to_string(i) + ".conv" + std::to_string(j), j == 0 ? prev : cfg.channels(i),
        cfg.channels(i));
    }
    prev = cfg.channels(i);
  }
  const int mid = cfg.channels(levels - 1);
  for (int b = 0; b < cfg.n_bottleneck_blocks; ++b) {
    f("mid" + std::to_string(b) + ".conv0", mid, mid);
    f("mid" + std::to_string(b) + ".conv1", mid, mid);
  }
  for (int i = levels - 1; i >= 0; --i) {
    const int from = i == levels - 1 ? mid : cfg.channels(i + 1);
    const std::string d = "dec" + std::to_string(i);
    f(d + ".up", from, cfg.channels(i));
    for (int j = 0; j < cfg.convs_per_level; ++j) {
      f(d + ".conv" + std::to_string(j), j == 0 ? 2 * cfg.channels(i) : cfg.channels(i),
        cfg.channels(i));
    }
  }
  f(std::string("out"), cfg.base_channels, 1);
}

ag::Var conv(const AdapterParams& p, ParamBinding& bind, const std::string& name,
             const ag::Var& x, ag::Grid grid) {
  const int k = p.config.kernel_size;
  return ag::conv2d(x, grid, bind(name + ".w"), bind(name + ".b"), k, k);
}

}  // namespace

void AdapterConfig::validate() const {
  if (n_levels < 1) throw ConfigError("adapter: n_levels must be >= 1");
  if (static_cast<int>(channel_multipliers.size()) != n_levels) {
    throw ConfigError("adapter: need one channel multiplier per level");
  }
  if (n_mels < 1 || base_channels < 1 || n_bottleneck_blocks < 0 || convs_per_level < 1 ||
      kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("adapter: counts must be positive and the kernel size odd");
  }
  for (int m : channel_multipliers) {
    if (m < 1) throw ConfigError("adapter: channel multipliers must be positive");
  }
}

nlohmann::json AdapterConfig::to_json() const {
  return {{"n_mels", n_mels},
          {"n_levels", n_levels},
          {"base_channels", base_channels},
          {"channel_multipliers", channel_multipliers},
          {"n_bottleneck_blocks", n_bottleneck_blocks},
          {"kernel_size", kernel_size},
          {"convs_per_level", convs_per_level},
          {"global_residual", global_residual},
          {"pad_value", pad_value}};
}

AdapterConfig AdapterConfig::from_json(const nlohmann::json& j) {
  AdapterConfig c;
  c.n_mels = j.at("n_mels");
  c.n_levels = j.at("n_levels");
  c.base_channels = j.at("base_channels");
  c.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
  c.n_bottleneck_blocks = j.at("n_bottleneck_blocks");
  c.kernel_size = j.at("kernel_size");
  c.convs_per_level = j.value("convs_per_level", 2);
  c.global_residual = j.value("global_residual", false);
  c.pad_value = j.value("pad_value", -1.5);
  c.validate();
  return c;
}

size_t count_params(const AdapterConfig& cfg) {
  cfg.validate();
  size_t n = 0;
  for_each_conv(cfg, [&](const std::string&, int cin, int cout) {
    n += conv_size(cin, cout, cfg.kernel_size);
  });
  return n;
}

AdapterParams init_adapter(const AdapterConfig& cfg, uint64_t seed) {
  cfg.validate();
  AdapterParams p;
  p.config = cfg;
  p.seed = seed;
  const int k = cfg.kernel_size;
  for_each_conv(cfg, [&](const std::string& name, int cin, int cout) {
    Rng rng(derive_seed(seed, name));
    const double fan_in = static_cast<double>(cin) * k * k;
    double stddev = std::sqrt(2.0 / fan_in);
    // Residual branches and the output layer start small so the untrained
    // network stays close to its skip paths.
    if (name.ends_with(".conv1") && name.starts_with("mid")) stddev *= 0.1;
    if (name == "out") stddev *= 0.1;
    Matrix w(cout, static_cast<Eigen::Index>(cin) * k * k);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
    p.params.add(conv_name(name) + ".w", std::move(w));
    p.params.add(conv_name(name) + ".b", Matrix::Zero(cout, 1));
  });
  return p;
}

ag::Var adapter_forward(const AdapterParams& p, ParamBinding& bind, const ag::Var& input,
                        int frames) {
  const AdapterConfig& cfg = p.config;
  if (input->rows() != 1 || input->cols() != static_cast<Eigen::Index>(frames) * cfg.n_mels) {
    throw ConfigError("adapter expects " + std::to_string(cfg.n_mels) + " mel bins");
  }
  const int unit = 1 << cfg.n_levels;
  const ag::Grid in_grid{frames, cfg.n_mels};
  const int pad_rows = (unit - frames % unit) % unit;
  const int pad_cols = (unit - cfg.n_mels % unit) % unit;
  ag::Grid grid{frames + pad_rows, cfg.n_mels + pad_cols};
  ag::Var x = (pad_rows || pad_cols) ? ag::pad_grid(input, in_grid, pad_rows, pad_cols, cfg.pad_value)
                                     : input;

  ag::Var h = ag::relu(conv(p, bind, "in", x, grid));
  std::vector<ag::Var> skips;
  std::vector<ag::Grid> skip_grids;
  for (int i = 0; i < cfg.n_levels; ++i) {
    for (int j = 0; j < cfg.convs_per_level; ++j) {
      h = ag::relu(conv(p, bind, "enc" + std::to_string(i) + ".conv" + std::to_string(j), h, grid));
    }
    skips.push_back(h);
    skip_grids.push_back(grid);
    h = ag::maxpool2d(h, grid, 2, 2);
    grid = {grid.rows / 2, grid.cols / 2};
  }
  for (int b = 0; b < cfg.n_bottleneck_blocks; ++b) {
    const std::string m = "mid" + std::to_string(b);
    ag::Var y = ag::relu(conv(p, bind, m + ".conv0", h, grid));
    y = conv(p, bind, m + ".conv1", y, grid);
    h = ag::relu(ag::add(h, y));
  }
  for (int i = cfg.n_levels - 1; i >= 0; --i) {
    const std::string d = "dec" + std::to_string(i);
    h = ag::upsample_nearest(h, grid, 2, 2);
    grid = skip_grids[static_cast<size_t>(i)];
    h = ag::relu(conv(p, bind, d + ".up", h, grid));
    const ag::Var parts[] = {h, skips[static_cast<size_t>(i)]};
    h = ag::concat_rows(parts);
    for (int j = 0; j < cfg.convs_per_level; ++j) {
      h = ag::relu(conv(p, bind, d + ".conv" + std::to_string(j), h, grid));
    }
  }
  ag::Var out = conv(p, bind, "out", h, grid);
  if (cfg.global_residual) out = ag::add(out, x);
  if (pad_rows || pad_cols) out = ag::crop_grid(out, grid, in_grid);
  return out;
}

Matrix as_image(const MelSpectrogram& m) {
  return Eigen::Map<const Matrix>(m.values.data(), 1, m.values.size());
}

MelSpectrogram from_image(const Matrix& image, int frames, int n_mels, double frame_hop) {
  return MelSpectrogram{Eigen::Map<const Matrix>(image.data(), n_mels, frames), frame_hop};
}

MelSpectrogram adapt(const AdapterParams& p, const MelSpectrogram& m) {
  if (m.n_mels() != p.config.n_mels) {
    throw ConfigError("adapter expects " + std::to_string(p.config.n_mels) + " mel bins, got " +
                      std::to_string(m.n_mels()));
  }
  ag::NoGradGuard no_grad;
  ParamBinding bind(p.params, false);
  ag::Var out = adapter_forward(p, bind, ag::constant(as_image(m)), m.n_frames());
  return from_image(out->val(), m.n_frames(), m.n_mels(), m.frame_hop);
}

int receptive_radius_frames(const AdapterConfig& cfg) {
  // Dependency spread in input frames, accumulated per layer at its scale.
  const int h = (cfg.kernel_size - 1) / 2;
  int radius = h;  // input conv
  int scale = 1;
  for (int i = 0; i < cfg.n_levels; ++i) {
    radius += cfg.convs_per_level * h * scale;
    radius += scale;  // pooling window
    scale *= 2;
  }
  radius += 2 * cfg.n_bottleneck_blocks * h * scale;
  for (int i = cfg.n_levels - 1; i >= 0; --i) {
    radius += scale;  // nearest-neighbour resize
    scale /= 2;
    radius += (1 + cfg.convs_per_level) * h * scale;
  }
  radius += h;  // output conv
  return radius;
}

void save_adapter(const std::filesystem::path& path, const AdapterParams& p,
                  const nlohmann::json& provenance,
                  const std::map<std::string, Matrix>& extra_tensors) {
  nlohmann::json meta = {{"kind", "adapter"},
                         {"config", p.config.to_json()},
                         {"seed", p.seed},
                         {"param_count", p.params.count()},
                         {"provenance", provenance}};
  std::map<std::string, Matrix> tensors;
  for (const auto& [name, m] : p.params.tensors()) tensors.emplace("param/" + name, m);
  for (const auto& [name, m] : extra_tensors) tensors.emplace("extra/" + name, m);
  write_checkpoint(path, meta, tensors);
}

LoadedAdapter load_adapter(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  if (data.meta.value("kind", "") != "adapter") {
    throw DataError("not an adapter checkpoint: " + path.string());
  }
  LoadedAdapter out;
  try {
    out.adapter.config = AdapterConfig::from_json(data.meta.at("config"));
    out.adapter.seed = data.meta.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad adapter config in " + path.string() + ": " + e.what());
  }
  out.provenance = data.meta.value("provenance", nlohmann::json::object());
  for (auto& [name, m] : data.tensors) {
    if (name.starts_with("param/")) {
      out.adapter.params.add(name.substr(6), std::move(m));
    } else if (name.starts_with("extra/")) {
      out.extra_tensors.emplace(name.substr(6), std::move(m));
    }
  }
  if (out.adapter.params.count() != count_params(out.adapter.config)) {
    throw DataError("adapter checkpoint parameters do not match its config: " + path.string());
  }
  return out;
}

}  // namespace plcadapt
