// Copyright 2026 The pacl2o Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pacl2o/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pacl2o/error.hpp"

namespace pacl2o {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'L', '2', 'O', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr int kProblemSetVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const fs::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    fail(ErrorCode::Format, "truncated file: " + path.string());
  }
  return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, mode | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(path, mode);
  if (!is) fail(ErrorCode::Io, "cannot open: " + path.string());
  return is;
}

nlohmann::json instance_json(const Problem& p) {
  if (const auto* q = p.quadratic()) {
    return {{"id", q->id}, {"m", q->m}, {"L", q->L}, {"rhs", q->rhs}, {"x0", q->x0}};
  }
  const auto* r = p.regression();
  return {{"id", r->id}, {"xs", r->xs}, {"ys", r->ys}, {"coeffs", r->coeffs}, {"x0", r->x0}};
}

}  // namespace

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json problem_set_to_json(const ProblemSet& set) {
  nlohmann::json j;
  j["version"] = kProblemSetVersion;
  j["family"] = std::string(to_string(set.family));
  if (set.family == Family::NnRegression) {
    j["layout"] = {{"degree", set.layout.degree}, {"hidden", set.layout.hidden}};
  }
  j["instances"] = nlohmann::json::array();
  for (const auto& p : set.problems) {
    if (p.family() != set.family) {
      fail(ErrorCode::InvalidArgument, "problem set mixes families");
    }
    j["instances"].push_back(instance_json(p));
  }
  return j;
}

ProblemSet problem_set_from_json(const nlohmann::json& j) {
  ProblemSet set;
  try {
    const int version = j.at("version").get<int>();
    if (version != kProblemSetVersion) {
      fail(ErrorCode::Format, "unsupported problem-set version " + std::to_string(version));
    }
    set.family = family_from_string(j.at("family").get<std::string>());
    if (set.family == Family::NnRegression) {
      set.layout.degree = j.at("layout").at("degree").get<std::size_t>();
      set.layout.hidden = j.at("layout").at("hidden").get<std::size_t>();
    }
    for (const auto& e : j.at("instances")) {
      const auto id = e.at("id").get<std::uint64_t>();
      if (set.family == Family::Quadratic) {
        set.problems.emplace_back(make_quadratic(id, e.at("m").get<double>(),
                                                 e.at("L").get<double>(),
                                                 e.at("rhs").get<Vec>(), e.at("x0").get<Vec>()));
      } else {
        RegressionInstance r;
        r.id = id;
        r.xs = e.at("xs").get<Vec>();
        r.ys = e.at("ys").get<Vec>();
        r.coeffs = e.at("coeffs").get<Vec>();
        r.x0 = e.at("x0").get<Vec>();
        if (r.x0.size() != set.layout.param_dim() || r.xs.size() != r.ys.size()) {
          fail(ErrorCode::Format, "regression instance " + std::to_string(id) +
                                      " does not match the layout");
        }
        set.problems.emplace_back(std::move(r), set.layout);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("problem set: ") + e.what());
  }
  return set;
}

void save_problem_set(const fs::path& path, const ProblemSet& set) {
  write_json(path, problem_set_to_json(set));
}

ProblemSet load_problem_set(const fs::path& path) {
  return problem_set_from_json(read_json(path));
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCkptVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.arch));
  put<std::uint64_t>(os, ckpt.dim);
  const auto& blocks = ckpt.hyper.layout.blocks();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put<std::uint64_t>(os, b.rows);
    put<std::uint64_t>(os, b.cols);
  }
  put<std::uint64_t>(os, ckpt.hyper.flat.size());
  os.write(reinterpret_cast<const char*>(ckpt.hyper.flat.data()),
           static_cast<std::streamsize>(ckpt.hyper.flat.size() * sizeof(double)));
  if (!os) fail(ErrorCode::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  auto is = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    fail(ErrorCode::Format, "not a checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCkptVersion) {
    fail(ErrorCode::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto arch = get<std::uint32_t>(is, path);
  if (arch > 1) fail(ErrorCode::Format, "unknown architecture in " + path.string());
  c.arch = static_cast<ArchKind>(arch);
  c.dim = get<std::uint64_t>(is, path);
  const auto n_blocks = get<std::uint32_t>(is, path);
  std::vector<HyperBlock> blocks;
  std::size_t offset = 0;
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 256) fail(ErrorCode::Format, "corrupt block name in " + path.string());
    HyperBlock b;
    b.name.resize(len);
    if (!is.read(b.name.data(), len)) fail(ErrorCode::Format, "truncated file: " + path.string());
    b.rows = get<std::uint64_t>(is, path);
    b.cols = get<std::uint64_t>(is, path);
    b.offset = offset;
    offset += b.size();
    blocks.push_back(std::move(b));
  }
  const auto n = get<std::uint64_t>(is, path);
  if (n != offset) fail(ErrorCode::Format, "block sizes disagree with payload in " + path.string());
  c.hyper.layout = HyperLayout(std::move(blocks));
  if (!(c.hyper.layout == arch_layout(c.arch, c.dim))) {
    fail(ErrorCode::Format, "checkpoint layout does not match its architecture: " + path.string());
  }
  c.hyper.flat.resize(n);
  if (!is.read(reinterpret_cast<char*>(c.hyper.flat.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    fail(ErrorCode::Format, "truncated file: " + path.string());
  }
  return c;
}

void write_trajectory(const fs::path& path, const Trajectory& traj) {
  auto os = open_out(path);
  os << "# family=" << traj.family << "\n"
     << "# instance=" << traj.instance_id << "\n"
     << "# algorithm=" << traj.algorithm << "\n"
     << "# T=" << traj.horizon() << "\n"
     << "# seed=" << traj.seed << "\n"
     << "# stop=" << to_string(traj.stop) << "\n";
  os << "t,loss,grad_norm,step_norm,stop\n";
  const std::size_t n = traj.losses.size();
  for (std::size_t t = 0; t < n; ++t) {
    const bool last = t + 1 == n;
    os << t << ',' << fmt_double(traj.losses[t]) << ',' << fmt_double(traj.grad_norms[t]) << ','
       << (t > 0 ? fmt_double(traj.step_norms[t - 1]) : std::string("0")) << ','
       << (last && traj.stop != StopReason::Horizon ? 1 : 0) << '\n';
  }
  if (!traj.states.empty()) {
    auto bin = open_out(fs::path(path.string() + ".states.bin"), std::ios::out | std::ios::binary);
    for (const auto& x : traj.states) {
      bin.write(reinterpret_cast<const char*>(x.data()),
                static_cast<std::streamsize>(x.size() * sizeof(double)));
    }
  }
}

nlohmann::json read_json(const fs::path& path) {
  auto is = open_in(path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os << text;
  if (!os) fail(ErrorCode::Io, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  auto is = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace pacl2o
